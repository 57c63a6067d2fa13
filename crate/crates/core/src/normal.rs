//! Standard normal distribution helpers with accurate tails.

use std::f64::consts::SQRT_2;

use libm::erfc;

/// `Phi(z)`.
pub fn cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Upper tail `Q(z) = 1 - Phi(z)`.
pub fn sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// `P(lo < Z <= hi)`, evaluated on whichever side of zero avoids cancellation.
pub fn interval(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if lo >= 0.0 {
        sf(lo) - sf(hi)
    } else if hi <= 0.0 {
        cdf(hi) - cdf(lo)
    } else {
        1.0 - cdf(lo) - sf(hi)
    }
}
