//! M-ary concentration signaling over `[0, p_max]`.
//!
//! Symbols sit on a uniform grid of binding probabilities. A symbol is in
//! error when its noise pushes the output past the midpoint towards a
//! neighbour; all error quantities live in the normalized output domain
//! `Y / (nN)`, where symbol spacing is `p_max / (m - 1)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::capacity::{blahut_arimoto, discretize_channel, CapacityResult, InputGrid};
use crate::capacity::{DEFAULT_BINS, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::info::mutual_information;
use crate::link::NoiseProfile;
use crate::normal;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Points in the coarse `p_max` scan of the feasibility search.
pub const FEASIBILITY_SCAN_POINTS: usize = 512;

/// Absolute `p_max` resolution of the feasibility bisection.
pub const FEASIBILITY_RESOLUTION: f64 = 1e-6;

/// Scan points evaluated together; fixed so results never depend on the thread count.
const SCAN_CHUNK: usize = 32;

/// `m` levels `p_max * i / (m - 1)`.
pub fn symbol_levels(m: usize, p_max: f64) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(Error::Domain {
            quantity: "symbol count",
            value: m as f64,
            domain: "[2, inf)",
        });
    }
    Ok(InputGrid::uniform(p_max, m)?.levels().to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulationScheme {
    m: usize,
    p_max: f64,
    levels: Vec<f64>,
    weights: Vec<f64>,
}

impl ModulationScheme {
    /// Equiprobable symbols.
    pub fn uniform(m: usize, p_max: f64) -> Result<Self> {
        let levels = symbol_levels(m, p_max)?;
        Ok(Self {
            m,
            p_max,
            levels,
            weights: vec![1.0 / m as f64; m],
        })
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.m {
            return Err(Error::LengthMismatch {
                expected: self.m,
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("weights", "must be nonnegative"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::invalid("weights", format!("sum to {sum}, not 1")));
        }
        self.weights = weights;
        Ok(self)
    }

    /// Symbols weighted by the capacity-achieving distribution of the
    /// `m`-level channel. The Blahut-Arimoto result is returned alongside.
    pub fn optimized<N>(noise: &N, m: usize, p_max: f64, settings: &WeightSettings) -> Result<(Self, CapacityResult)>
    where
        N: NoiseProfile + ?Sized,
    {
        let scheme = Self::uniform(m, p_max)?;
        let ba = symbol_weights_with(noise, &scheme, settings)?;
        let scheme = scheme.with_weights(ba.input_distribution.clone())?;
        Ok((scheme, ba))
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Distance from a symbol to the decision threshold, `p_max / (2(m-1))`.
    pub fn decision_half_width(&self) -> f64 {
        self.p_max / (2.0 * (self.m - 1) as f64)
    }
}

/// Discretization and Blahut-Arimoto settings used to derive symbol weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSettings {
    pub bins: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for WeightSettings {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            tol: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

fn level_stds<N: NoiseProfile + ?Sized>(noise: &N, levels: &[f64]) -> Result<Vec<f64>> {
    levels.iter().map(|&p| noise.normalized_std(p)).collect()
}

/// Two-sided error `2 Q(half_width / sigma)`; zero for a noiseless symbol.
fn two_sided_error(half_width: f64, std: f64) -> f64 {
    if std == 0.0 {
        0.0
    } else {
        2.0 * normal::sf(half_width / std)
    }
}

/// Probability that each symbol's output leaves its `+-p_max/(2(m-1))`
/// window. The two-sided rule applies to the end symbols as well.
pub fn symbol_error_probabilities<N>(noise: &N, scheme: &ModulationScheme) -> Result<Vec<f64>>
where
    N: NoiseProfile + ?Sized,
{
    let half = scheme.decision_half_width();
    Ok(level_stds(noise, scheme.levels())?
        .into_iter()
        .map(|s| two_sided_error(half, s))
        .collect())
}

/// Capacity-achieving weights of the channel restricted to the scheme's levels.
pub fn symbol_weights<N>(noise: &N, scheme: &ModulationScheme, tol: f64) -> Result<CapacityResult>
where
    N: NoiseProfile + ?Sized,
{
    symbol_weights_with(
        noise,
        scheme,
        &WeightSettings {
            tol,
            ..WeightSettings::default()
        },
    )
}

fn symbol_weights_with<N>(noise: &N, scheme: &ModulationScheme, settings: &WeightSettings) -> Result<CapacityResult>
where
    N: NoiseProfile + ?Sized,
{
    let grid = InputGrid::uniform(scheme.p_max, scheme.m)?;
    let channel = discretize_channel(noise, &grid, settings.bins)?;
    blahut_arimoto(channel.matrix(), settings.tol, settings.max_iter)
}

/// `sum_i w_i p_{e,i}`.
pub fn total_error(scheme: &ModulationScheme, per_symbol: &[f64]) -> Result<f64> {
    if per_symbol.len() != scheme.m {
        return Err(Error::LengthMismatch {
            expected: scheme.m,
            found: per_symbol.len(),
        });
    }
    Ok(scheme
        .weights
        .iter()
        .zip(per_symbol)
        .map(|(w, e)| w * e)
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulationReport {
    pub per_symbol_error: Vec<f64>,
    pub total_error: f64,
    /// Mutual information of the hard-decision channel under the scheme weights.
    pub rate_bits: f64,
    pub decision_half_width: f64,
    /// `1 - sum_i w_i P(decide i | sent i)` with the outer decision regions
    /// extended to infinity.
    pub region_error: f64,
    /// Row-major `m x m` hard-decision transition matrix.
    pub hard_decision: Vec<f64>,
}

/// Hard-decision transition matrix: symbol `i` is decided as `j` when the
/// normalized output falls between the midpoints around level `j`.
pub fn hard_decision_channel<N>(noise: &N, scheme: &ModulationScheme) -> Result<Vec<f64>>
where
    N: NoiseProfile + ?Sized,
{
    let m = scheme.m;
    let levels = scheme.levels();
    let stds = level_stds(noise, levels)?;
    let thresholds: Vec<f64> = levels.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let edge = |j: usize| match j {
        0 => f64::NEG_INFINITY,
        j if j == m => f64::INFINITY,
        j => thresholds[j - 1],
    };
    let mut out = vec![0.0; m * m];
    for (i, (&mean, &std)) in levels.iter().zip(&stds).enumerate() {
        let row = &mut out[i * m..(i + 1) * m];
        if std == 0.0 {
            row[i] = 1.0;
            continue;
        }
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = normal::interval((edge(j) - mean) / std, (edge(j + 1) - mean) / std);
        }
    }
    Ok(out)
}

pub fn modulation_rate<N>(noise: &N, scheme: &ModulationScheme) -> Result<ModulationReport>
where
    N: NoiseProfile + ?Sized,
{
    let per_symbol_error = symbol_error_probabilities(noise, scheme)?;
    let total = total_error(scheme, &per_symbol_error)?;
    let hard = hard_decision_channel(noise, scheme)?;
    let m = scheme.m;
    let correct: f64 = (0..m).map(|i| scheme.weights[i] * hard[i * m + i]).sum();
    Ok(ModulationReport {
        rate_bits: mutual_information(&scheme.weights, &hard, m),
        total_error: total,
        per_symbol_error,
        decision_half_width: scheme.decision_half_width(),
        region_error: (1.0 - correct).max(0.0),
        hard_decision: hard,
    })
}

/// Weighted total error at `p_max`, weights re-derived for that `p_max`.
pub fn optimized_total_error<N>(noise: &N, m: usize, p_max: f64, settings: &WeightSettings) -> Result<f64>
where
    N: NoiseProfile + ?Sized,
{
    let (scheme, _) = ModulationScheme::optimized(noise, m, p_max, settings)?;
    let errors = symbol_error_probabilities(noise, &scheme)?;
    total_error(&scheme, &errors)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Feasibility {
    Feasible { p_max: f64, total_error: f64 },
    /// No scanned `p_max` met the target; carries the best error found.
    Infeasible { min_error: f64, at_p_max: f64 },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }
}

/// Smallest `p_max` in `(0, p_max_cap]` whose optimized total error is at
/// most `target_error`.
///
/// The error is not monotone in `p_max`, so a uniform scan locates the first
/// qualifying grid point before bisecting between it and its predecessor.
pub fn min_power_for_target_error<N>(
    noise: &N,
    m: usize,
    target_error: f64,
    p_max_cap: f64,
    settings: &WeightSettings,
) -> Result<Feasibility>
where
    N: NoiseProfile + Sync + ?Sized,
{
    if !(target_error > 0.0 && target_error < 1.0) {
        return Err(Error::Domain {
            quantity: "target error",
            value: target_error,
            domain: "(0, 1)",
        });
    }
    if !(p_max_cap > 0.0 && p_max_cap < 1.0) {
        return Err(Error::Domain {
            quantity: "p_max cap",
            value: p_max_cap,
            domain: "(0, 1)",
        });
    }
    let step = p_max_cap / FEASIBILITY_SCAN_POINTS as f64;
    let points: Vec<f64> = (1..=FEASIBILITY_SCAN_POINTS)
        .map(|k| if k == FEASIBILITY_SCAN_POINTS { p_max_cap } else { step * k as f64 })
        .collect();
    let mut best = (f64::INFINITY, p_max_cap);
    let mut previous = 0.0;
    for chunk in points.chunks(SCAN_CHUNK) {
        // evaluated in parallel, consumed in order
        let errors: Vec<Result<f64>> = chunk
            .par_iter()
            .map(|&p| optimized_total_error(noise, m, p, settings))
            .collect();
        for (&p, err) in chunk.iter().zip(errors) {
            let err = err?;
            if err <= target_error {
                if previous == 0.0 {
                    return Ok(Feasibility::Feasible { p_max: p, total_error: err });
                }
                let (mut lo, mut hi, mut hi_err) = (previous, p, err);
                while hi - lo > FEASIBILITY_RESOLUTION {
                    let mid = 0.5 * (lo + hi);
                    let e = optimized_total_error(noise, m, mid, settings)?;
                    if e <= target_error {
                        hi = mid;
                        hi_err = e;
                    } else {
                        lo = mid;
                    }
                }
                return Ok(Feasibility::Feasible { p_max: hi, total_error: hi_err });
            }
            if err < best.0 {
                best = (err, p);
            }
            previous = p;
        }
    }
    Ok(Feasibility::Infeasible {
        min_error: best.0,
        at_p_max: best.1,
    })
}
