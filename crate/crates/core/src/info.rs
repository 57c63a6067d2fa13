//! Entropy and mutual information of discrete distributions, in bits.

/// Shannon entropy of a probability vector. Zero entries contribute nothing.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.log2()).sum::<f64>()
}

pub fn binary_entropy(p: f64) -> f64 {
    entropy(&[p, 1.0 - p])
}

/// `I(X;Y)` for input distribution `input` and a row-major transition
/// matrix with `input.len()` rows.
pub fn mutual_information(input: &[f64], transition: &[f64], outputs: usize) -> f64 {
    debug_assert_eq!(transition.len(), input.len() * outputs);
    let mut marginal = vec![0.0; outputs];
    for (w, row) in input.iter().zip(transition.chunks_exact(outputs)) {
        for (q, t) in marginal.iter_mut().zip(row) {
            *q += w * t;
        }
    }
    let mut info = 0.0;
    for (w, row) in input.iter().zip(transition.chunks_exact(outputs)) {
        if *w == 0.0 {
            continue;
        }
        for (t, q) in row.iter().zip(&marginal) {
            if *t > 0.0 {
                info += w * t * (t / q).log2();
            }
        }
    }
    info.max(0.0)
}
