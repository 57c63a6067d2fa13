//! Capacity of the signal-dependent Gaussian channel `p0 -> Y/(nN)`.
//!
//! The continuous channel is discretized on a uniform input grid over
//! `[0, p_max]` and a uniform output binning, then Blahut-Arimoto finds the
//! capacity-achieving input distribution together with matching upper and
//! lower bounds.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::link::{LinkParams, NoiseProfile};
use crate::normal;

pub const DEFAULT_LEVELS: usize = 201;
pub const DEFAULT_BINS: usize = 2000;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Half-width, in standard deviations, of the output support around each level.
pub const SUPPORT_SIGMAS: f64 = 6.0;

const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Probabilities below this are stored as exact zeros. Keeps the iteration
/// out of subnormal arithmetic without affecting any reported digit.
const NEGLIGIBLE_MASS: f64 = 1e-30;

/// `count` equally spaced input levels from 0 to `p_max` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputGrid {
    p_max: f64,
    levels: Vec<f64>,
}

impl InputGrid {
    pub fn uniform(p_max: f64, count: usize) -> Result<Self> {
        if !(p_max > 0.0 && p_max < 1.0) {
            return Err(Error::Domain {
                quantity: "p_max",
                value: p_max,
                domain: "(0, 1)",
            });
        }
        if count < 2 {
            return Err(Error::invalid("levels", format!("need at least 2, got {count}")));
        }
        let last = (count - 1) as f64;
        let levels = (0..count).map(|i| p_max * (i as f64 / last)).collect();
        Ok(Self { p_max, levels })
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Row-stochastic matrix stored densely, with the nonzero span of each row
/// cached so sparse Gaussian rows stay cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    inputs: usize,
    outputs: usize,
    data: Vec<f64>,
    support: Vec<(usize, usize)>,
}

impl TransitionMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let outputs = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * outputs);
        for row in rows {
            if row.len() != outputs {
                return Err(Error::LengthMismatch {
                    expected: outputs,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_dense(rows.len(), outputs, data)
    }

    fn from_dense(inputs: usize, outputs: usize, data: Vec<f64>) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(Error::invalid("transition", "matrix must be non-empty"));
        }
        let mut support = Vec::with_capacity(inputs);
        for (i, row) in data.chunks_exact(outputs).enumerate() {
            if row.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(Error::invalid(
                    "transition",
                    format!("row {i} has a negative or non-finite entry"),
                ));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::invalid(
                    "transition",
                    format!("row {i} sums to {sum}, not 1"),
                ));
            }
            let lo = row.iter().position(|&x| x > 0.0).unwrap_or(0);
            let hi = row.iter().rposition(|&x| x > 0.0).map_or(lo, |j| j + 1);
            support.push((lo, hi));
        }
        Ok(Self {
            inputs,
            outputs,
            data,
            support,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.outputs..(i + 1) * self.outputs]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Half-open range of columns where row `i` can be nonzero.
    pub fn support(&self, i: usize) -> (usize, usize) {
        self.support[i]
    }
}

/// A discretized channel: transition matrix plus the grids that produced it.
#[derive(Debug, Clone)]
pub struct DiscreteChannel {
    matrix: TransitionMatrix,
    input_grid: InputGrid,
    output_edges: Vec<f64>,
    level_stds: Vec<f64>,
}

impl DiscreteChannel {
    pub fn matrix(&self) -> &TransitionMatrix {
        &self.matrix
    }

    pub fn input_grid(&self) -> &InputGrid {
        &self.input_grid
    }

    /// `B + 1` ascending bin edges over the normalized output.
    pub fn output_edges(&self) -> &[f64] {
        &self.output_edges
    }

    /// Normalized output standard deviation at each input level.
    pub fn level_stds(&self) -> &[f64] {
        &self.level_stds
    }
}

/// Builds the `K x B` transition matrix of the Gaussian channel whose mean at
/// level `p0` is `p0` and whose deviation is `noise.normalized_std(p0)`.
///
/// The output range spans every level's `+-6 sigma` window; the two Gaussian
/// tails are folded into the outermost bins. Levels without noise become
/// unit-mass rows.
pub fn discretize_channel<N>(noise: &N, grid: &InputGrid, bins: usize) -> Result<DiscreteChannel>
where
    N: NoiseProfile + ?Sized,
{
    if bins < 2 {
        return Err(Error::invalid("bins", format!("need at least 2, got {bins}")));
    }
    let levels = grid.levels();
    let stds = levels
        .iter()
        .map(|&p| noise.normalized_std(p))
        .collect::<Result<Vec<_>>>()?;
    if let Some(&bad) = stds.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(Error::Domain {
            quantity: "normalized output std",
            value: bad,
            domain: "[0, inf)",
        });
    }

    let (lo, hi) = levels
        .iter()
        .zip(&stds)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&m, &s)| {
            (lo.min(m - SUPPORT_SIGMAS * s), hi.max(m + SUPPORT_SIGMAS * s))
        });
    if !(hi > lo) {
        return Err(Error::DegenerateChannel);
    }
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..=bins).map(|j| lo + j as f64 * width).collect();
    edges[bins] = hi;

    let mut data = vec![0.0; levels.len() * bins];
    for ((&mean, &std), row) in levels.iter().zip(&stds).zip(data.chunks_exact_mut(bins)) {
        if std == 0.0 {
            let j = ((mean - lo) / width).floor().clamp(0.0, (bins - 1) as f64) as usize;
            row[j] = 1.0;
            continue;
        }
        let z = |j: usize| {
            if j == 0 {
                f64::NEG_INFINITY
            } else if j == bins {
                f64::INFINITY
            } else {
                (edges[j] - mean) / std
            }
        };
        let mut lower = z(0);
        for (j, cell) in row.iter_mut().enumerate() {
            let upper = z(j + 1);
            let mass = normal::interval(lower, upper);
            *cell = if mass < NEGLIGIBLE_MASS { 0.0 } else { mass };
            lower = upper;
        }
    }

    Ok(DiscreteChannel {
        matrix: TransitionMatrix::from_dense(levels.len(), bins, data)?,
        input_grid: grid.clone(),
        output_edges: edges,
        level_stds: stds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityResult {
    /// Lower capacity bound at termination, in bits per channel use.
    pub capacity_bits: f64,
    pub input_distribution: Vec<f64>,
    pub iterations: usize,
    /// Upper minus lower bound at termination, in bits.
    pub upper_bound_gap: f64,
    pub converged: bool,
    /// Lower bound (bits) after every iteration.
    #[serde(skip)]
    pub lower_bound_trace: Vec<f64>,
}

impl CapacityResult {
    pub fn warning(&self) -> Option<ConvergenceWarning> {
        (!self.converged).then_some(ConvergenceWarning {
            gap: self.upper_bound_gap,
            iterations: self.iterations,
        })
    }
}

/// Blahut-Arimoto stopped at its iteration cap before the bound gap closed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceWarning {
    pub gap: f64,
    pub iterations: usize,
}

impl fmt::Display for ConvergenceWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Blahut-Arimoto did not converge after {} iterations (bound gap {:e} bits)",
            self.iterations, self.gap
        )
    }
}

/// Dot product over four independent lanes, which lets the compiler vectorize it.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut lanes = [0.0; 4];
    let (a4, b4) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = a4.remainder().iter().zip(b4.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in a4.zip(b4) {
        for l in 0..4 {
            lanes[l] += x[l] * y[l];
        }
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

/// Capacity of a discrete memoryless channel.
///
/// Each iteration computes `D_i = KL(W_i || q)` for the current input `p`,
/// giving `ln sum_i p_i e^{D_i} <= C <= max_i D_i`; it stops once the gap
/// is at most `tol` bits, otherwise after `max_iter` iterations with
/// `converged = false`.
pub fn blahut_arimoto(matrix: &TransitionMatrix, tol: f64, max_iter: usize) -> Result<CapacityResult> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", format!("must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(Error::invalid("max_iter", "must be at least 1"));
    }
    let k = matrix.inputs();
    let b = matrix.outputs();

    let neg_entropy: Vec<f64> = (0..k)
        .map(|i| {
            let (lo, hi) = matrix.support(i);
            matrix.row(i)[lo..hi]
                .iter()
                .filter(|&&w| w > 0.0)
                .map(|&w| w * w.ln())
                .sum()
        })
        .collect();

    let mut p = vec![1.0 / k as f64; k];
    let mut q = vec![0.0; b];
    let mut ln_q = vec![0.0; b];
    let mut d = vec![0.0; k];
    let mut trace = Vec::new();
    let mut lower = 0.0;
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        q.iter_mut().for_each(|x| *x = 0.0);
        for (i, &pi) in p.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            let (lo, hi) = matrix.support(i);
            for (qj, &w) in q[lo..hi].iter_mut().zip(&matrix.row(i)[lo..hi]) {
                *qj += pi * w;
            }
        }
        for (l, &x) in ln_q.iter_mut().zip(&q) {
            *l = x.max(f64::MIN_POSITIVE).ln();
        }
        for (i, di) in d.iter_mut().enumerate() {
            let (lo, hi) = matrix.support(i);
            *di = neg_entropy[i] - dot(&matrix.row(i)[lo..hi], &ln_q[lo..hi]);
        }
        let d_max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = p.iter().zip(&d).map(|(&pi, &di)| pi * (di - d_max).exp()).sum();
        let lower_nats = d_max + z.ln();
        lower = lower_nats.max(0.0) / std::f64::consts::LN_2;
        gap = ((d_max - lower_nats) / std::f64::consts::LN_2).max(0.0);
        trace.push(lower);

        for (pi, &di) in p.iter_mut().zip(&d) {
            let next = *pi * (di - d_max).exp() / z;
            *pi = if next < NEGLIGIBLE_MASS { 0.0 } else { next };
        }
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);

        if gap <= tol {
            converged = true;
            break;
        }
    }

    Ok(CapacityResult {
        capacity_bits: lower,
        input_distribution: p,
        iterations,
        upper_bound_gap: gap,
        converged,
        lower_bound_trace: trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacitySettings {
    pub levels: usize,
    pub bins: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CapacitySettings {
    fn default() -> Self {
        Self {
            levels: DEFAULT_LEVELS,
            bins: DEFAULT_BINS,
            tol: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Discretizes at `p_max` and runs Blahut-Arimoto.
pub fn capacity<N>(noise: &N, p_max: f64, settings: &CapacitySettings) -> Result<CapacityResult>
where
    N: NoiseProfile + ?Sized,
{
    let grid = InputGrid::uniform(p_max, settings.levels)?;
    let channel = discretize_channel(noise, &grid, settings.bins)?;
    blahut_arimoto(channel.matrix(), settings.tol, settings.max_iter)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub bacteria: u32,
    pub p_max: f64,
    pub outcome: Result<CapacityResult>,
}

/// One capacity per `(bacteria, p_max)` pair, bacteria-major, in input order.
/// Cells that fail record their error and the sweep continues.
pub fn capacity_sweep(
    link: &LinkParams,
    p_max_grid: &[f64],
    bacteria: &[u32],
    settings: &CapacitySettings,
) -> Vec<SweepCell> {
    let cells: Vec<(u32, f64)> = bacteria
        .iter()
        .flat_map(|&n| p_max_grid.iter().map(move |&p| (n, p)))
        .collect();
    cells
        .into_par_iter()
        .map(|(n, p_max)| SweepCell {
            bacteria: n,
            p_max,
            outcome: link
                .with_bacteria(n)
                .and_then(|l| capacity(&l, p_max, settings)),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::{binary_entropy, mutual_information};
    use crate::link::Noiseless;

    fn bsc(e: f64) -> TransitionMatrix {
        TransitionMatrix::from_rows(&[vec![1.0 - e, e], vec![e, 1.0 - e]]).unwrap()
    }

    #[test]
    fn grid_is_uniform_with_exact_endpoints() {
        let g = InputGrid::uniform(0.8, 5).unwrap();
        assert_eq!(g.levels()[0], 0.0);
        assert_eq!(*g.levels().last().unwrap(), 0.8);
        for w in g.levels().windows(2) {
            assert!((w[1] - w[0] - 0.2).abs() < 1e-12);
        }
        assert!(InputGrid::uniform(1.0, 5).is_err());
        assert!(InputGrid::uniform(0.5, 1).is_err());
    }

    #[test]
    fn matrix_validation() {
        assert!(TransitionMatrix::from_rows(&[vec![0.5, 0.6]]).is_err());
        assert!(TransitionMatrix::from_rows(&[vec![1.5, -0.5]]).is_err());
        assert!(TransitionMatrix::from_rows(&[vec![1.0], vec![0.5, 0.5]]).is_err());
        let m = TransitionMatrix::from_rows(&[vec![0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(m.support(0), (1, 2));
    }

    #[test]
    fn identity_channel_has_one_bit() {
        let m = TransitionMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let r = blahut_arimoto(&m, 1e-12, 100).unwrap();
        assert!((r.capacity_bits - 1.0).abs() < 1e-9);
        assert!((r.input_distribution[0] - 0.5).abs() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn binary_symmetric_channel_matches_closed_form() {
        let r = blahut_arimoto(&bsc(0.1), 1e-12, 1000).unwrap();
        assert!((r.capacity_bits - (1.0 - binary_entropy(0.1))).abs() < 1e-9);
        assert!((r.capacity_bits - 0.531_004_406_410_718_8).abs() < 1e-9);
    }

    #[test]
    fn binary_erasure_channel_matches_closed_form() {
        let m = TransitionMatrix::from_rows(&[vec![0.75, 0.25, 0.0], vec![0.0, 0.25, 0.75]]).unwrap();
        let r = blahut_arimoto(&m, 1e-12, 1000).unwrap();
        assert!((r.capacity_bits - 0.75).abs() < 1e-9);
    }

    #[test]
    fn asymmetric_channel_capacity_is_consistent_with_its_distribution() {
        // Z-channel: optimum is not uniform
        let m = TransitionMatrix::from_rows(&[vec![1.0, 0.0], vec![0.3, 0.7]]).unwrap();
        let r = blahut_arimoto(&m, 1e-12, 10_000).unwrap();
        let mi = mutual_information(&r.input_distribution, m.as_slice(), 2);
        assert!((mi - r.capacity_bits).abs() < 1e-9);
        // brute force over the input probability
        let best = (1..100_000)
            .map(|i| {
                let a = i as f64 / 100_000.0;
                mutual_information(&[1.0 - a, a], m.as_slice(), 2)
            })
            .fold(0.0, f64::max);
        assert!((best - r.capacity_bits).abs() < 1e-8);
    }

    #[test]
    fn lower_bound_never_decreases() {
        let m = TransitionMatrix::from_rows(&[
            vec![0.7, 0.2, 0.1, 0.0],
            vec![0.1, 0.6, 0.2, 0.1],
            vec![0.0, 0.1, 0.3, 0.6],
        ])
        .unwrap();
        let r = blahut_arimoto(&m, 1e-14, 5000).unwrap();
        for w in r.lower_bound_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-14, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn iteration_cap_reports_a_warning() {
        // asymmetric, so the uniform start is not already optimal
        let z = TransitionMatrix::from_rows(&[vec![1.0, 0.0], vec![0.4, 0.6]]).unwrap();
        let r = blahut_arimoto(&z, 1e-15, 1).unwrap();
        assert_eq!(r.iterations, 1);
        let w = r.warning().expect("should not converge in one step");
        assert!(w.gap >= 0.0);
        assert!(blahut_arimoto(&bsc(0.3), 0.0, 10).is_err());
        assert!(blahut_arimoto(&bsc(0.3), 1e-9, 0).is_err());
    }

    #[test]
    fn noiseless_levels_become_unit_rows() {
        let grid = InputGrid::uniform(0.9, 10).unwrap();
        let ch = discretize_channel(&Noiseless, &grid, 25).unwrap();
        let mut seen = Vec::new();
        for i in 0..10 {
            let (lo, hi) = ch.matrix().support(i);
            assert_eq!(hi - lo, 1);
            assert_eq!(ch.matrix().row(i)[lo], 1.0);
            seen.push(lo);
        }
        seen.dedup();
        assert_eq!(seen.len(), 10);
        let r = blahut_arimoto(ch.matrix(), 1e-9, 10_000).unwrap();
        assert!((r.capacity_bits - 10f64.log2()).abs() < 1e-9);
    }

    #[test]
    fn zero_variance_endpoint_is_a_delta_row() {
        let grid = InputGrid::uniform(0.6, 2).unwrap();
        let noise = |p: f64| 0.05 * p;
        let ch = discretize_channel(&noise, &grid, 100).unwrap();
        assert_eq!(ch.matrix().row(0).iter().filter(|&&x| x > 0.0).count(), 1);
        assert!(ch.matrix().row(1).iter().filter(|&&x| x > 0.0).count() > 10);
        assert_eq!(ch.level_stds()[0], 0.0);
        // support is [0 - 0, 0.6 + 6 * 0.03]
        assert!((ch.output_edges()[100] - 0.78).abs() < 1e-12);
    }

    #[test]
    fn degenerate_channel_is_rejected() {
        struct Fixed;
        impl NoiseProfile for Fixed {
            fn normalized_std(&self, _: f64) -> Result<f64> {
                Ok(f64::NAN)
            }
        }
        let grid = InputGrid::uniform(0.5, 3).unwrap();
        assert!(discretize_channel(&Fixed, &grid, 10).is_err());
        assert!(discretize_channel(&Noiseless, &grid, 1).is_err());
    }

    #[test]
    fn gaussian_rows_fold_their_tails() {
        let grid = InputGrid::uniform(0.5, 3).unwrap();
        let noise = |_p: f64| 0.1;
        let ch = discretize_channel(&noise, &grid, 50).unwrap();
        let row = ch.matrix().row(2);
        // level 0.5 sits more than 10 sigma above the first interior edge
        assert!(row[0] > 0.0 && row[0] < 1e-20);
        let top = normal::sf((ch.output_edges()[49] - 0.5) / 0.1);
        assert!((row[49] - top).abs() < 1e-15);
        let sum: f64 = row.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
}
