//! Exact bacterium-level simulation of the link.
//!
//! Every bacterium draws its own gain perturbation, binds with the exact
//! rational binding probability and activates a Binomial number of
//! receptors. No Gaussian or Taylor approximation enters, so the sampler can
//! serve as an oracle for the closed forms in [`crate::link`].
//!
//! Trial `t` draws from a ChaCha8 generator seeded with the run seed on
//! stream `t`. Results are gathered in trial order and reduced sequentially
//! with compensated sums, so estimates are bit-identical for any thread
//! count.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::link::{BacteriumParams, LinkMoments, LinkParams, NodeParams, VarianceMode};

/// Relative model-bias allowance added to the mean check.
pub const MEAN_BIAS_ALLOWANCE: f64 = 0.01;

/// Relative tolerance of the variance check.
pub const VARIANCE_TOLERANCE: f64 = 0.10;

/// Standard errors allowed on either check.
pub const STANDARD_ERRORS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    /// Pair each trial with one driven by the complemented random stream.
    pub antithetic: bool,
}

impl SimConfig {
    pub fn new(trials: u64, seed: u64) -> Result<Self> {
        let cfg = Self {
            trials,
            seed,
            antithetic: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_antithetic(mut self, antithetic: bool) -> Result<Self> {
        self.antithetic = antithetic;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.trials < 2 {
            return Err(Error::invalid("trials", format!("need at least 2, got {}", self.trials)));
        }
        if self.antithetic && self.trials % 2 != 0 {
            return Err(Error::invalid(
                "trials",
                format!("antithetic runs need an even trial count, got {}", self.trials),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub variance: f64,
    pub std_error_mean: f64,
    pub std_error_variance: f64,
    pub trials: u64,
}

/// Generator driven by the bitwise complement of another, so uniforms map
/// to `1 - u` up to rounding.
struct Complement<R>(R);

impl<R: RngCore> RngCore for Complement<R> {
    fn next_u32(&mut self) -> u32 {
        !self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        !self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst);
        for b in dst {
            *b = !*b;
        }
    }
}

fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `cfg.trials` draws in parallel and returns them in trial order.
fn run_trials<T, F>(cfg: &SimConfig, draw: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut dyn RngCore) -> T + Sync,
{
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            if cfg.antithetic {
                let mut rng = trial_rng(cfg.seed, t / 2);
                if t % 2 == 0 {
                    draw(&mut rng)
                } else {
                    draw(&mut Complement(rng))
                }
            } else {
                draw(&mut trial_rng(cfg.seed, t))
            }
        })
        .collect()
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct Sum {
    total: f64,
    compensation: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.total + x;
        if self.total.abs() >= x.abs() {
            self.compensation += (self.total - t) + x;
        } else {
            self.compensation += (x - t) + self.total;
        }
        self.total = t;
    }

    fn value(&self) -> f64 {
        self.total + self.compensation
    }
}

fn compensated_mean(xs: impl Iterator<Item = f64>) -> f64 {
    let mut s = Sum::default();
    let mut n = 0usize;
    for x in xs {
        s.add(x);
        n += 1;
    }
    s.value() / n as f64
}

fn moments(samples: &[f64], antithetic: bool) -> MomentEstimate {
    let n = samples.len() as f64;
    let mean = compensated_mean(samples.iter().copied());
    let (mut m2, mut m4) = (Sum::default(), Sum::default());
    for &x in samples {
        let d = (x - mean) * (x - mean);
        m2.add(d);
        m4.add(d * d);
    }
    let variance = m2.value() / (n - 1.0);
    let m4 = m4.value() / n;
    let var_of_var = (m4 - variance * variance * (n - 3.0) / (n - 1.0)) / n;
    let std_error_mean = if antithetic {
        // antithetic pairs are independent of each other, not within
        let pairs: Vec<f64> = samples.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        let k = pairs.len() as f64;
        let pm = compensated_mean(pairs.iter().copied());
        let pv = compensated_mean(pairs.iter().map(|x| (x - pm) * (x - pm))) * k / (k - 1.0);
        (pv / k).sqrt()
    } else {
        (variance / n).sqrt()
    };
    MomentEstimate {
        mean,
        variance,
        std_error_mean,
        std_error_variance: var_of_var.max(0.0).sqrt(),
        trials: samples.len() as u64,
    }
}

/// Sample moments of `cfg.trials` draws of `sampler`.
pub fn estimate_moments<F>(sampler: F, cfg: &SimConfig) -> Result<MomentEstimate>
where
    F: Fn(&mut dyn RngCore) -> f64 + Sync,
{
    cfg.validate()?;
    let samples = run_trials(cfg, sampler);
    Ok(moments(&samples, cfg.antithetic))
}

/// Per-node sampler with validated distributions.
#[derive(Debug, Clone, Copy)]
struct NodeSampler {
    bacteria: u32,
    receptors: u64,
    gain: f64,
    dissociation: f64,
    gain_noise: Option<Normal<f64>>,
}

impl NodeSampler {
    fn new(node: &NodeParams) -> Self {
        let b: &BacteriumParams = node.bacterium();
        let sd = b.gain() * b.gain_noise_rel_var().sqrt();
        Self {
            bacteria: node.bacteria(),
            receptors: u64::from(b.receptors()),
            gain: b.gain(),
            dissociation: b.dissociation(),
            gain_noise: (sd > 0.0).then(|| Normal::new(0.0, sd).expect("finite positive sd")),
        }
    }

    /// Total activated receptors at concentration `a`; counts gains clamped at 0.
    fn draw<R: Rng + ?Sized>(&self, a: f64, rng: &mut R, clamps: &mut u64) -> u64 {
        let mut total = 0;
        for _ in 0..self.bacteria {
            let mut gain = self.gain;
            if let Some(noise) = &self.gain_noise {
                gain += noise.sample(rng);
                if gain < 0.0 {
                    gain = 0.0;
                    *clamps += 1;
                }
            }
            let bound = gain * a;
            let p = if bound == 0.0 { 0.0 } else { bound / (bound + self.dissociation) };
            total += Binomial::new(self.receptors, p)
                .expect("binding probability lies in [0, 1)")
                .sample(rng);
        }
        total
    }
}

/// One full-chain draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ChainDraw {
    x: u64,
    y: u64,
    clamps: u64,
}

#[derive(Debug, Clone, Copy)]
struct ChainSampler {
    transmitter: NodeSampler,
    receiver: NodeSampler,
    stimulus: f64,
    /// `G(r) alpha`, turning transmitter activations into concentration.
    delivery: f64,
}

impl ChainSampler {
    fn new(link: &LinkParams, a0: f64) -> Result<Self> {
        Ok(Self {
            transmitter: NodeSampler::new(link.transmitter()),
            receiver: NodeSampler::new(link.receiver()),
            stimulus: link.stimulus_concentration(a0)?,
            delivery: link.channel_gain() * link.transmitter().production(),
        })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ChainDraw {
        let mut clamps = 0;
        let x = self.transmitter.draw(self.stimulus, rng, &mut clamps);
        // the whole receiver node sees one shared concentration
        let y = self.receiver.draw(self.delivery * x as f64, rng, &mut clamps);
        ChainDraw { x, y, clamps }
    }
}

fn check_concentration(a: f64) -> Result<()> {
    if a.is_finite() && a >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            quantity: "stimulus concentration",
            value: a,
            domain: "[0, inf)",
        })
    }
}

/// One draw of the transmitter's activated-receptor count `X` under stimulus `a1`.
pub fn sample_transmitter<R: Rng + ?Sized>(a1: f64, link: &LinkParams, rng: &mut R) -> Result<u64> {
    check_concentration(a1)?;
    Ok(NodeSampler::new(link.transmitter()).draw(a1, rng, &mut 0))
}

/// One draw of the receiver output `Y` when the transmitter targets `a0`.
pub fn sample_link_output<R: Rng + ?Sized>(a0: f64, link: &LinkParams, rng: &mut R) -> Result<u64> {
    Ok(ChainSampler::new(link, a0)?.draw(rng).y)
}

/// Transmitter moments over `cfg.trials` draws at stimulus `a1`.
pub fn transmitter_moments(a1: f64, link: &LinkParams, cfg: &SimConfig) -> Result<MomentEstimate> {
    check_concentration(a1)?;
    let node = NodeSampler::new(link.transmitter());
    estimate_moments(|rng| node.draw(a1, rng, &mut 0) as f64, cfg)
}

/// Analytic and empirical moments of one quantity with their verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentCheck {
    pub analytic: LinkMoments,
    pub empirical: MomentEstimate,
    /// `(empirical - analytic) / analytic`; zero when both vanish.
    pub mean_gap: f64,
    pub variance_gap: f64,
    pub mean_pass: bool,
    pub variance_pass: bool,
}

impl MomentCheck {
    /// Mean passes within `3 SE + 1% |analytic|`; variance within
    /// `10% analytic + 3 SE`.
    pub fn new(analytic: LinkMoments, empirical: MomentEstimate) -> Self {
        let mean_err = (empirical.mean - analytic.mean).abs();
        let var_err = (empirical.variance - analytic.variance).abs();
        Self {
            analytic,
            empirical,
            mean_gap: relative_gap(empirical.mean, analytic.mean),
            variance_gap: relative_gap(empirical.variance, analytic.variance),
            mean_pass: mean_err
                <= STANDARD_ERRORS * empirical.std_error_mean + MEAN_BIAS_ALLOWANCE * analytic.mean.abs(),
            variance_pass: var_err
                <= VARIANCE_TOLERANCE * analytic.variance.abs()
                    + STANDARD_ERRORS * empirical.std_error_variance,
        }
    }

    pub fn passed(&self) -> bool {
        self.mean_pass && self.variance_pass
    }
}

fn relative_gap(empirical: f64, analytic: f64) -> f64 {
    if analytic == 0.0 {
        if empirical == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(empirical)
        }
    } else {
        (empirical - analytic) / analytic
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationPoint {
    pub p0: f64,
    /// Mean received concentration targeted by the transmitter.
    pub a0: f64,
    pub a1: f64,
    pub x: MomentCheck,
    pub a2: MomentCheck,
    pub y: MomentCheck,
    pub clamp_events: u64,
    /// Total gain perturbations drawn, the denominator of the clamp rate.
    pub gain_draws: u64,
}

impl ValidationPoint {
    pub fn passed(&self) -> bool {
        self.x.passed() && self.a2.passed() && self.y.passed()
    }

    pub fn clamp_rate(&self) -> f64 {
        if self.gain_draws == 0 {
            0.0
        } else {
            self.clamp_events as f64 / self.gain_draws as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub mode: VarianceMode,
    pub config: SimConfig,
    pub points: Vec<ValidationPoint>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.points.iter().all(ValidationPoint::passed)
    }
}

/// Compares simulated `X`, `A2` and `Y` against the closed forms at every
/// receiver level in `p0_grid`. Point `k` uses seed `cfg.seed + k`.
pub fn validate_approximations(link: &LinkParams, p0_grid: &[f64], cfg: &SimConfig) -> Result<ValidationReport> {
    cfg.validate()?;
    let mut points = Vec::with_capacity(p0_grid.len());
    for (k, &p0) in p0_grid.iter().enumerate() {
        let a0 = link.receiver().bacterium().concentration_for_probability(p0)?;
        let sampler = ChainSampler::new(link, a0)?;
        let point_cfg = SimConfig {
            seed: cfg.seed.wrapping_add(k as u64),
            ..*cfg
        };
        let draws = run_trials(&point_cfg, |rng| sampler.draw(rng));

        let xs: Vec<f64> = draws.iter().map(|d| d.x as f64).collect();
        let a2s: Vec<f64> = xs.iter().map(|x| sampler.delivery * x).collect();
        let ys: Vec<f64> = draws.iter().map(|d| d.y as f64).collect();
        let gain_noisy = |node: &NodeParams| {
            if node.bacterium().gain_noise_rel_var() > 0.0 {
                u64::from(node.bacteria())
            } else {
                0
            }
        };

        points.push(ValidationPoint {
            p0,
            a0,
            a1: sampler.stimulus,
            x: MomentCheck::new(
                link.transmitter_output_moments(sampler.stimulus)?,
                moments(&xs, cfg.antithetic),
            ),
            a2: MomentCheck::new(link.received_concentration_stats(a0)?, moments(&a2s, cfg.antithetic)),
            y: MomentCheck::new(link.receiver_output_moments(p0)?, moments(&ys, cfg.antithetic)),
            clamp_events: draws.iter().map(|d| d.clamps).sum(),
            gain_draws: cfg.trials * (gain_noisy(link.transmitter()) + gain_noisy(link.receiver())),
        });
    }
    Ok(ValidationReport {
        mode: link.variance_mode(),
        config: *cfg,
        points,
    })
}
