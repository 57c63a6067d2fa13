//! Closed-form statistics of the two-node signal chain.
//!
//! A transmitter node is stimulated with a type I concentration `A1`, its
//! activated receptors drive production of type II molecules, diffusion
//! attenuates them by the steady-state gain `G(r)`, and the receiver node
//! traps them and emits light proportional to its activated receptors.
//! Every node is a population of `n` identical bacteria with `N` receptors
//! each; heterogeneity enters through a per-bacterium Gaussian perturbation
//! of the input gain.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of the transmitter saturation limit above which a target
/// concentration is rejected.
pub const ADMISSIBLE_FRACTION: f64 = 0.99999;

/// Upper bound (exclusive) on `sigma_gamma / gamma` accepted at construction.
pub const MAX_RELATIVE_GAIN_STD: f64 = 0.5;

/// Receptor-level parameters of a single bacterium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BacteriumParams {
    receptors: u32,
    gain: f64,
    dissociation: f64,
    gain_noise_rel_var: f64,
}

impl BacteriumParams {
    /// `gain_noise_rel_var` is `sigma_gamma^2 / gamma^2`.
    pub fn new(
        receptors: u32,
        gain: f64,
        dissociation: f64,
        gain_noise_rel_var: f64,
    ) -> Result<Self> {
        if receptors == 0 {
            return Err(Error::invalid("receptors", "must be at least 1"));
        }
        if !(gain.is_finite() && gain > 0.0) {
            return Err(Error::invalid("gain", format!("must be positive, got {gain}")));
        }
        if !(dissociation.is_finite() && dissociation > 0.0) {
            return Err(Error::invalid(
                "dissociation",
                format!("must be positive, got {dissociation}"),
            ));
        }
        if !(gain_noise_rel_var.is_finite() && gain_noise_rel_var >= 0.0) {
            return Err(Error::invalid(
                "gain_noise_rel_var",
                format!("must be nonnegative, got {gain_noise_rel_var}"),
            ));
        }
        if gain_noise_rel_var.sqrt() >= MAX_RELATIVE_GAIN_STD {
            return Err(Error::invalid(
                "gain_noise_rel_var",
                format!(
                    "relative gain std {} is outside the first-order regime (< {MAX_RELATIVE_GAIN_STD})",
                    gain_noise_rel_var.sqrt()
                ),
            ));
        }
        Ok(Self {
            receptors,
            gain,
            dissociation,
            gain_noise_rel_var,
        })
    }

    pub fn receptors(&self) -> u32 {
        self.receptors
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn dissociation(&self) -> f64 {
        self.dissociation
    }

    pub fn gain_noise_rel_var(&self) -> f64 {
        self.gain_noise_rel_var
    }

    /// Steady-state probability that a receptor is bound at concentration `a`.
    pub fn binding_probability(&self, a: f64) -> Result<f64> {
        if !(a >= 0.0) || a.is_infinite() {
            return Err(Error::Domain {
                quantity: "concentration",
                value: a,
                domain: "[0, inf)",
            });
        }
        let x = a * self.gain;
        Ok(x / (x + self.dissociation))
    }

    /// Inverse of [`binding_probability`](Self::binding_probability).
    pub fn concentration_for_probability(&self, p: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Domain {
                quantity: "binding probability",
                value: p,
                domain: "[0, 1)",
            });
        }
        Ok(self.dissociation * p / (self.gain * (1.0 - p)))
    }
}

/// A node: `bacteria` identical bacteria plus the production constant
/// (molecules released per activated receptor).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeParams {
    bacteria: u32,
    bacterium: BacteriumParams,
    production: f64,
}

impl NodeParams {
    pub fn new(bacteria: u32, bacterium: BacteriumParams, production: f64) -> Result<Self> {
        if bacteria == 0 {
            return Err(Error::invalid("bacteria", "must be at least 1"));
        }
        if !(production.is_finite() && production > 0.0) {
            return Err(Error::invalid(
                "production",
                format!("must be positive, got {production}"),
            ));
        }
        Ok(Self {
            bacteria,
            bacterium,
            production,
        })
    }

    pub fn with_bacteria(&self, bacteria: u32) -> Result<Self> {
        Self::new(bacteria, self.bacterium, self.production)
    }

    pub fn bacteria(&self) -> u32 {
        self.bacteria
    }

    pub fn bacterium(&self) -> &BacteriumParams {
        &self.bacterium
    }

    pub fn production(&self) -> f64 {
        self.production
    }

    /// Total receptor count `n * N`.
    pub fn receptor_total(&self) -> f64 {
        f64::from(self.bacteria) * f64::from(self.bacterium.receptors)
    }

    /// Variance of the node's activated-receptor count when every bacterium
    /// sees binding probability `p` perturbed to first order by its own gain
    /// noise: a Binomial term plus the between-bacteria term.
    pub fn activation_variance(&self, p: f64) -> f64 {
        let n = f64::from(self.bacteria);
        let big_n = f64::from(self.bacterium.receptors);
        let q = p * (1.0 - p);
        n * big_n * q + n * (big_n * big_n - big_n) * q * q * self.bacterium.gain_noise_rel_var
    }

    /// Large-`N` shortcut of [`activation_variance`](Self::activation_variance),
    /// keeping only the gain-noise term with `N^2`.
    pub fn activation_variance_large_n(&self, p: f64) -> f64 {
        let n = f64::from(self.bacteria);
        let big_n = f64::from(self.bacterium.receptors);
        let q = p * (1.0 - p);
        n * big_n * big_n * q * q * self.bacterium.gain_noise_rel_var
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionChannelParams {
    diffusion: f64,
    distance: f64,
}

impl DiffusionChannelParams {
    pub fn new(diffusion: f64, distance: f64) -> Result<Self> {
        if !(diffusion.is_finite() && diffusion > 0.0) {
            return Err(Error::invalid(
                "diffusion",
                format!("must be positive, got {diffusion}"),
            ));
        }
        if !(distance.is_finite() && distance > 0.0) {
            return Err(Error::invalid(
                "distance",
                format!("must be positive, got {distance}"),
            ));
        }
        Ok(Self {
            diffusion,
            distance,
        })
    }

    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    /// Steady-state gain of an ideal unbounded diffusion channel, `1 / (4 pi D r)`.
    pub fn gain(&self) -> f64 {
        1.0 / (4.0 * PI * self.diffusion * self.distance)
    }
}

/// Which closed form is used for the receiver output variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceMode {
    /// Conditional-variance sum with the relative concentration noise
    /// `sigma_t^2 / A0^2`, keeping the Binomial and `N^2 - N` terms.
    #[default]
    Consistent,
    /// `n N^2 (sigma_gamma^2/gamma^2 + n sigma_t^2)^2 p0^2 (1-p0)^2` with the
    /// absolute concentration variance, as printed in the source model.
    PaperLiteral,
}

impl fmt::Display for VarianceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarianceMode::Consistent => "consistent",
            VarianceMode::PaperLiteral => "paper-literal",
        })
    }
}

impl FromStr for VarianceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consistent" => Ok(VarianceMode::Consistent),
            "paper-literal" => Ok(VarianceMode::PaperLiteral),
            other => Err(Error::invalid(
                "mode",
                format!("expected `consistent` or `paper-literal`, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkMoments {
    pub mean: f64,
    pub variance: f64,
}

impl LinkMoments {
    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Transmitter node, diffusion channel and receiver node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    transmitter: NodeParams,
    channel: DiffusionChannelParams,
    receiver: NodeParams,
    variance_mode: VarianceMode,
}

impl LinkParams {
    pub fn new(
        transmitter: NodeParams,
        channel: DiffusionChannelParams,
        receiver: NodeParams,
    ) -> Self {
        Self {
            transmitter,
            channel,
            receiver,
            variance_mode: VarianceMode::default(),
        }
    }

    /// A link whose transmitter and receiver are the same kind of node.
    pub fn symmetric(node: NodeParams, channel: DiffusionChannelParams) -> Self {
        Self::new(node, channel, node)
    }

    pub fn with_mode(mut self, mode: VarianceMode) -> Self {
        self.variance_mode = mode;
        self
    }

    /// Replaces the bacteria count of both nodes.
    pub fn with_bacteria(&self, bacteria: u32) -> Result<Self> {
        Ok(Self {
            transmitter: self.transmitter.with_bacteria(bacteria)?,
            receiver: self.receiver.with_bacteria(bacteria)?,
            ..*self
        })
    }

    pub fn transmitter(&self) -> &NodeParams {
        &self.transmitter
    }

    pub fn channel(&self) -> &DiffusionChannelParams {
        &self.channel
    }

    pub fn receiver(&self) -> &NodeParams {
        &self.receiver
    }

    pub fn variance_mode(&self) -> VarianceMode {
        self.variance_mode
    }

    pub fn channel_gain(&self) -> f64 {
        self.channel.gain()
    }

    /// Received concentration reached with every transmitter receptor bound,
    /// `alpha G(r) n N`.
    pub fn saturation_limit(&self) -> f64 {
        self.transmitter.production * self.channel_gain() * self.transmitter.receptor_total()
    }

    pub fn max_admissible_concentration(&self) -> f64 {
        ADMISSIBLE_FRACTION * self.saturation_limit()
    }

    /// Largest receiver binding probability whose concentration is admissible.
    pub fn max_admissible_probability(&self) -> f64 {
        let b = &self.receiver.bacterium;
        let limit = self.max_admissible_concentration();
        let mut p = b.binding_probability(limit).unwrap_or(0.0);
        // the round trip through the binding curve can land just past the limit
        while p > 0.0 && b.concentration_for_probability(p).map_or(true, |a| a >= limit) {
            p = p.next_down();
        }
        p
    }

    pub fn check_admissible(&self, a0: f64) -> Result<()> {
        if !(a0 >= 0.0) {
            return Err(Error::Domain {
                quantity: "target concentration",
                value: a0,
                domain: "[0, saturation limit)",
            });
        }
        if a0 >= self.max_admissible_concentration() {
            return Err(Error::UnreachableConcentration {
                requested: a0,
                limit: self.saturation_limit(),
            });
        }
        Ok(())
    }

    /// Type I stimulus `A1` whose mean response delivers `a0` at the receiver.
    pub fn stimulus_concentration(&self, a0: f64) -> Result<f64> {
        self.check_admissible(a0)?;
        let b = &self.transmitter.bacterium;
        Ok(b.dissociation * a0 / (b.gain * (self.saturation_limit() - a0)))
    }

    /// Moments of the transmitter's total activated-receptor count `X`.
    pub fn transmitter_output_moments(&self, a1: f64) -> Result<LinkMoments> {
        let p1 = self.transmitter.bacterium.binding_probability(a1)?;
        Ok(LinkMoments {
            mean: self.transmitter.receptor_total() * p1,
            variance: self.transmitter.activation_variance(p1),
        })
    }

    /// The single gain-noise term of `Var(X)` that dominates for large `N`.
    pub fn transmitter_variance_large_n(&self, a1: f64) -> Result<f64> {
        let p1 = self.transmitter.bacterium.binding_probability(a1)?;
        Ok(self.transmitter.activation_variance_large_n(p1))
    }

    /// Moments of the concentration `A2 = G alpha X` seen by the receiver when
    /// the transmitter targets `a0`.
    pub fn received_concentration_stats(&self, a0: f64) -> Result<LinkMoments> {
        let a1 = self.stimulus_concentration(a0)?;
        let x = self.transmitter_output_moments(a1)?;
        let scale = self.channel_gain() * self.transmitter.production;
        Ok(LinkMoments {
            mean: scale * x.mean,
            variance: scale * scale * x.variance,
        })
    }

    /// `sigma_t^2 / A0^2`, the relative variance of the received
    /// concentration. Zero at `a0 = 0`.
    pub fn relative_transmitter_noise(&self, a0: f64) -> Result<f64> {
        if a0 == 0.0 {
            self.check_admissible(a0)?;
            return Ok(0.0);
        }
        let a2 = self.received_concentration_stats(a0)?;
        Ok(a2.variance / (a0 * a0))
    }

    fn receiver_concentration(&self, p0: f64) -> Result<f64> {
        let a0 = self.receiver.bacterium.concentration_for_probability(p0)?;
        self.check_admissible(a0)?;
        Ok(a0)
    }

    /// Moments of the receiver's light output `Y` for input level `p0`.
    pub fn receiver_output_moments(&self, p0: f64) -> Result<LinkMoments> {
        let a0 = self.receiver_concentration(p0)?;
        let mean = self.receiver.receptor_total() * p0;
        if p0 == 0.0 {
            return Ok(LinkMoments {
                mean,
                variance: 0.0,
            });
        }
        let q = p0 * (1.0 - p0);
        let variance = match self.variance_mode {
            VarianceMode::Consistent => {
                let rel = self.relative_transmitter_noise(a0)?;
                consistent_output_variance(&self.receiver, p0, rel)
            }
            VarianceMode::PaperLiteral => {
                let sigma_t2 = self.received_concentration_stats(a0)?.variance;
                let n = f64::from(self.receiver.bacteria);
                let big_n = f64::from(self.receiver.bacterium.receptors);
                let s = self.receiver.bacterium.gain_noise_rel_var + n * sigma_t2;
                n * big_n * big_n * s * s * q * q
            }
        };
        Ok(LinkMoments { mean, variance })
    }

    /// Large-`N` receiver variance `n N^2 (sigma_gamma^2/gamma^2 + n s~^2) p0^2 (1-p0)^2`,
    /// where `s~^2` comes from the large-`N` transmitter variance. Drops both
    /// Binomial terms; never used implicitly.
    pub fn receiver_variance_large_n(&self, p0: f64) -> Result<f64> {
        let a0 = self.receiver_concentration(p0)?;
        if p0 == 0.0 {
            return Ok(0.0);
        }
        let a1 = self.stimulus_concentration(a0)?;
        let p1 = self.transmitter.bacterium.binding_probability(a1)?;
        let mean_x = self.transmitter.receptor_total() * p1;
        let rel = self.transmitter.activation_variance_large_n(p1) / (mean_x * mean_x);
        let n = f64::from(self.receiver.bacteria);
        let big_n = f64::from(self.receiver.bacterium.receptors);
        let q = p0 * (1.0 - p0);
        Ok(n * big_n * big_n * (self.receiver.bacterium.gain_noise_rel_var + n * rel) * q * q)
    }

    /// Standard deviation of the normalized output `Y / (nN)` at level `p0`.
    pub fn normalized_output_std(&self, p0: f64) -> Result<f64> {
        let y = self.receiver_output_moments(p0)?;
        Ok(y.std() / self.receiver.receptor_total())
    }
}

/// Receiver variance for a given relative concentration noise: the
/// receiver's own activation variance plus the transmitter noise passed
/// through the first-order slope `p0 (1 - p0) / A0` of the binding curve.
pub(crate) fn consistent_output_variance(node: &NodeParams, p0: f64, rel_tx_var: f64) -> f64 {
    let total = node.receptor_total();
    let q = p0 * (1.0 - p0);
    node.activation_variance(p0) + total * total * rel_tx_var * q * q
}

/// Gaussian output noise whose standard deviation depends on the input
/// level, in the normalized output domain.
pub trait NoiseProfile {
    fn normalized_std(&self, p0: f64) -> Result<f64>;
}

impl NoiseProfile for LinkParams {
    fn normalized_std(&self, p0: f64) -> Result<f64> {
        self.normalized_output_std(p0)
    }
}

/// A channel that reproduces its input exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct Noiseless;

impl NoiseProfile for Noiseless {
    fn normalized_std(&self, _p0: f64) -> Result<f64> {
        Ok(0.0)
    }
}

impl<F: Fn(f64) -> f64> NoiseProfile for F {
    fn normalized_std(&self, p0: f64) -> Result<f64> {
        Ok(self(p0))
    }
}
