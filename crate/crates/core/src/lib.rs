//! Population-level molecular communication between two bacterial nodes.
//!
//! [`link`] holds the closed-form signal chain, [`capacity`] turns its
//! signal-dependent Gaussian output into a discrete channel and solves for
//! capacity, [`modulation`] evaluates M-ary level signaling, and
//! [`montecarlo`] simulates the exact stochastic process to check the
//! closed forms.

pub mod capacity;
pub mod error;
pub mod info;
pub mod link;
pub mod modulation;
pub mod montecarlo;
pub mod normal;

pub use error::{Error, Result};
pub use link::{
    BacteriumParams, DiffusionChannelParams, LinkMoments, LinkParams, NodeParams, NoiseProfile, Noiseless,
    VarianceMode,
};
