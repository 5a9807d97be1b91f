//! Simulation and optimization of STAR (simultaneously transmitting and
//! reflecting) surfaces serving a two-user MISO downlink.
//!
//! The numerical core is generic over the real scalar type ([`Real`], for
//! `f32` and `f64`); the experiment harness runs in `f64`. Concrete aliases
//! for both precisions are exported below.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamforming;
pub mod channel;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod protocols;
pub mod scalar;
pub mod search;

pub use error::{Error, Result};
pub use model::{Protocol, Scenario};
pub use scalar::Real;

pub type StarCoefficients64 = model::StarCoefficients<f64>;
pub type StarCoefficients32 = model::StarCoefficients<f32>;
pub type ChannelSet64 = channel::ChannelSet<f64>;
pub type ChannelSet32 = channel::ChannelSet<f32>;
pub type SolveResult64 = protocols::SolveResult<f64>;
pub type SolveResult32 = protocols::SolveResult<f32>;
pub type UnicastSolution64 = beamforming::UnicastSolution<f64>;
pub type MulticastSolution64 = beamforming::MulticastSolution<f64>;
