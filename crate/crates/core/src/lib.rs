//! Spectral-Galerkin simulation and large-deviation toolkit for stochastic
//! evolution equations with locally monotone coefficients.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: weighted-ℓ² representation of `V ⊂ H ⊂ V*`;
//! * [`models`]: drift and noise operators with declared constants;
//! * [`framework`]: derived constants, thresholds and condition audits;
//! * [`integrator`]: semi-implicit Euler–Maruyama paths and energy statistics;
//! * [`stationary`]: pull-back stationary solutions, path metrics, stationarity tests;
//! * [`skeleton`]: controlled skeleton equation and rate functions by optimization;
//! * [`probe`]: Monte Carlo estimates of small-noise probabilities.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod framework;
pub mod integrator;
pub mod models;
pub mod optimize;
pub mod probe;
pub mod rng;
pub mod skeleton;
pub mod spectral;
pub mod stationary;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
