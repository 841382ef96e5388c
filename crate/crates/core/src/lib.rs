//! Outage analysis of OTFS transmission under a rate–distortion target.
//!
//! The crate builds delay–Doppler (DD) channel matrices for integer
//! delay/Doppler multipath channels, evaluates the instantaneous normalized
//! capacity, estimates the outage probability by Monte-Carlo simulation and
//! compares it with a closed-form chi-square lower bound. The
//! [`bound_verify`] module checks the determinant inequalities behind that
//! bound numerically on random channel draws.
//!
//! Module map:
//!
//! - [`dd_channel`]: grid geometry, random path sampling, `H_DD` construction.
//! - [`spectral`]: Gram decomposition, log-determinants, capacity.
//! - [`rate_distortion`]: binary entropy, its inverse, rate/threshold targets.
//! - [`outage`]: per-draw outage test, Monte-Carlo estimator, lower bound.
//! - [`bound_verify`]: determinant-inequality and structure checks.
//! - [`experiment`]: sweep configuration, CSV output, verification reports.

pub mod bound_verify;
pub mod dd_channel;
mod envelope;
mod error;
pub mod experiment;
pub mod outage;
pub mod rate_distortion;
pub mod seeding;
pub mod spectral;

pub use error::{Error, Result};

pub use dd_channel::{ChannelRealization, DDMatrix, GridParams, PathSpec};
pub use outage::OutageEstimate;
pub use rate_distortion::LossyTarget;
pub use spectral::GramDecomposition;

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
