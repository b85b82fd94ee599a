//! Frequency-selective IRS reflection modelling and joint transmit / reflection
//! beamforming for IRS-assisted multi-cell multi-band downlink systems.
//!
//! The crate is organised bottom-up:
//!
//! - [`reflection`]: varactor circuit response, capacitance partitioning and the
//!   simplified per-band reflection model (ideal phase times binary selection).
//! - [`scenario`]: system configuration, geometry and Rayleigh channel draws.
//! - [`downlink`]: effective channels, SINR, rate, MSE and power bookkeeping.
//! - [`power_min`]: total-power minimisation (duality-based SOCP beamforming,
//!   Riemannian phase optimisation and the three-step driver).
//! - [`selection`]: service-selection design via DC penalty and MM.
//! - [`sum_rate`]: WMMSE / BCD sum-rate maximisation with closed-form
//!   per-element phase and selection updates.
//! - [`harness`]: configuration files, baselines, Monte-Carlo experiments,
//!   model-error study and CSV output.

pub mod downlink;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod power_min;
pub mod reflection;
pub mod scenario;
pub mod selection;
pub mod sum_rate;

pub use error::{Error, Result};

pub use num_complex::Complex64 as C64;

/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
