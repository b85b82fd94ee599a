//! Configuration files, baselines and Monte-Carlo experiments.

pub mod baselines;
pub mod config;
pub mod experiment;
pub mod model_error;
pub mod validate;
