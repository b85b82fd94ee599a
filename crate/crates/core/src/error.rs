use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("frequencies {f_hi} Hz and {f_lo} Hz overlap by {overlap:.0}% of the tunable range; too close for the simplified model")]
    PartitionOverlap { f_hi: f64, f_lo: f64, overlap: f64 },

    #[error("beamforming problem for BS {bs} is infeasible or ill-conditioned: {reason}")]
    Infeasible { bs: usize, reason: String },

    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
