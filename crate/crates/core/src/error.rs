use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid instance {index}: {reason}")]
    InvalidInstance { index: usize, reason: &'static str },

    #[error("inconsistent group {group_id}: {reason}")]
    InconsistentGroup { group_id: u64, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing {0}")]
    MissingLabels(&'static str),

    #[error("class {0} has no instances")]
    EmptyClass(u8),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("target skew {target} is unreachable; maximum achievable skew is {max_achievable}")]
    UnreachableSkew { target: f64, max_achievable: f64 },

    #[error(
        "training diverged at epoch {epoch}: objective per gamma {per_gamma:?}, gradient norm {grad_norm}"
    )]
    Diverged {
        epoch: usize,
        per_gamma: Vec<f64>,
        grad_norm: f64,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! config_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Config(alloc::format!($($arg)*))
    };
}
pub(crate) use config_err;
