use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DstmError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("expected {expected} symbols, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("builder is not linear in the symbol components (residual {residual:e})")]
    NonLinear { residual: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("constellation of size {0} cannot be bit-mapped (not a power of two)")]
    NotPowerOfTwo(usize),

    #[error("codeword for label {label} is not unitary (defect {defect:e})")]
    NotUnitary { label: usize, defect: f64 },

    #[error("Gram determinant {0:e} is negative beyond round-off")]
    NegativeDeterminant(f64),

    #[error("unknown label {label} (codebook size {size})")]
    UnknownLabel { label: usize, size: usize },

    #[error("unknown scheme identifier `{0}`")]
    UnknownScheme(String),

    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = DstmError> = std::result::Result<T, E>;
