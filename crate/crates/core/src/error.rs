use thiserror::Error;

/// Errors shared by the dense kernels and the operator assembly layer.
#[derive(Debug, Error)]
pub enum EigenError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Jacobi sweeps did not converge, off-diagonal norm {off_diagonal:.3e} after {sweeps} sweeps")]
    JacobiNonConvergence { off_diagonal: f64, sweeps: usize },

    #[error("matrix dimension {n} exceeds the dense oracle cap {cap}")]
    OracleTooLarge { n: usize, cap: usize },

    #[error("empty damping interval: upper bound {upper:.6e} <= alpha {alpha:.6e}")]
    EmptyInterval { upper: f64, alpha: f64 },

    #[error("I/O failure at {path}: {message}")]
    Io { path: String, message: String },

    #[error("malformed manifest: {0}")]
    MalformedManifest(String),

    #[error("truncated array file {path}: expected {expected} bytes, found {actual}")]
    TruncatedFile {
        path: String,
        expected: u64,
        actual: u64,
    },

    #[error("unsupported dataset format version {found}, this build reads version {supported}")]
    VersionMismatch { found: u32, supported: u32 },
}

pub type Result<T> = std::result::Result<T, EigenError>;
