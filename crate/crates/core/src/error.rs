use thiserror::Error;

/// Errors raised by the numerical layers and the experiment driver.
#[derive(Debug, Error)]
pub enum KblError {
    /// Invalid grid, config value or argument.
    #[error("configuration error: {0}")]
    Config(String),

    /// A state left the domain of an operation (non-positive potential,
    /// non-positive heat state, out-of-range index, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Fields defined on different grids were combined.
    #[error("grid mismatch: {left} points vs {right} points")]
    GridMismatch { left: usize, right: usize },

    /// The exponential in the Hopf transform would overflow.
    #[error("range error: |1/2 int u| reaches {exponent:.3e} > 700; rescale the state")]
    Range { exponent: f64 },

    /// The retained modes cannot represent the requested state or the grid
    /// cannot resolve the requested modes.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// Discretization failure, instability or non-finite output.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A Koopman series was requested outside its certified validity region.
    #[error("certificate failure: t = {t} does not exceed threshold {threshold}")]
    CertFail { t: f64, threshold: f64 },

    #[error("size guard: {0} terms exceeds the enumeration cap")]
    SizeGuard(u128),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl KblError {
    /// Process exit code for the CLI: 2 validation, 3 certificate failure,
    /// 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            KblError::Config(_)
            | KblError::Domain(_)
            | KblError::GridMismatch { .. }
            | KblError::Io(_)
            | KblError::Json(_) => 2,
            KblError::CertFail { .. } => 3,
            KblError::Range { .. }
            | KblError::Resolution(_)
            | KblError::Numerical(_)
            | KblError::SizeGuard(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, KblError>;
