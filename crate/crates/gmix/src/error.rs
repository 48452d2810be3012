use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum GmixError {
    #[error("symbol {symbol} outside alphabet of size {size}")]
    SymbolOutsideAlphabet { symbol: u32, size: usize },

    #[error("support mismatch: left has {left} atoms, right has {right}")]
    SupportMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity exceeded in {context}: needed {needed}, limit {limit}")]
    Capacity {
        context: &'static str,
        needed: u128,
        limit: u128,
    },

    #[error("no coupling guarantee (epsilon floor violated): {0}")]
    NoCouplingGuarantee(String),

    #[error("seminorm undefined: {0}")]
    UndefinedSeminorm(String),

    #[error("degenerate scale estimate: sigma_hat = {0}")]
    DegenerateSigma(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GmixError>;

impl GmixError {
    /// Process exit code used by the CLI for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            GmixError::Config(_) | GmixError::InvalidArgument(_) => 2,
            GmixError::Capacity { .. } => 3,
            _ => 1,
        }
    }
}
