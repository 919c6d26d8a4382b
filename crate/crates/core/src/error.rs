//! Error type shared by all modules.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested modulation index cannot be met by any interior angle set.
    #[error("infeasible modulation index m={m}: the fundamental constraint requires 0 < m < 1")]
    Infeasible { m: f64 },

    /// An iteration produced a non-finite value or a singular system.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// THD is undefined because the fundamental magnitude is zero.
    #[error("degenerate fundamental: h(1) = 0, THD undefined")]
    DegenerateFundamental,

    /// A prediction was requested outside the model's trained range.
    #[error("m={m} is outside the trained range [{lo}, {hi}]; pass an in-range value or opt into clamped extrapolation")]
    Extrapolation { m: f64, lo: f64, hi: f64 },

    /// A file did not match its declared schema.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable tag, used by the CLI's single-line stderr
    /// contract.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Infeasible { .. } => "infeasible",
            Error::Numerical(_) => "numerical",
            Error::DegenerateFundamental => "degenerate_fundamental",
            Error::Extrapolation { .. } => "extrapolation",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
