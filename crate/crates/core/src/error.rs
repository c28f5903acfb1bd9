use thiserror::Error;

/// Errors produced by lattice construction, propagation and analysis.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or index fell outside its permitted range.
    #[error("{what} = {value} is out of range ({range})")]
    Bounds {
        what: &'static str,
        value: i64,
        range: String,
    },

    /// A real-valued parameter violated its domain (non-positive coupling, probability > 1, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs with incompatible dimensions.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// The lattice lacks a structure the operation requires (e.g. no effective void).
    #[error("structural error: {0}")]
    Structural(String),

    /// A required event or landmark was not detected.
    #[error("not found: {0}")]
    NotFound(String),

    /// A numerical routine failed to converge or produced an invalid result.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A document could not be decoded or failed validation.
    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn bounds(
        what: &'static str,
        value: impl TryInto<i64>,
        range: impl Into<String>,
    ) -> Self {
        Error::Bounds {
            what,
            value: value.try_into().unwrap_or(i64::MAX),
            range: range.into(),
        }
    }
}
