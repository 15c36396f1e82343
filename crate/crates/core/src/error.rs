use thiserror::Error;

/// Errors raised by the analysis pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("truncated Gaussian normalisation {mass:e} is below 1e-300")]
    DegenerateTruncation { mass: f64 },

    #[error("value {value} lies outside [0, 1] by more than the clamp tolerance ({what})")]
    OutOfUnitRange { what: &'static str, value: f64 },

    #[error("decoy elimination requires mu > nu > omega (got mu={mu}, nu={nu}, omega={omega})")]
    DecoyOrdering { mu: f64, nu: f64, omega: f64 },

    #[error("Bessel I0 argument {0} exceeds the overflow guard |x| < 700")]
    BesselOverflow(f64),

    #[error("binary entropy argument {0} is outside [0, 1]")]
    EntropyDomain(f64),

    #[error("bisection bracket failure: {0}")]
    Bracket(String),

    #[error("data error: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
