use thiserror::Error;

/// Errors raised by scenario validation and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid field `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("unknown consumer type id {0}")]
    UnknownType(usize),

    #[error("calibration infeasible for type {type_id}: {reason}")]
    InfeasibleCalibration { type_id: usize, reason: String },

    #[error(
        "no equilibrium: types {first} and {second} violate the mixed-strategy existence condition \
         ({lhs} vs {rhs})"
    )]
    NoEquilibrium {
        first: usize,
        second: usize,
        lhs: f64,
        rhs: f64,
    },

    #[error("equal sharing undefined: expected competitor count is zero")]
    ZeroCompetitors,

    #[error("enumeration bound exceeded: {0}")]
    EnumerationBound(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
