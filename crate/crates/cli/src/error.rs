use std::path::PathBuf;

use thiserror::Error;

/// Failures surfaced by the command line, each with a stable kind and
/// exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("cannot read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Model(#[from] esgame_core::Error),

    #[error("cannot write output: {0}")]
    Output(String),
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl CliError {
    /// 2 usage, 3 validation, 4 no equilibrium, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        use esgame_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Read { .. } => 2,
            CliError::Parse { .. } => 3,
            CliError::Model(E::NoEquilibrium { .. } | E::ZeroCompetitors) => 4,
            CliError::Model(_) => 3,
            CliError::Output(_) => 1,
        }
    }

    /// Machine-readable reason printed with every error.
    pub fn kind(&self) -> &'static str {
        use esgame_core::Error as E;
        match self {
            CliError::Usage(_) => "usage",
            CliError::Read { .. } => "read",
            CliError::Parse { .. } => "parse",
            CliError::Model(e) => match e {
                E::Validation { .. } => "validation",
                E::UnknownType(_) => "unknown_type",
                E::InfeasibleCalibration { .. } => "infeasible_calibration",
                E::NoEquilibrium { .. } => "no_equilibrium",
                E::ZeroCompetitors => "zero_competitors",
                E::EnumerationBound(_) => "enumeration_bound",
                E::InvalidProfile(_) => "invalid_profile",
            },
            CliError::Output(_) => "output",
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
