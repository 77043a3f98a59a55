use thiserror::Error;

/// Exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// Malformed arguments, config file or parameter values.
pub const EXIT_PARSE: i32 = 1;
/// The constraint violates monotonicity or conservation, or has no finite-rate path.
pub const EXIT_INFEASIBLE: i32 = 2;
/// A solver did not converge or left a residual above the reporting limit.
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Io(_) => EXIT_PARSE,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Solver(_) => EXIT_SOLVER,
        }
    }
}

impl From<occupancy_core::Error> for CliError {
    fn from(e: occupancy_core::Error) -> Self {
        use occupancy_core::Error as E;
        match e {
            E::InvalidSimplex(_) | E::CapacityMismatch { .. } | E::Domain(_) => CliError::Parse(e.to_string()),
            E::Infeasible(_) | E::InfiniteRate(_) | E::DegenerateSplit { .. } => CliError::Infeasible(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}
