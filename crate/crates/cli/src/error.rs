use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// A Monte Carlo check failed its standard-error criterion.
    pub const CHECK_FAILED: i32 = 1;
    pub const INVALID: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] disac::Error),

    #[error("missing required parameter --{0}")]
    Missing(&'static str),

    #[error("invalid parameter: {0}")]
    Invalid(String),

    #[error("config file {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("no run manifest found in {0}")]
    NoManifest(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(
                disac::Error::NonConvergence { .. } | disac::Error::Singular { .. },
            ) => exit::NUMERICAL,
            CliError::Io { .. } => 1,
            _ => exit::INVALID,
        }
    }

    /// Machine-readable description printed on failure.
    pub fn to_json(&self) -> serde_json::Value {
        let message = self.to_string();
        let body = match self {
            CliError::Model(disac::Error::Infeasible {
                constraint,
                value,
                bound,
            }) => json!({
                "kind": "infeasible_schedule",
                "stage": constraint.stage(),
                "constraint": constraint.describe(),
                "value": value,
                "bound": bound,
                "message": message,
            }),
            CliError::Model(disac::Error::Domain {
                name,
                value,
                expected,
            }) => json!({
                "kind": "domain",
                "parameter": name,
                "value": value,
                "expected": expected,
                "message": message,
            }),
            CliError::Model(disac::Error::NoSolution(_)) => json!({
                "kind": "no_solution",
                "message": message,
            }),
            CliError::Model(_) => json!({ "kind": "numerical", "message": message }),
            CliError::Missing(p) => {
                json!({ "kind": "missing_parameter", "parameter": p, "message": message })
            }
            CliError::Invalid(_) | CliError::Config { .. } | CliError::NoManifest(_) => {
                json!({ "kind": "invalid_input", "message": message })
            }
            CliError::Io { .. } => json!({ "kind": "io", "message": message }),
        };
        json!({ "error": body })
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
