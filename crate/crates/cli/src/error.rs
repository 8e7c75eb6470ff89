use std::fmt;

use serde_json::json;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    /// Every fit of some method stopped at the solver's iteration cap.
    NonConvergence(String),
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::NonConvergence(_) => 4,
            CliError::Output(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::NonConvergence(_) => "non_convergence",
            CliError::Output(_) => "output",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Data(m)
            | CliError::NonConvergence(m)
            | CliError::Output(m) => m,
        }
    }

    /// One-line JSON object for stderr.
    pub fn to_json(&self) -> String {
        json!({ "error": self.kind(), "message": self.message(), "exit_code": self.exit_code() })
            .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
