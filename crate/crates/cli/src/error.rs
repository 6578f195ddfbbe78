use std::fmt;
use std::io;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_INTERNAL: i32 = 70;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn input(kind: &str, message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            kind: kind.to_string(),
            message: message.into(),
        }
    }

    pub fn internal(kind: &str, message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INTERNAL,
            kind: kind.to_string(),
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            kind: "usage".to_string(),
            message: message.into(),
        }
    }

    /// The single machine-parseable line written to stderr.
    pub fn json_line(&self) -> String {
        serde_json::json!({
            "error": self.kind,
            "message": self.message,
            "exit": self.code,
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl From<tokscope::Error> for CliError {
    fn from(e: tokscope::Error) -> Self {
        let code = match e {
            tokscope::Error::NonConvergence { .. } => EXIT_INTERNAL,
            _ => EXIT_INPUT,
        };
        CliError {
            code,
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::input("io", e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::input("json", e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
