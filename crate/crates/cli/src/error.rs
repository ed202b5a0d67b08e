use std::fmt;

use serde::Serialize;

/// A failure reported to the shell: an exit code plus a JSON line on stderr.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CliError {
    pub exit_code: i32,
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub const CONFIG: i32 = 1;
    pub const INPUT: i32 = 2;
    pub const DEGENERATE_LABELS: i32 = 3;

    pub fn config(message: impl Into<String>) -> Self {
        Self {
            exit_code: Self::CONFIG,
            kind: "config".into(),
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.message, self.kind)
    }
}

impl std::error::Error for CliError {}

impl From<relict_core::Error> for CliError {
    fn from(e: relict_core::Error) -> Self {
        use relict_core::Error as E;
        let exit_code = match e.root() {
            E::Io { .. } | E::Format { .. } => Self::CONFIG,
            E::DegenerateLabels(_) => Self::DEGENERATE_LABELS,
            _ => Self::INPUT,
        };
        Self {
            exit_code,
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
