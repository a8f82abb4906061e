use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Io,
    Usage,
    Config,
    InvalidBox,
    Dimension,
    Unmatched,
    Spec,
    Internal,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Io | ErrorKind::Usage | ErrorKind::Config | ErrorKind::InvalidBox => 2,
            ErrorKind::Dimension => 3,
            ErrorKind::Unmatched => 4,
            ErrorKind::Spec => 5,
            ErrorKind::Internal => 1,
        }
    }
}

/// Printed to stderr as one JSON object.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    pub path: Option<PathBuf>,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            path: None,
        }
    }

    pub fn at(mut self, path: impl AsRef<Path>) -> Self {
        self.path = Some(path.as_ref().to_path_buf());
        self
    }

    pub fn io(path: impl AsRef<Path>, err: impl fmt::Display) -> Self {
        Self::new(ErrorKind::Io, err.to_string()).at(path)
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.path {
            Some(p) => write!(f, "{}: {}", p.display(), self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for CliError {}

impl From<boxprompt_core::Error> for CliError {
    fn from(e: boxprompt_core::Error) -> Self {
        use boxprompt_core::Error as E;
        let kind = match &e {
            E::InvalidBox { .. } | E::CoordinateOutOfRange { .. } => ErrorKind::InvalidBox,
            E::DimensionMismatch { .. } => ErrorKind::Dimension,
            E::InvalidSpec(_) => ErrorKind::Spec,
            E::InvalidParameter(_) => ErrorKind::Config,
            E::EmptyInput(_) => ErrorKind::Unmatched,
            _ => ErrorKind::Internal,
        };
        Self::new(kind, e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
