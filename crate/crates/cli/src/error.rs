use std::fmt;
use std::path::Path;

use dualring_net::NetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad flags, config file or parameter combination.
    Config,
    /// A file could not be read, written or parsed, or its content is unusable.
    Io,
    /// A server broke the protocol or disagreed with the client.
    Protocol,
    /// Too few servers answered.
    Quorum,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub stage: Option<String>,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        CliError {
            kind,
            stage: None,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError::new(ErrorKind::Config, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError::new(ErrorKind::Io, message)
    }

    pub fn file(path: &Path, e: impl fmt::Display) -> Self {
        CliError::io(format!("{}: {e}", path.display()))
    }

    /// Tags the error with the stage it came from, keeping an earlier tag.
    pub fn at(mut self, stage: &str) -> Self {
        if self.stage.is_none() {
            self.stage = Some(stage.to_owned());
        }
        self
    }

    pub fn exit_code(&self) -> u8 {
        match self.kind {
            ErrorKind::Config => 2,
            ErrorKind::Io => 3,
            ErrorKind::Protocol => 4,
            ErrorKind::Quorum => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.stage {
            Some(s) => write!(f, "[{s}] {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for CliError {}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        let kind = match e {
            NetError::QuorumUnreachable { .. } => ErrorKind::Quorum,
            NetError::Io(_) => ErrorKind::Io,
            _ => ErrorKind::Protocol,
        };
        CliError::new(kind, e.to_string())
    }
}

/// Errors raised by the computation on unusable input data.
pub trait DataResult<T> {
    fn data(self, stage: &str) -> Result<T, CliError>;
}

impl<T, E: fmt::Display> DataResult<T> for Result<T, E> {
    fn data(self, stage: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::io(e.to_string()).at(stage))
    }
}
