use std::fmt;

use thiserror::Error;

/// A syntax or validation error in one of the text formats, with the 1-based
/// line number when one is known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: Option<usize>,
    pub message: String,
}

impl ParseError {
    pub fn at(line: usize, message: impl Into<String>) -> Self {
        ParseError {
            line: Some(line),
            message: message.into(),
        }
    }

    pub(crate) fn bare(message: impl Into<String>) -> Self {
        ParseError {
            line: None,
            message: message.into(),
        }
    }

    pub(crate) fn with_line(mut self, line: usize) -> Self {
        self.line.get_or_insert(line);
        self
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),

    #[error("invalid causality graph: {0}")]
    InvalidGraph(String),

    #[error("{a} -> {b} is not a causal pair")]
    NotCausal { a: String, b: String },

    #[error("no value assigned to variable `{0}`")]
    MissingAssignment(String),

    #[error("solution does not satisfy the constraint system: {0}")]
    InconsistentSolution(String),

    #[error("support value {0} exceeds the solver's integer range")]
    Overflow(u64),

    #[error("external solver: {0}")]
    Backend(String),

    #[error("invalid automaton: {0}")]
    InvalidFsa(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
