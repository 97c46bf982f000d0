use std::fmt;

use thiserror::Error;

/// One violated invariant, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read config: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("invalid config: {}", join(.0))]
    Invalid(Vec<Diagnostic>),

    #[error("index out of range: {what} = {index}, limit {limit}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("profile not degraded for user {user}: minimum margin {margin:e}")]
    NotDegraded { user: usize, margin: f64 },

    #[error("power budget of user {user} unreachable: at most {reachable} of {budget}")]
    BudgetUnreachable {
        user: usize,
        reachable: f64,
        budget: f64,
    },

    #[error("grid too large: {candidates} candidates exceeds limit {limit}")]
    GridTooLarge { candidates: u128, limit: u128 },

    #[error("oracle supports K = 2 and L <= 2 only (got K = {users}, L = {states})")]
    OracleSize { users: usize, states: usize },

    #[error("{0}")]
    InvalidArgument(String),
}

fn join(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
