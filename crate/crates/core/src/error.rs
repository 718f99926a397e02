use std::fmt;

use thiserror::Error;

/// A single rejected row from a CSV load.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadIssue {
    /// 1-based line number in the source file (the header is line 1).
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LoadIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("matrix is not symmetric (entry ({row}, {col}))")]
    NotSymmetric { row: usize, col: usize },

    #[error("matrix is not positive definite: pivot {pivot} fell below tolerance")]
    NotPositiveDefinite { pivot: usize },

    #[error("design matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },

    #[error("parameters infeasible for observation {index}: 1 + gamma * xi2 <= 0")]
    Infeasible { index: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("optimizer failed to converge: {0}")]
    NotConverged(String),

    #[error("{} rows rejected while loading data: {}", .0.len(), join_issues(.0))]
    Load(Vec<LoadIssue>),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn join_issues(issues: &[LoadIssue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
