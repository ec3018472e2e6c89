use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the numerical routines and the command-line front end.
#[derive(Debug, Error)]
pub enum QError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A series or product did not meet its termination test within the term cap.
    #[error("{what} did not converge within {terms} terms (partial value {partial:e}, last term {last_term:e})")]
    NonConvergence {
        what: &'static str,
        terms: usize,
        partial: f64,
        last_term: f64,
    },

    #[error("{what}: order {k} exceeds the cap {cap} ({note})")]
    OrderCap {
        what: &'static str,
        k: usize,
        cap: usize,
        note: String,
    },

    #[error("value overflows double range (ln|value| = {ln_abs})")]
    Overflow { ln_abs: f64 },

    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("input file {path}: {msg}")]
    Input { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = QError> = std::result::Result<T, E>;
