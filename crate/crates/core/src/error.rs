use thiserror::Error;

use crate::instance::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid instance: {}", join_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("unknown organization id `{0}`")]
    UnknownOrganization(String),

    #[error("organization index {index} out of range for {count} organizations")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("{what} exceeds the size cap ({actual} > {cap})")]
    SizeCap {
        what: &'static str,
        actual: usize,
        cap: usize,
    },

    #[error("payoff vector has length {actual}, expected {expected}")]
    PayoffLength { actual: usize, expected: usize },

    #[error("convex energy solver did not converge after {iterations} iterations (best {best}, gap bound {gap})")]
    NoConvergence {
        iterations: usize,
        best: f64,
        gap: f64,
    },

    #[error("linear feasibility solver failed: {0}")]
    Lp(String),

    #[error("{0}")]
    Argument(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
