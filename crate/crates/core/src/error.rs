use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("index error: level {j}, position {k}")]
    Index { j: u32, k: u64 },
    #[error("bisection did not converge for target {target}")]
    NonConvergence { target: f64 },
    #[error("breakpoint resolution failed for p = {p}, lambda = {lambda}")]
    Resolution { p: f64, lambda: f64 },
    #[error("Orlicz spec with lambda < 0 has no resolved breakpoints")]
    Unresolved,
    #[error("quadrature overflow: {0}")]
    QuadratureOverflow(String),
    #[error("resource budget exceeded: {0}")]
    Resource(String),
    #[error("precision error: {0}")]
    Precision(String),
    #[error("schedule overflow at step {n}")]
    Overflow { n: usize },
    #[error("construction error: {0}")]
    Construction(String),
    #[error("depth budget exceeded: need {needed} steps, tree has {built}")]
    DepthBudget { needed: usize, built: usize },
    #[error("non-finite contribution in {0}")]
    NonFinite(String),
    #[error("parse error at `{token}`: {reason}")]
    Parse { token: String, reason: String },
    #[error("{functional}: {source}")]
    Functional {
        functional: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Tags the error with the functional whose computation raised it.
    pub fn in_functional(self, functional: &str) -> Self {
        Error::Functional {
            functional: functional.to_string(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
