use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{routine}: argument {value} outside domain ({expected})")]
    Domain {
        routine: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("{routine}: no convergence after {iterations} iterations (last step {last_step:e})")]
    NonConvergence {
        routine: &'static str,
        iterations: usize,
        last_step: f64,
    },
    #[error("{routine}: could not bracket a root in [{lo}, {hi}]")]
    BracketFailure {
        routine: &'static str,
        lo: f64,
        hi: f64,
    },
    #[error("{routine}: branches disagree ({left} vs {right})")]
    BranchMismatch {
        routine: &'static str,
        left: f64,
        right: f64,
    },
    #[error("quadrature did not reach tolerance on [{a}, {b}] (error estimate {estimate:e})")]
    Quadrature { a: f64, b: f64, estimate: f64 },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("unsupported size: {0}")]
    UnsupportedSize(String),
}

pub type Result<T> = std::result::Result<T, Error>;
