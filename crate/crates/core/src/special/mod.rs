//! Scalar special functions: Ψ(x) = (1+x)ln(1+x) − x, its inverse, the
//! principal Lambert W branch and the iterated-log equation solver.

mod iterated;
mod lambert;
pub(crate) mod psi;
pub mod roots;

pub use iterated::{iterated_log_solve, iterated_log_solve_ln, iterated_log_solve_with};
pub use lambert::{lambert_w, lambert_w_of_exp, lambert_w_with};
pub use psi::{ln_psi_inv_of_exp, psi, psi_inv, psi_inv_with, psi_prime, psi_prime_at_inv};

use crate::error::{Error, Result};

/// Convergence controls shared by the iterative solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_iter: 200,
        }
    }
}

impl Tolerances {
    /// True when a step of size `step` taken at `x` is below tolerance.
    pub fn converged(&self, step: f64, x: f64) -> bool {
        step.abs() <= self.rel_tol * x.abs().max(f64::MIN_POSITIVE) || step.abs() == 0.0
    }
}

/// A closed interval [lo, hi] known to contain a sign change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::BracketFailure {
                routine: "Bracket::new",
                lo,
                hi,
            });
        }
        Ok(Bracket { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        self.lo + 0.5 * (self.hi - self.lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}
