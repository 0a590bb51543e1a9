//! Bounds on E‖(1/n)Σ Xᵢ‖∞ for independent mean-zero random vectors with
//! coordinatewise variance at most σ² under either a bounded envelope
//! (q = ∞) or a q-th moment envelope, together with the extremal laws and a
//! seeded Monte Carlo harness used to check them.

// `!(x > 0.0)` guards reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounded;
pub mod cli;
pub mod dist;
pub mod error;
pub mod lab;
pub mod moment;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
