//! Numerical laboratory for dimension-dependent concentration of convex
//! Lipschitz functions under product measures.
//!
//! The crate evaluates tail envelopes in closed form, reproduces the matching
//! extremal constructions with exact binomial arithmetic, computes the modified
//! convex distance through a certified min-norm-point solver, and audits the
//! upper envelopes by seeded Monte Carlo.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod binomial;
pub mod convex_distance;
pub mod envelopes;
pub mod error;
pub mod extremal;
pub mod harness;
pub mod measures;
pub mod numeric;
pub mod quadrature;
pub mod talagrand;

pub use error::{Error, Result};
