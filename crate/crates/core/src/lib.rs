//! Sparse precision matrix estimation by column-wise constrained ℓ1
//! minimization, solved with the greedy inverse scale space method
//! (GISS^ρ), with hard thresholding pursuit and ADMM baselines, synthetic
//! benchmark generators, error metrics and a replication harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod clime;
pub mod error;
pub mod giss;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod simulation;

pub use error::{Error, Result};
