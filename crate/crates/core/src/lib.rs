//! Self-dual and quasi-self-dual price models, put-call symmetry checks,
//! Lévy triplet conditions and semi-static barrier hedges.
//!
//! The crate is organised bottom-up: [`dist`] holds the positive
//! distributions, [`geometry`] the support functions of lift zonoids,
//! [`duality`] the symmetry checkers, [`levy`] the triplet algebra and the
//! `α` solver, [`pricing`] payoffs and Monte-Carlo prices, and [`hedging`]
//! path simulation with replication diagnostics.

// NaN-rejecting guards are written as negated comparisons on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod dist;
pub mod duality;
pub mod error;
pub mod geometry;
pub mod hedging;
pub mod levy;
mod linalg;
pub mod pricing;
pub mod quad;
pub mod report;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use report::{SymmetryReport, Verdict};
pub use rng::RngStream;
