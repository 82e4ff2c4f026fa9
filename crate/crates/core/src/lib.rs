//! Hüsler–Reiss multivariate Pareto models.
//!
//! Conversions between precision and variogram matrices, the marginal
//! parameter that turns a precision matrix into a multivariate Pareto density,
//! a classifier for generalized Hüsler–Reiss functions, closed-form and Monte
//! Carlo masses on the exceedance region, a homogeneity probe for pairwise
//! interaction families, and the extremal graph.

pub mod classify;
pub mod cli;
pub mod error;
pub mod graph;
pub mod hr;
pub mod linalg;
pub mod oracle;
pub mod probe;
mod rng;

pub use error::{Error, Result};
