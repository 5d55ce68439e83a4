//! Simulation and analysis of linear stochastic bandits with unit-ball
//! actions, comparing optimism in the face of uncertainty (OFU) with
//! orthogonal batch exploration as estimators of the unknown parameter.

// `!(x > 0.0)` guards also reject NaN; dense kernels index by position.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod environment;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod linalg;
pub mod policies;

pub use error::{Error, Result};
pub use linalg::{Cholesky, SymMatrix, Vector};
pub use policies::PolicyKind;
