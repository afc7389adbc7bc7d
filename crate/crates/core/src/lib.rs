//! Simulation and estimation for heavy-tailed affine stochastic recursions
//! X_n = A_n X_{n-1} + B_n: tail index and constant, extremal index and
//! cluster laws, limit laws for maxima, hitting times and partial sums, and
//! spectral diagnostics of the Markov operator.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod cli;
pub mod error;
pub mod extremal;
pub mod linalg;
pub mod linrw;
pub mod model;
pub mod pointproc;
pub mod recursion;
pub mod rng;
pub mod ruin;
pub mod spectral;
pub mod stable;
pub mod stats;
pub mod tail;

pub use error::{Error, Result};
pub use linrw::SimBudget;
pub use model::{AffineLaw, AffineLawSpec};
pub use rng::RngStream;
