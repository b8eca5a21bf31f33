//! Validated numerics for Lyapunov orbit families and their invariant
//! manifolds in the planar restricted circular three-body problem.

pub mod cert;
pub mod chart;
pub mod cli;
pub mod cones;
pub mod config;
pub mod error;
pub mod family;
pub mod flow;
pub mod flow64;
pub mod jets;
pub mod model;
pub mod poly;
pub mod scalar;
pub mod transversal;

pub use error::{LibrateError, Result};
