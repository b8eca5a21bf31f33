//! Validated interval arithmetic on binary64 with outward rounding,
//! interval vectors/matrices, preconditioned interval linear solves and
//! the interval Newton operator.

pub mod interval;
pub mod linalg;
pub mod round;
pub mod vector;

pub use interval::Interval;
pub use linalg::{
    eig2_real, enclose_inverse, f64_inverse, gershgorin_min_eig, interval_newton, solve_linear,
    solve_linear_matrix, NewtonOutcome, NewtonStatus,
};
pub use vector::{IMatrix, IVector};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IvlError {
    #[error("division by an interval containing zero")]
    DivisionByZeroInterval,
    #[error("{op} applied outside its domain: [{lo}, {hi}]")]
    DomainError {
        op: &'static str,
        lo: f64,
        hi: f64,
    },
    #[error("interval matrix enclosure may contain a singular matrix")]
    SingularEnclosure,
}
