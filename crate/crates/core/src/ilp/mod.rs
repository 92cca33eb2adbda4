//! Binary integer linear program for discrete phase selection and its branch-and-bound solver.

pub mod bilp;
pub mod bnb;
pub mod simplex;

pub use bilp::{build_bilp, BilpProblem};
pub use bnb::{solve_bilp, BilpOptions, BilpSolution, BilpStatus};
