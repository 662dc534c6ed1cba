//! Dense convex QP, LP and polytope utilities.

pub mod enumerate;
pub mod lp;
pub mod polytope;
pub mod qp;

pub use enumerate::solve_by_enumeration;
pub use polytope::{Feasibility, Polytope};
pub use qp::{solve_qp, solve_qp_with, KktResiduals, QpOptions, QpProblem, QpSolution, EPS_ACTIVE};
