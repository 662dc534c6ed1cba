//! Brute-force QP solution by active-set enumeration, for validation.
//!
//! Every subset of inequalities small enough to leave a square KKT system
//! is tried; the best point that is primal feasible with nonnegative
//! multipliers is returned. Exponential in the inequality count.

use nalgebra::{DMatrix, DVector};

use super::qp::QpProblem;
use crate::error::{Error, Result};

/// Largest inequality count accepted.
pub const ENUMERATION_MAX_INEQ: usize = 16;

const FEAS_TOL: f64 = 1e-9;

/// Minimizer and objective of a strictly convex problem, or `None` when no
/// active subset yields a KKT point (the problem is infeasible).
pub fn solve_by_enumeration(p: &QpProblem) -> Result<Option<(DVector<f64>, f64)>> {
    let n = p.n_vars();
    let m = p.n_ineq();
    let me = p.eq_mat.nrows();
    if m > ENUMERATION_MAX_INEQ {
        return Err(Error::DimensionMismatch(format!(
            "enumeration supports at most {ENUMERATION_MAX_INEQ} inequalities, got {m}"
        )));
    }
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0u32..(1 << m) {
        let set: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
        let k = me + set.len();
        if k > n {
            continue;
        }
        let mut kkt = DMatrix::zeros(n + k, n + k);
        let mut rhs = DVector::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&p.hessian);
        rhs.rows_mut(0, n).copy_from(&(-&p.linear));
        for r in 0..k {
            let (row, b) = if r < me {
                (p.eq_mat.row(r).into_owned(), p.eq_rhs[r])
            } else {
                let i = set[r - me];
                (p.ineq_mat.row(i).into_owned(), p.ineq_rhs[i])
            };
            kkt.view_mut((n + r, 0), (1, n)).copy_from(&row);
            kkt.view_mut((0, n + r), (n, 1)).copy_from(&row.transpose());
            rhs[n + r] = b;
        }
        let sv = kkt.clone().svd(false, false).singular_values;
        if sv.min() <= 1e-10 * sv.max() {
            continue;
        }
        let Some(sol) = kkt.lu().solve(&rhs) else {
            continue;
        };
        let x = sol.rows(0, n).into_owned();
        let duals_ok = (0..set.len()).all(|j| sol[n + me + j] >= -FEAS_TOL);
        let primal_ok = (&p.ineq_mat * &x - &p.ineq_rhs)
            .iter()
            .all(|&v| v <= FEAS_TOL);
        if duals_ok && primal_ok {
            let obj = p.objective(&x);
            if best.as_ref().is_none_or(|b| obj < b.1) {
                best = Some((x, obj));
            }
        }
    }
    Ok(best)
}
