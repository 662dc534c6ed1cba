//! Exhaustive targeting by node-subset enumeration, for validation.
//!
//! For every subset `S` with `|S| <= K` and every region, a convex QP over
//! `x_S` alone is solved. The formulation is written independently of the
//! branch-and-bound model.

use nalgebra::{DMatrix, DVector};

use super::solve::build_plan;
use super::spec::{Mode, SolveStats, TargetingPlan, TargetingSpec};
use crate::error::{Error, Result};
use crate::mpqp::Policy;
use crate::qpcore::{polytope::FEAS_TOL, solve_qp, QpProblem};

pub const ORACLE_MAX_NODES: usize = 10;
pub const ORACLE_MAX_K: usize = 3;

/// All subsets of `0..n` with at most `k` members, smallest first.
pub fn subsets_up_to(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..k.min(n) {
        let mut next = Vec::new();
        for s in &frontier {
            let start = s.last().map_or(0, |&i| i + 1);
            for i in start..n {
                let mut t: Vec<usize> = s.clone();
                t.push(i);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Best reduction restricted to nodes `s` in region `m`, with its objective.
fn solve_subset(
    policy: &Policy,
    spec: &TargetingSpec,
    m: usize,
    s: &[usize],
) -> Result<Option<(DVector<f64>, f64)>> {
    let n = spec.n();
    let cr = &policy.regions[m];
    let lambda0 = cr.piece.lmp_at(&spec.l0);
    // d(Σλ)/dx_i = −Σ_j F_ji
    let grad: Vec<f64> = (0..n).map(|i| -cr.piece.f.column(i).sum()).collect();
    let base = lambda0.sum() - n as f64 * spec.lambda_ref;
    let linear_on = spec.mode == Mode::Reduce || spec.shift_linear_term;
    let k = s.len();

    let r_slack = &cr.region.r_vec - &cr.region.r_mat * &spec.l0;
    if k == 0 {
        if r_slack.iter().all(|&v| v >= -FEAS_TOL) {
            return Ok(Some((DVector::zeros(n), base * base)));
        }
        return Ok(None);
    }

    // (base + Σ grad_i x_i)²
    let gs = DVector::from_iterator(k, s.iter().map(|&i| grad[i]));
    let hess = &gs * gs.transpose() * 2.0;
    let mut lin = &gs * (2.0 * base);
    if linear_on {
        for (a, &i) in s.iter().enumerate() {
            lin[a] += spec.weight[i];
        }
    }
    let rows = 2 * k + cr.region.n_rows();
    let mut a = DMatrix::zeros(rows, k);
    let mut b = DVector::zeros(rows);
    for (p, &i) in s.iter().enumerate() {
        a[(2 * p, p)] = 1.0;
        b[2 * p] = spec.xbar[i];
        a[(2 * p + 1, p)] = -1.0;
        b[2 * p + 1] = match spec.mode {
            Mode::Reduce => 0.0,
            Mode::Shift => spec.xbar[i],
        };
    }
    for r in 0..cr.region.n_rows() {
        for (p, &i) in s.iter().enumerate() {
            a[(2 * k + r, p)] = -cr.region.r_mat[(r, i)];
        }
        b[2 * k + r] = r_slack[r];
    }
    let (e, e_rhs) = match spec.mode {
        Mode::Shift => (DMatrix::from_element(1, k, 1.0), DVector::zeros(1)),
        Mode::Reduce => (DMatrix::zeros(0, k), DVector::zeros(0)),
    };
    let qp = QpProblem::convex(hess, lin, e, e_rhs, a, b)?.with_constant(base * base);
    match solve_qp(&qp) {
        Ok(sol) => {
            let mut x = DVector::zeros(n);
            for (p, &i) in s.iter().enumerate() {
                x[i] = sol.x[p];
            }
            Ok(Some((x, sol.objective)))
        }
        Err(Error::Infeasible) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Global optimum by enumeration. Ties keep the earliest subset, then the
/// lowest region index.
pub fn oracle_targeting(policy: &Policy, spec: &TargetingSpec) -> Result<TargetingPlan> {
    let n = spec.n();
    spec.validate(policy.qp.n_nodes())?;
    if n > ORACLE_MAX_NODES || spec.k > ORACLE_MAX_K {
        return Err(Error::OracleTooLarge(format!(
            "N = {n}, K = {} (limits N <= {ORACLE_MAX_NODES}, K <= {ORACLE_MAX_K})",
            spec.k
        )));
    }
    let subsets = subsets_up_to(n, spec.k);
    let mut best: Option<(f64, usize, DVector<f64>)> = None;
    for s in &subsets {
        for m in 0..policy.n_regions() {
            if let Some((x, obj)) = solve_subset(policy, spec, m, s)? {
                if best.as_ref().is_none_or(|b| obj < b.0) {
                    best = Some((obj, m, x));
                }
            }
        }
    }
    let (_, m, x) = best.ok_or(Error::DrInfeasible)?;
    let stats = SolveStats {
        regions: policy.n_regions(),
        ..Default::default()
    };
    Ok(build_plan(policy, spec, m, &x, stats))
}
