//! Targeting restricted to one critical region.
//!
//! Inside region `m` the LMPs are `F·l + g`, so with `l̂ = l0 − x` the
//! summed price is `s − cᵀx` for `c = Fᵀ1`. The objective
//! `(Σλ − Nλ*)² + wᵀx` is then a convex quadratic in `x` of rank one.
//! Variables are stacked as `z = [x; v]`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};

use super::spec::{Mode, TargetingSpec};
use crate::error::{Error, Result};
use crate::mpqp::CriticalRegion;
use crate::qpcore::{solve_qp, QpProblem};

/// Distance from 0 or 1 under which a relaxed indicator counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Nodes whose bound is within this of the incumbent are pruned.
pub const PRUNE_TOL: f64 = 1e-9;
/// Reductions smaller than this are reported as zero.
pub const ZERO_X: f64 = 1e-10;

/// A solved continuous subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSolution {
    pub x: DVector<f64>,
    /// Smallest indicators consistent with `x` and the branching bounds.
    pub v: DVector<f64>,
    pub objective: f64,
}

pub struct RegionProblem<'a> {
    spec: &'a TargetingSpec,
    region: &'a CriticalRegion,
    c: DVector<f64>,
    /// Price-sum offset `1ᵀ(F·l0 + g) − Nλ*`.
    s0: f64,
}

impl<'a> RegionProblem<'a> {
    pub fn new(region: &'a CriticalRegion, spec: &'a TargetingSpec) -> Self {
        let piece = &region.piece;
        let n = spec.n();
        let c = piece.f.row_sum().transpose();
        let s0 = c.dot(&spec.l0) + piece.g.sum() - n as f64 * spec.lambda_ref;
        RegionProblem {
            spec,
            region,
            c,
            s0,
        }
    }

    /// Objective of a reduction vector (the constant is included).
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        let price = self.s0 - self.c.dot(x);
        let mut obj = price * price;
        if self.spec.uses_weight() {
            obj += self.spec.weight.dot(x);
        }
        obj
    }

    pub fn price_term(&self, x: &DVector<f64>) -> f64 {
        (self.s0 - self.c.dot(x)).powi(2)
    }

    /// Continuous problem with indicator bounds `lo <= v <= hi` and an
    /// optional cardinality row `1ᵀv <= k`.
    fn qp(&self, lo: &[f64], hi: &[f64], cardinality: Option<usize>) -> Result<QpProblem> {
        let n = self.spec.n();
        let dim = 2 * n;
        let mut hess = DMatrix::zeros(dim, dim);
        hess.view_mut((0, 0), (n, n))
            .copy_from(&(&self.c * self.c.transpose() * 2.0));
        let mut lin_x = &self.c * (-2.0 * self.s0);
        if self.spec.uses_weight() {
            lin_x += &self.spec.weight;
        }
        let mut lin = DVector::zeros(dim);
        lin.rows_mut(0, n).copy_from(&lin_x);

        let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
        let xbar = &self.spec.xbar;
        for i in 0..n {
            // x_i <= x̄_i v_i
            rows.push((vec![(i, 1.0), (n + i, -xbar[i])], 0.0));
            match self.spec.mode {
                Mode::Reduce => rows.push((vec![(i, -1.0)], 0.0)),
                Mode::Shift => rows.push((vec![(i, -1.0), (n + i, -xbar[i])], 0.0)),
            }
            rows.push((vec![(n + i, 1.0)], hi[i]));
            rows.push((vec![(n + i, -1.0)], -lo[i]));
        }
        if let Some(k) = cardinality {
            rows.push(((0..n).map(|i| (n + i, 1.0)).collect(), k as f64));
        }
        let region = &self.region.region;
        let r_l0 = &region.r_mat * &self.spec.l0;
        let mut a = DMatrix::zeros(rows.len() + region.n_rows(), dim);
        let mut b = DVector::zeros(rows.len() + region.n_rows());
        for (i, (coefs, rhs)) in rows.iter().enumerate() {
            for &(j, val) in coefs {
                a[(i, j)] = val;
            }
            b[i] = *rhs;
        }
        // R (l0 − x) <= r
        let off = rows.len();
        for i in 0..region.n_rows() {
            for j in 0..n {
                a[(off + i, j)] = -region.r_mat[(i, j)];
            }
            b[off + i] = region.r_vec[i] - r_l0[i];
        }
        let (eq_mat, eq_rhs) = match self.spec.mode {
            Mode::Shift => {
                let mut e = DMatrix::zeros(1, dim);
                e.view_mut((0, 0), (1, n)).fill(1.0);
                (e, DVector::zeros(1))
            }
            Mode::Reduce => (DMatrix::zeros(0, dim), DVector::zeros(0)),
        };
        Ok(QpProblem::convex(hess, lin, eq_mat, eq_rhs, a, b)?.with_constant(self.s0 * self.s0))
    }

    /// Solves the continuous problem; `None` when it is infeasible.
    pub fn solve(
        &self,
        lo: &[f64],
        hi: &[f64],
        cardinality: Option<usize>,
    ) -> Result<Option<RegionSolution>> {
        let qp = self.qp(lo, hi, cardinality)?;
        let sol = match solve_qp(&qp) {
            Ok(s) => s,
            Err(Error::Infeasible) => return Ok(None),
            Err(e) => return Err(e),
        };
        let n = self.spec.n();
        let x = sol.x.rows(0, n).into_owned();
        let v = DVector::from_fn(n, |i, _| {
            let need = if self.spec.xbar[i] > 0.0 {
                x[i].abs() / self.spec.xbar[i]
            } else {
                0.0
            };
            need.max(lo[i]).min(hi[i])
        });
        Ok(Some(RegionSolution {
            objective: sol.objective,
            x,
            v,
        }))
    }

    /// The relaxation used for screening: indicators in `[0, 1]`, no
    /// cardinality row.
    pub fn relaxation(&self) -> Result<Option<RegionSolution>> {
        let n = self.spec.n();
        self.solve(&vec![0.0; n], &vec![1.0; n], None)
    }

    /// Optimal plan for this region by best-bound branch and bound over the
    /// indicators. Returns the solution and the number of nodes processed.
    pub fn miqp(&self) -> Result<(Option<RegionSolution>, usize)> {
        let n = self.spec.n();
        let k = self.spec.k;
        let mut heap = BinaryHeap::new();
        let mut seq = 0usize;
        let mut nodes = 0usize;
        let mut incumbent: Option<RegionSolution> = None;

        let root_lo = vec![0.0; n];
        let root_hi = vec![1.0; n];
        if let Some(sol) = self.solve(&root_lo, &root_hi, Some(k))? {
            heap.push(Node {
                bound: sol.objective,
                seq,
                lo: root_lo,
                hi: root_hi,
                sol,
            });
        }
        nodes += 1;

        while let Some(node) = heap.pop() {
            if let Some(inc) = &incumbent {
                if node.bound >= inc.objective - PRUNE_TOL {
                    continue;
                }
            }
            let frac = (0..n)
                .map(|i| (i, node.sol.v[i]))
                .filter(|&(_, v)| v > INTEGRALITY_TOL && v < 1.0 - INTEGRALITY_TOL)
                .min_by(|a, b| {
                    let da = (a.1 - 0.5).abs();
                    let db = (b.1 - 0.5).abs();
                    da.total_cmp(&db).then(a.0.cmp(&b.0))
                });
            match frac {
                None => {
                    // integral: fix the rounded indicators and re-solve
                    let fixed: Vec<f64> = node.sol.v.iter().map(|&v| v.round()).collect();
                    nodes += 1;
                    if let Some(leaf) = self.solve(&fixed, &fixed, Some(k))? {
                        let better = incumbent
                            .as_ref()
                            .is_none_or(|inc| leaf.objective < inc.objective);
                        if better {
                            incumbent = Some(leaf);
                        }
                    }
                }
                Some((i, _)) => {
                    for val in [1.0, 0.0] {
                        let mut lo = node.lo.clone();
                        let mut hi = node.hi.clone();
                        lo[i] = val;
                        hi[i] = val;
                        nodes += 1;
                        if let Some(sol) = self.solve(&lo, &hi, Some(k))? {
                            let prune = incumbent
                                .as_ref()
                                .is_some_and(|inc| sol.objective >= inc.objective - PRUNE_TOL);
                            if !prune {
                                seq += 1;
                                heap.push(Node {
                                    bound: sol.objective,
                                    seq,
                                    lo,
                                    hi,
                                    sol,
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok((incumbent, nodes))
    }

    /// Best plan with the indicators fixed to `targeted`.
    pub fn fixed(&self, targeted: &[usize]) -> Result<Option<RegionSolution>> {
        let n = self.spec.n();
        let mut v = vec![0.0; n];
        for &i in targeted {
            v[i] = 1.0;
        }
        self.solve(&v, &v, None)
    }
}

struct Node {
    bound: f64,
    seq: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    sol: RegionSolution,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    /// Max-heap order: smallest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(other.seq.cmp(&self.seq))
    }
}
