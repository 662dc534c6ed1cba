//! Dense convex QP by a primal active-set method.
//!
//! ```text
//!     minimize    ½ x'Qx + q'x + const
//!     subject to  E x  = e          (duals γ, free)
//!                 A x <= b          (duals μ >= 0)
//! ```
//!
//! Multipliers follow the Lagrangian `L = f + γ'(E x − e) + μ'(A x − b)`,
//! so stationarity reads `Q x + q + E'γ + A'μ = 0`.
//!
//! Each iteration minimizes over the null space of the working set. The
//! reduced Hessian is eigendecomposed, which lets the same loop handle
//! positive semidefinite `Q` (zero-curvature descent directions become rays
//! to the nearest blocking constraint).

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use super::lp::{self, LpOutcome};
use crate::error::{Error, Result};

/// Absolute slack under which an inequality counts as active.
pub const EPS_ACTIVE: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
    pub eq_mat: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub ineq_mat: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
}

impl QpProblem {
    /// A strictly convex problem; rejects `Q` that is not positive definite.
    pub fn new(
        hessian: DMatrix<f64>,
        linear: DVector<f64>,
        eq_mat: DMatrix<f64>,
        eq_rhs: DVector<f64>,
        ineq_mat: DMatrix<f64>,
        ineq_rhs: DVector<f64>,
    ) -> Result<Self> {
        let p = Self::unchecked(hessian, linear, eq_mat, eq_rhs, ineq_mat, ineq_rhs)?;
        if p.hessian.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(p)
    }

    /// A convex problem with positive semidefinite `Q`.
    pub fn convex(
        hessian: DMatrix<f64>,
        linear: DVector<f64>,
        eq_mat: DMatrix<f64>,
        eq_rhs: DVector<f64>,
        ineq_mat: DMatrix<f64>,
        ineq_rhs: DVector<f64>,
    ) -> Result<Self> {
        let p = Self::unchecked(hessian, linear, eq_mat, eq_rhs, ineq_mat, ineq_rhs)?;
        let scale = p.hessian.amax().max(1.0);
        if p.hessian.nrows() > 0 {
            let min_eig = p.hessian.clone().symmetric_eigenvalues().min();
            if min_eig < -1e-10 * scale {
                return Err(Error::NotPositiveSemidefinite);
            }
        }
        Ok(p)
    }

    fn unchecked(
        hessian: DMatrix<f64>,
        linear: DVector<f64>,
        eq_mat: DMatrix<f64>,
        eq_rhs: DVector<f64>,
        ineq_mat: DMatrix<f64>,
        ineq_rhs: DVector<f64>,
    ) -> Result<Self> {
        let n = linear.len();
        if hessian.shape() != (n, n)
            || eq_mat.ncols() != n
            || ineq_mat.ncols() != n
            || eq_mat.nrows() != eq_rhs.len()
            || ineq_mat.nrows() != ineq_rhs.len()
        {
            return Err(Error::DimensionMismatch(format!(
                "Q {:?}, q {}, E {:?}, e {}, A {:?}, b {}",
                hessian.shape(),
                n,
                eq_mat.shape(),
                eq_rhs.len(),
                ineq_mat.shape(),
                ineq_rhs.len()
            )));
        }
        let asym = (&hessian - hessian.transpose()).amax();
        if asym > 1e-10 {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(QpProblem {
            hessian,
            linear,
            constant: 0.0,
            eq_mat,
            eq_rhs,
            ineq_mat,
            ineq_rhs,
        })
    }

    pub fn with_constant(mut self, constant: f64) -> Self {
        self.constant = constant;
        self
    }

    pub fn n_vars(&self) -> usize {
        self.linear.len()
    }

    pub fn n_ineq(&self) -> usize {
        self.ineq_rhs.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x) + self.constant
    }
}

#[derive(Debug, Clone)]
pub struct QpOptions {
    pub eps_active: f64,
    pub max_iter: Option<usize>,
    /// Inequalities to try as the initial working set.
    pub warm_start: Option<Vec<usize>>,
}

impl Default for QpOptions {
    fn default() -> Self {
        QpOptions {
            eps_active: EPS_ACTIVE,
            max_iter: None,
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub eq_duals: DVector<f64>,
    pub ineq_duals: DVector<f64>,
    /// Inequalities with slack at most `eps_active`, ascending.
    pub active_set: Vec<usize>,
    /// Active inequalities whose dual is below `eps_active`.
    pub weakly_active: Vec<usize>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal: f64,
    pub complementarity: f64,
    /// Most negative inequality dual (0 when all are nonnegative).
    pub dual: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.complementarity)
            .max(self.dual)
    }
}

impl QpSolution {
    pub fn kkt_residuals(&self, p: &QpProblem) -> KktResiduals {
        let grad = &p.hessian * &self.x
            + &p.linear
            + p.eq_mat.transpose() * &self.eq_duals
            + p.ineq_mat.transpose() * &self.ineq_duals;
        let eq_res = &p.eq_mat * &self.x - &p.eq_rhs;
        let slack = &p.ineq_rhs - &p.ineq_mat * &self.x;
        let primal = eq_res
            .amax()
            .max(slack.iter().map(|&s| (-s).max(0.0)).fold(0.0, f64::max));
        let complementarity = self
            .ineq_duals
            .iter()
            .zip(slack.iter())
            .map(|(m, s)| (m * s).abs())
            .fold(0.0, f64::max);
        let dual = self
            .ineq_duals
            .iter()
            .map(|&m| (-m).max(0.0))
            .fold(0.0, f64::max);
        KktResiduals {
            stationarity: grad.amax(),
            primal,
            complementarity,
            dual,
        }
    }
}

pub fn solve_qp(p: &QpProblem) -> Result<QpSolution> {
    solve_qp_with(p, &QpOptions::default())
}

enum Step {
    Newton(DVector<f64>),
    Ray(DVector<f64>),
}

struct ActiveSetSolver<'a> {
    p: &'a QpProblem,
    q_scale: f64,
}

impl ActiveSetSolver<'_> {
    fn working_matrix(&self, work: &[usize]) -> DMatrix<f64> {
        let n = self.p.n_vars();
        let me = self.p.eq_mat.nrows();
        let mut w = DMatrix::zeros(me + work.len(), n);
        w.rows_mut(0, me).copy_from(&self.p.eq_mat);
        for (k, &j) in work.iter().enumerate() {
            w.row_mut(me + k).copy_from(&self.p.ineq_mat.row(j));
        }
        w
    }

    /// Orthonormal basis of the null space of `w`, as columns.
    fn null_space(w: &DMatrix<f64>) -> DMatrix<f64> {
        let n = w.ncols();
        if w.nrows() == 0 {
            return DMatrix::identity(n, n);
        }
        // pad to at least n rows so the SVD returns a full V
        let rows = w.nrows().max(n);
        let mut padded = DMatrix::zeros(rows, n);
        padded.rows_mut(0, w.nrows()).copy_from(w);
        let svd = SVD::new(padded, false, true);
        let v_t = svd.v_t.expect("v_t requested");
        let smax = svd.singular_values.max();
        let tol = 1e-10 * smax.max(1e-300);
        let null: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] <= tol)
            .collect();
        DMatrix::from_fn(n, null.len(), |r, c| v_t[(null[c], r)])
    }

    fn step(&self, x: &DVector<f64>, work: &[usize]) -> Step {
        let g = &self.p.hessian * x + &self.p.linear;
        let z = Self::null_space(&self.working_matrix(work));
        if z.ncols() == 0 {
            return Step::Newton(DVector::zeros(x.len()));
        }
        let hr = z.transpose() * &self.p.hessian * &z;
        let hr = (&hr + hr.transpose()) * 0.5;
        let gr = z.transpose() * &g;
        let eig = SymmetricEigen::new(hr);
        let curv_tol = 1e-10 * self.q_scale;
        let grad_tol = 1e-11 * (1.0 + g.amax());
        let mut newton = DVector::zeros(z.ncols());
        let mut ray = DVector::zeros(z.ncols());
        for k in 0..eig.eigenvalues.len() {
            let u = eig.eigenvectors.column(k);
            let coef = u.dot(&gr);
            if eig.eigenvalues[k] > curv_tol {
                newton -= u * (coef / eig.eigenvalues[k]);
            } else {
                ray -= u * coef;
            }
        }
        if ray.amax() > grad_tol {
            Step::Ray(&z * ray)
        } else {
            Step::Newton(&z * newton)
        }
    }

    /// Least-squares multipliers for `W'ν = −g`.
    fn multipliers(&self, x: &DVector<f64>, work: &[usize]) -> DVector<f64> {
        let w = self.working_matrix(work);
        if w.nrows() == 0 {
            return DVector::zeros(0);
        }
        let g = &self.p.hessian * x + &self.p.linear;
        let svd = SVD::new(w.transpose(), true, true);
        let eps = 1e-12 * svd.singular_values.max().max(1e-300);
        svd.solve(&(-g), eps)
            .expect("svd solve")
            .column(0)
            .into_owned()
    }

    /// Longest feasible step along `p`, capped at `cap`, with the blocking
    /// constraint if one limits it.
    fn ratio_test(
        &self,
        x: &DVector<f64>,
        p: &DVector<f64>,
        work: &[usize],
        cap: f64,
    ) -> (f64, Option<usize>) {
        let a = &self.p.ineq_mat;
        let pn = p.norm();
        let mut best = cap;
        let mut block = None;
        for j in 0..self.p.n_ineq() {
            if work.contains(&j) {
                continue;
            }
            let ap = a.row(j).dot(&p.transpose());
            if ap <= 1e-13 * a.row(j).norm() * pn {
                continue;
            }
            let slack = (self.p.ineq_rhs[j] - a.row(j).dot(&x.transpose())).max(0.0);
            let ratio = slack / ap;
            if ratio < best {
                best = ratio;
                block = Some(j);
            }
        }
        (best, block)
    }

    fn feasible_start(&self, warm: Option<&[usize]>) -> Result<(DVector<f64>, Vec<usize>)> {
        let p = self.p;
        let n = p.n_vars();
        let feas_tol = |x: &DVector<f64>| {
            let eq_ok = p.eq_mat.nrows() == 0
                || (&p.eq_mat * x - &p.eq_rhs).amax() <= 1e-9 * (1.0 + p.eq_rhs.amax());
            let ineq_ok = p.n_ineq() == 0
                || (&p.ineq_mat * x - &p.ineq_rhs).max() <= 1e-9 * (1.0 + p.ineq_rhs.amax());
            eq_ok && ineq_ok
        };

        // Minimizer over the affine set of the warm working set (or of the
        // equalities alone), if it happens to be feasible.
        let mut work: Vec<usize> = Vec::new();
        if let Some(hint) = warm {
            for &j in hint {
                if j >= p.n_ineq() || work.contains(&j) {
                    continue;
                }
                let mut trial = work.clone();
                trial.push(j);
                let w = self.working_matrix(&trial);
                if w.clone().svd(false, false).rank(1e-10 * w.amax().max(1.0)) == w.nrows() {
                    work = trial;
                }
            }
        }
        let w = self.working_matrix(&work);
        let rhs = DVector::from_iterator(
            w.nrows(),
            p.eq_rhs
                .iter()
                .copied()
                .chain(work.iter().map(|&j| p.ineq_rhs[j])),
        );
        let x0 = if w.nrows() == 0 {
            DVector::zeros(n)
        } else {
            let svd = SVD::new(w.clone(), true, true);
            let eps = 1e-12 * svd.singular_values.max().max(1e-300);
            svd.solve(&rhs, eps)
                .expect("svd solve")
                .column(0)
                .into_owned()
        };
        if (&w * &x0 - &rhs).amax() <= 1e-9 * (1.0 + rhs.amax()) {
            if let Step::Newton(step) = self.step(&x0, &work) {
                let x1 = &x0 + step;
                if feas_tol(&x1) {
                    return Ok((x1, work));
                }
            }
        }

        // Phase one: any vertex of the feasible set.
        let me = p.eq_mat.nrows();
        let mi = p.n_ineq();
        let mut a = DMatrix::zeros(2 * me + mi, n);
        let mut b = DVector::zeros(2 * me + mi);
        for i in 0..me {
            a.row_mut(i).copy_from(&p.eq_mat.row(i));
            b[i] = p.eq_rhs[i];
            a.row_mut(me + i).copy_from(&(-p.eq_mat.row(i)));
            b[me + i] = -p.eq_rhs[i];
        }
        a.rows_mut(2 * me, mi).copy_from(&p.ineq_mat);
        b.rows_mut(2 * me, mi).copy_from(&p.ineq_rhs);
        match lp::maximize(&DVector::zeros(n), &a, &b) {
            LpOutcome::Optimal { z, .. } => Ok((z, Vec::new())),
            LpOutcome::Infeasible => Err(Error::Infeasible),
            LpOutcome::Unbounded => unreachable!("zero objective cannot be unbounded"),
        }
    }
}

pub fn solve_qp_with(p: &QpProblem, opts: &QpOptions) -> Result<QpSolution> {
    let n = p.n_vars();
    let me = p.eq_mat.nrows();
    let mi = p.n_ineq();
    let solver = ActiveSetSolver {
        p,
        q_scale: p.hessian.amax().max(1e-300),
    };
    let (mut x, mut work) = solver.feasible_start(opts.warm_start.as_deref())?;
    let max_iter = opts.max_iter.unwrap_or(50 * (n + mi) + 200);
    let bland_after = 10 * (n + mi) + 50;

    let mut iterations = 0;
    let nu = loop {
        if iterations >= max_iter {
            return Err(Error::IterationLimit(max_iter));
        }
        iterations += 1;
        match solver.step(&x, &work) {
            Step::Ray(dir) => {
                let (alpha, block) = solver.ratio_test(&x, &dir, &work, f64::INFINITY);
                let Some(j) = block else {
                    return Err(Error::Unbounded);
                };
                x += dir * alpha;
                work.push(j);
            }
            Step::Newton(step) if step.amax() > 1e-12 * (1.0 + x.amax()) => {
                let (alpha, block) = solver.ratio_test(&x, &step, &work, 1.0);
                x += step * alpha;
                if let Some(j) = block {
                    work.push(j);
                }
            }
            Step::Newton(_) => {
                let nu = solver.multipliers(&x, &work);
                let g_scale = 1.0 + (&p.hessian * &x + &p.linear).amax();
                let tol = 1e-12 * g_scale;
                let negative = work.iter().enumerate().filter(|&(k, _)| nu[me + k] < -tol);
                let drop = if iterations > bland_after {
                    negative.min_by_key(|&(_, &j)| j).map(|(k, _)| k)
                } else {
                    negative
                        .min_by(|a, b| nu[me + a.0].total_cmp(&nu[me + b.0]).then(a.1.cmp(b.1)))
                        .map(|(k, _)| k)
                };
                match drop {
                    Some(k) => {
                        work.remove(k);
                    }
                    None => break nu,
                }
            }
        }
    };

    let g_scale = 1.0 + (&p.hessian * &x + &p.linear).amax();
    let mut ineq_duals = DVector::zeros(mi);
    for (k, &j) in work.iter().enumerate() {
        let v = nu[me + k];
        ineq_duals[j] = if v < 0.0 && v > -1e-10 * g_scale {
            0.0
        } else {
            v
        };
    }
    let eq_duals = DVector::from_fn(me, |i, _| nu[i]);
    let slack = &p.ineq_rhs - &p.ineq_mat * &x;
    let active_set: Vec<usize> = (0..mi).filter(|&j| slack[j] <= opts.eps_active).collect();
    let weakly_active = active_set
        .iter()
        .copied()
        .filter(|&j| ineq_duals[j] < opts.eps_active)
        .collect();
    let objective = p.objective(&x);
    Ok(QpSolution {
        x,
        eq_duals,
        ineq_duals,
        active_set,
        weakly_active,
        objective,
        iterations,
    })
}
