//! Local affine maps of the dispatch solution in the load.
//!
//! Differentiating the KKT system at a non-degenerate solution gives
//! `M₀·d(P, γ, μ, ψ) = N₀·dl`. Unknowns are ordered `[dP; dγ; dy]` where `y`
//! stacks all inequality duals `[μ₂; μ₁; ψ₂; ψ₁]`. Rows are stationarity,
//! balance, then one complementarity row per inequality:
//!
//! ```text
//!     Q dP − 1 dγ + Aᵀ dy        = 0
//!     −1ᵀ dP                     = −1ᵀ dl
//!     y_j A_j dP − s_j dy_j      = y_j B_j dl     (s_j = slack of row j)
//! ```
//!
//! Each complementarity row is divided by `max(|y_j|, s_j)` so that active
//! and inactive rows are on a comparable scale.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};
use crate::sced::{DispatchResult, SCEDQp};

/// Relative singular-value threshold below which `M₀` counts as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Affine maps `x(l) = x̃ + J·(l − l̃)` of one active set.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePiece {
    pub base_point: DVector<f64>,
    pub p0: DVector<f64>,
    pub jac_p: DMatrix<f64>,
    pub gamma0: f64,
    pub jac_gamma: RowDVector<f64>,
    /// Stacked inequality duals `[μ₂; μ₁; ψ₂; ψ₁]` at the base point.
    pub y0: DVector<f64>,
    pub jac_y: DMatrix<f64>,
    /// `λ(l) = F·l + g`.
    pub f: DMatrix<f64>,
    pub g: DVector<f64>,
    /// Sorted stacked indices of the active inequalities.
    pub active_set: Vec<usize>,
}

impl AffinePiece {
    pub fn primal_at(&self, l: &DVector<f64>) -> DVector<f64> {
        &self.p0 + &self.jac_p * (l - &self.base_point)
    }

    pub fn gamma_at(&self, l: &DVector<f64>) -> f64 {
        self.gamma0 + (&self.jac_gamma * (l - &self.base_point))[0]
    }

    pub fn duals_at(&self, l: &DVector<f64>) -> DVector<f64> {
        &self.y0 + &self.jac_y * (l - &self.base_point)
    }

    pub fn lmp_at(&self, l: &DVector<f64>) -> DVector<f64> {
        &self.f * l + &self.g
    }
}

/// For a pinned generator both bound rows are always tight. The row
/// carrying the larger dual keeps a `dP_k = 0` row; its partner's dual
/// derivative is fixed to zero.
fn pinned_role(qp: &SCEDQp, y: &DVector<f64>, j: usize) -> Option<bool> {
    let (upper, lower) = qp.pinned_pair(j)?;
    let carrier = if y[upper] >= y[lower] { upper } else { lower };
    Some(j == carrier)
}

pub fn sensitivity(qp: &SCEDQp, res: &DispatchResult) -> Result<AffinePiece> {
    if res.is_degenerate() {
        let labels: Vec<String> = res
            .degenerate_rows
            .iter()
            .map(|&j| qp.row_label(j))
            .collect();
        return Err(Error::Degenerate(format!(
            "weakly active: {}",
            labels.join(", ")
        )));
    }
    let n = qp.n_nodes();
    let ng = qp.n_gens();
    let mi = qp.n_ineq();
    let dim = ng + 1 + mi;
    let a = qp.ineq_mat();
    let b_jac = qp.rhs_jacobian();
    let p = &res.generation;
    let y = &res.solution.ineq_duals;
    let slack = qp.ineq_rhs(&res.load) - a * p;

    let mut m0 = DMatrix::zeros(dim, dim);
    let mut n0 = DMatrix::zeros(dim, n);
    for k in 0..ng {
        m0[(k, k)] = qp.q_diag[k];
        m0[(k, ng)] = -1.0;
        for j in 0..mi {
            m0[(k, ng + 1 + j)] = a[(j, k)];
        }
    }
    for k in 0..ng {
        m0[(ng, k)] = -1.0;
    }
    for i in 0..n {
        n0[(ng, i)] = -1.0;
    }
    for j in 0..mi {
        let row = ng + 1 + j;
        match pinned_role(qp, y, j) {
            Some(true) => {
                for k in 0..ng {
                    m0[(row, k)] = a[(j, k)];
                }
            }
            Some(false) => m0[(row, ng + 1 + j)] = 1.0,
            None => {
                let s = slack[j].max(0.0);
                let scale = y[j].abs().max(s);
                for k in 0..ng {
                    m0[(row, k)] = y[j] * a[(j, k)] / scale;
                }
                m0[(row, ng + 1 + j)] = -s / scale;
                for i in 0..n {
                    n0[(row, i)] = y[j] * b_jac[(j, i)] / scale;
                }
            }
        }
    }

    let svd = m0.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin.is_nan() || smin <= SINGULAR_TOL * smax {
        return Err(Error::Degenerate(format!(
            "singular sensitivity matrix (condition {:.1e})",
            smax / smin.max(f64::MIN_POSITIVE)
        )));
    }
    let jac = m0
        .lu()
        .solve(&n0)
        .ok_or_else(|| Error::Degenerate("singular sensitivity matrix".into()))?;

    let m = qp.n_lines();
    let jac_p = jac.rows(0, ng).into_owned();
    let jac_gamma = jac.row(ng).into_owned();
    let jac_y = jac.rows(ng + 1, mi).into_owned();
    let d_mu = jac_y.rows(0, m) - jac_y.rows(m, m);
    let f = DMatrix::from_fn(n, n, |_, c| jac_gamma[c]) - qp.h.transpose() * d_mu;
    let g = &res.lambda - &f * &res.load;

    Ok(AffinePiece {
        base_point: res.load.clone(),
        p0: p.clone(),
        jac_p,
        gamma0: res.gamma,
        jac_gamma,
        y0: y.clone(),
        jac_y,
        f,
        g,
        active_set: res.active_set.clone(),
    })
}
