//! DC security-constrained economic dispatch as a parametric QP in the load.
//!
//! ```text
//!     minimize    Σ ½ a_k P_k² + b_k P_k + c_k
//!     subject to  −1ᵀP = −1ᵀl                       (γ)
//!                  HG·P <= f + H·l                   (μ₂)
//!                 −HG·P <= f − H·l                   (μ₁)
//!                     P <= Pmax                      (ψ₂)
//!                    −P <= −Pmin                     (ψ₁)
//! ```
//!
//! `G` maps generators to their nodes. The balance row is written with a
//! minus sign so that its multiplier γ is the (positive) system marginal
//! price and `λ = γ·1 − Hᵀ(μ₂ − μ₁)` is the derivative of optimal cost with
//! respect to nodal load.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{NetworkCase, ShiftFactorMatrix};
use crate::qpcore::{solve_qp_with, QpOptions, QpProblem, QpSolution};

/// Which inequality block a stacked row index belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    LineUpper(usize),
    LineLower(usize),
    GenUpper(usize),
    GenLower(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SCEDQp {
    pub case: NetworkCase,
    pub h: DMatrix<f64>,
    /// Quadratic coefficients `a`, one per generator.
    pub q_diag: DVector<f64>,
    /// Linear coefficients `b`.
    pub q_lin: DVector<f64>,
    pub constant: f64,
    ineq_mat: DMatrix<f64>,
    rhs_jac: DMatrix<f64>,
    rhs_fixed: DVector<f64>,
}

pub fn assemble(case: &NetworkCase, h: &ShiftFactorMatrix) -> Result<SCEDQp> {
    let n = case.n_nodes();
    let m = case.n_lines();
    let ng = case.n_generators();
    if h.h.shape() != (m, n) {
        return Err(Error::DimensionMismatch(format!(
            "H is {:?} but the case has {m} lines and {n} nodes",
            h.h.shape()
        )));
    }
    let hg = &h.h * case.gen_incidence();
    let rows = 2 * m + 2 * ng;
    let mut ineq_mat = DMatrix::zeros(rows, ng);
    let mut rhs_jac = DMatrix::zeros(rows, n);
    let mut rhs_fixed = DVector::zeros(rows);
    for e in 0..m {
        ineq_mat.row_mut(e).copy_from(&hg.row(e));
        ineq_mat.row_mut(m + e).copy_from(&(-hg.row(e)));
        rhs_jac.row_mut(e).copy_from(&h.h.row(e));
        rhs_jac.row_mut(m + e).copy_from(&(-h.h.row(e)));
        rhs_fixed[e] = case.lines[e].limit;
        rhs_fixed[m + e] = case.lines[e].limit;
    }
    for (k, g) in case.generators.iter().enumerate() {
        ineq_mat[(2 * m + k, k)] = 1.0;
        ineq_mat[(2 * m + ng + k, k)] = -1.0;
        rhs_fixed[2 * m + k] = g.pmax;
        rhs_fixed[2 * m + ng + k] = -g.pmin;
    }
    Ok(SCEDQp {
        case: case.clone(),
        h: h.h.clone(),
        q_diag: DVector::from_iterator(ng, case.generators.iter().map(|g| g.a)),
        q_lin: DVector::from_iterator(ng, case.generators.iter().map(|g| g.b)),
        constant: case.generators.iter().map(|g| g.c).sum(),
        ineq_mat,
        rhs_jac,
        rhs_fixed,
    })
}

impl SCEDQp {
    pub fn n_nodes(&self) -> usize {
        self.case.n_nodes()
    }

    pub fn n_lines(&self) -> usize {
        self.case.n_lines()
    }

    pub fn n_gens(&self) -> usize {
        self.case.n_generators()
    }

    pub fn n_ineq(&self) -> usize {
        self.ineq_mat.nrows()
    }

    /// Stacked inequality matrix `[HG; −HG; I; −I]`.
    pub fn ineq_mat(&self) -> &DMatrix<f64> {
        &self.ineq_mat
    }

    /// Jacobian of the inequality rhs with respect to load: `[H; −H; 0; 0]`.
    pub fn rhs_jacobian(&self) -> &DMatrix<f64> {
        &self.rhs_jac
    }

    /// Inequality rhs `[f + Hl; f − Hl; Pmax; −Pmin]`.
    pub fn ineq_rhs(&self, l: &DVector<f64>) -> DVector<f64> {
        &self.rhs_fixed + &self.rhs_jac * l
    }

    /// Coefficients of the balance row, `−1ᵀ` over generators.
    pub fn eq_row(&self) -> DVector<f64> {
        DVector::from_element(self.n_gens(), -1.0)
    }

    pub fn row_kind(&self, j: usize) -> RowKind {
        let m = self.n_lines();
        let ng = self.n_gens();
        match j {
            j if j < m => RowKind::LineUpper(j),
            j if j < 2 * m => RowKind::LineLower(j - m),
            j if j < 2 * m + ng => RowKind::GenUpper(j - 2 * m),
            j => RowKind::GenLower(j - 2 * m - ng),
        }
    }

    pub fn row_label(&self, j: usize) -> String {
        let node = |i: usize| self.case.nodes[i].as_str();
        match self.row_kind(j) {
            RowKind::LineUpper(e) | RowKind::LineLower(e) => {
                let line = &self.case.lines[e];
                let dir = if matches!(self.row_kind(j), RowKind::LineUpper(_)) {
                    "+"
                } else {
                    "-"
                };
                format!("line {}-{} ({dir})", node(line.from), node(line.to))
            }
            RowKind::GenUpper(k) => {
                format!("gen {} @ {} pmax", k, node(self.case.generators[k].node))
            }
            RowKind::GenLower(k) => {
                format!("gen {} @ {} pmin", k, node(self.case.generators[k].node))
            }
        }
    }

    /// For a generator with `pmin == pmax`, the stacked indices of its two
    /// bound rows. Both are tight at every feasible point.
    pub fn pinned_pair(&self, j: usize) -> Option<(usize, usize)> {
        let k = match self.row_kind(j) {
            RowKind::GenUpper(k) | RowKind::GenLower(k) => k,
            _ => return None,
        };
        if !self.case.generators[k].is_pinned() {
            return None;
        }
        let base = 2 * self.n_lines();
        Some((base + k, base + self.n_gens() + k))
    }

    pub fn qp_at(&self, l: &DVector<f64>) -> Result<QpProblem> {
        if l.len() != self.n_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "load vector has {} entries, case has {} nodes",
                l.len(),
                self.n_nodes()
            )));
        }
        let ng = self.n_gens();
        let p = QpProblem::new(
            DMatrix::from_diagonal(&self.q_diag),
            self.q_lin.clone(),
            DMatrix::from_element(1, ng, -1.0),
            DVector::from_element(1, -l.sum()),
            self.ineq_mat.clone(),
            self.ineq_rhs(l),
        )?;
        Ok(p.with_constant(self.constant))
    }

    pub fn cost(&self, p: &DVector<f64>) -> f64 {
        0.5 * p.dot(&self.q_diag.component_mul(p)) + self.q_lin.dot(p) + self.constant
    }

    /// Nodal prices from the balance dual and the stacked line duals.
    pub fn lmp(
        &self,
        gamma: f64,
        mu_upper: &DVector<f64>,
        mu_lower: &DVector<f64>,
    ) -> DVector<f64> {
        DVector::from_element(self.n_nodes(), gamma) - self.h.transpose() * (mu_upper - mu_lower)
    }

    /// Active rows whose dual is (numerically) zero, ignoring the structurally
    /// tight partner bound of a pinned generator.
    pub fn degenerate_rows(&self, sol: &QpSolution) -> Vec<usize> {
        sol.weakly_active
            .iter()
            .copied()
            .filter(|&j| self.pinned_pair(j).is_none())
            .collect()
    }

    pub fn dispatch(&self, l: &DVector<f64>) -> Result<DispatchResult> {
        self.dispatch_with(l, &QpOptions::default())
    }

    pub fn dispatch_with(&self, l: &DVector<f64>, opts: &QpOptions) -> Result<DispatchResult> {
        let qp = self.qp_at(l)?;
        let sol = match solve_qp_with(&qp, opts) {
            Ok(sol) => sol,
            Err(Error::Infeasible) => return Err(Error::DispatchInfeasible),
            Err(e) => return Err(e),
        };
        Ok(self.result_from(l, sol))
    }

    fn result_from(&self, l: &DVector<f64>, sol: QpSolution) -> DispatchResult {
        let m = self.n_lines();
        let ng = self.n_gens();
        let mu = &sol.ineq_duals;
        let mu_upper = mu.rows(0, m).into_owned();
        let mu_lower = mu.rows(m, m).into_owned();
        let psi_upper = mu.rows(2 * m, ng).into_owned();
        let psi_lower = mu.rows(2 * m + ng, ng).into_owned();
        let gamma = sol.eq_duals[0];
        let lambda = self.lmp(gamma, &mu_upper, &mu_lower);
        let flows = &self.h * (self.case.nodal_generation(&sol.x) - l);

        let mut binding_lines = Vec::new();
        let mut binding_generators = Vec::new();
        for &j in &sol.active_set {
            match self.row_kind(j) {
                RowKind::LineUpper(e) | RowKind::LineLower(e) => binding_lines.push(e),
                RowKind::GenUpper(k) | RowKind::GenLower(k) => {
                    if !self.case.generators[k].synthetic {
                        binding_generators.push(k)
                    }
                }
            }
        }
        binding_lines.sort_unstable();
        binding_lines.dedup();
        binding_generators.sort_unstable();
        binding_generators.dedup();
        let degenerate_rows = self.degenerate_rows(&sol);

        DispatchResult {
            load: l.clone(),
            generation: sol.x.clone(),
            lambda,
            gamma,
            mu_upper,
            mu_lower,
            psi_upper,
            psi_lower,
            flows,
            cost: self.cost(&sol.x),
            active_set: sol.active_set.clone(),
            binding_lines,
            binding_generators,
            degenerate_rows,
            solution: sol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchResult {
    pub load: DVector<f64>,
    /// Output per generator, in case generator order.
    pub generation: DVector<f64>,
    pub lambda: DVector<f64>,
    pub gamma: f64,
    /// Duals of `HG·P <= f + H·l`.
    pub mu_upper: DVector<f64>,
    /// Duals of `−HG·P <= f − H·l`.
    pub mu_lower: DVector<f64>,
    pub psi_upper: DVector<f64>,
    pub psi_lower: DVector<f64>,
    pub flows: DVector<f64>,
    pub cost: f64,
    /// Stacked inequality indices with slack at most the activity tolerance.
    pub active_set: Vec<usize>,
    pub binding_lines: Vec<usize>,
    pub binding_generators: Vec<usize>,
    /// Weakly active rows that make the active set degenerate.
    pub degenerate_rows: Vec<usize>,
    pub solution: QpSolution,
}

impl DispatchResult {
    pub fn is_degenerate(&self) -> bool {
        !self.degenerate_rows.is_empty()
    }

    pub fn report(&self, qp: &SCEDQp) -> DispatchReport {
        let nodes = &qp.case.nodes;
        DispatchReport {
            nodes: nodes.clone(),
            load: self.load.iter().copied().collect(),
            generation: qp
                .case
                .generators
                .iter()
                .zip(self.generation.iter())
                .filter(|(g, _)| !g.synthetic)
                .map(|(g, &mw)| GenerationEntry {
                    node: nodes[g.node].clone(),
                    mw,
                })
                .collect(),
            lmp: self.lambda.iter().copied().collect(),
            cost: self.cost,
            duals: DualReport {
                gamma: self.gamma,
                mu_upper: self.mu_upper.iter().copied().collect(),
                mu_lower: self.mu_lower.iter().copied().collect(),
                psi_upper: self.psi_upper.iter().copied().collect(),
                psi_lower: self.psi_lower.iter().copied().collect(),
            },
            flows: self.flows.iter().copied().collect(),
            active_set: self.active_set.iter().map(|&j| qp.row_label(j)).collect(),
            binding_lines: self
                .binding_lines
                .iter()
                .map(|&e| {
                    let l = &qp.case.lines[e];
                    format!("{}-{}", nodes[l.from], nodes[l.to])
                })
                .collect(),
            binding_generators: self
                .binding_generators
                .iter()
                .map(|&k| nodes[qp.case.generators[k].node].clone())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationEntry {
    pub node: String,
    pub mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualReport {
    pub gamma: f64,
    pub mu_upper: Vec<f64>,
    pub mu_lower: Vec<f64>,
    pub psi_upper: Vec<f64>,
    pub psi_lower: Vec<f64>,
}

/// Serializable view of a dispatch; vectors follow node, line and generator
/// order of the case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchReport {
    pub nodes: Vec<String>,
    pub load: Vec<f64>,
    pub generation: Vec<GenerationEntry>,
    pub lmp: Vec<f64>,
    pub cost: f64,
    pub duals: DualReport,
    pub flows: Vec<f64>,
    pub active_set: Vec<String>,
    pub binding_lines: Vec<String>,
    pub binding_generators: Vec<String>,
}
