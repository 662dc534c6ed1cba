//! Targeting inputs and results.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Curtail load at targeted nodes.
    Reduce,
    /// Move load between targeted nodes with zero net change.
    Shift,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetingSpec {
    /// Reference averaged LMP.
    pub lambda_ref: f64,
    /// Maximum number of targeted nodes.
    pub k: usize,
    pub weight: DVector<f64>,
    /// Per-node maximum reduction (or shift magnitude).
    pub xbar: DVector<f64>,
    pub l0: DVector<f64>,
    pub mode: Mode,
    /// Keep the `wᵀx` term in shift mode.
    pub shift_linear_term: bool,
}

impl TargetingSpec {
    pub fn n(&self) -> usize {
        self.l0.len()
    }

    /// Whether `wᵀx` enters the objective.
    pub fn uses_weight(&self) -> bool {
        self.mode == Mode::Reduce || self.shift_linear_term
    }

    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        let n = self.n();
        if n != n_nodes {
            return Err(Error::spec(
                "l0",
                format!("has {n} entries, network has {n_nodes} nodes"),
            ));
        }
        if self.weight.len() != n {
            return Err(Error::spec(
                "weight",
                format!("has {} entries, expected {n}", self.weight.len()),
            ));
        }
        if self.xbar.len() != n {
            return Err(Error::spec(
                "xbar",
                format!("has {} entries, expected {n}", self.xbar.len()),
            ));
        }
        if !self.lambda_ref.is_finite() {
            return Err(Error::spec("lambda_ref", "must be finite"));
        }
        if self.k > n {
            return Err(Error::spec(
                "k",
                format!("{} exceeds the node count {n}", self.k),
            ));
        }
        for i in 0..n {
            if !self.weight[i].is_finite() || self.weight[i] < 0.0 {
                return Err(Error::spec(
                    format!("weight[{i}]"),
                    "must be finite and >= 0",
                ));
            }
            if self.xbar[i].is_nan() || self.xbar[i] < 0.0 || self.xbar[i] > self.l0[i] {
                return Err(Error::spec(
                    format!("xbar[{i}]"),
                    format!("{} must lie in [0, l0 = {}]", self.xbar[i], self.l0[i]),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveStats {
    pub regions: usize,
    pub relaxations_solved: usize,
    pub regions_screened_out: usize,
    pub miqps_solved: usize,
    pub bb_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetingPlan {
    pub nodes: Vec<String>,
    pub mode: Mode,
    pub lambda_ref: f64,
    pub k: usize,
    /// 1 for targeted nodes.
    pub v: Vec<u8>,
    pub x: Vec<f64>,
    pub l0: Vec<f64>,
    pub l_hat: Vec<f64>,
    pub region: usize,
    pub lmp_before: Vec<f64>,
    pub lmp_after: Vec<f64>,
    pub avg_lmp_before: f64,
    pub avg_lmp_after: f64,
    pub objective: f64,
    /// `(Σλ − Nλ*)²`.
    pub price_term: f64,
    /// `wᵀx` (zero when the mode excludes it).
    pub weight_term: f64,
    pub stats: SolveStats,
}

impl TargetingPlan {
    pub fn targeted(&self) -> Vec<usize> {
        (0..self.v.len()).filter(|&i| self.v[i] == 1).collect()
    }

    pub fn total_reduction(&self) -> f64 {
        self.x.iter().sum()
    }
}
