//! The piecewise-affine LMP policy and its JSON form.

use std::path::Path;

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::explore::ExploreOptions;
use super::region::CriticalRegion;
use super::sensitivity::AffinePiece;
use crate::error::{Error, Result};
use crate::netmodel::{build_shift_factors, CaseFile, CaseOptions, NetworkCase};
use crate::qpcore::Polytope;
use crate::sced::{assemble, SCEDQp};

pub const POLICY_FORMAT: &str = "drt-policy/1";

/// Tolerance for point location in `evaluate`.
pub const LOCATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMeta {
    /// SHA-256 of the canonical case JSON.
    pub case_hash: String,
    pub eps_active: f64,
    pub min_radius: f64,
    pub seed: u64,
    pub iterations: usize,
    pub degenerate_skipped: usize,
    pub infeasible_pieces: usize,
    /// Region count before unification, if unification ran.
    pub regions_before_unify: Option<usize>,
}

impl PolicyMeta {
    pub(crate) fn new(
        qp: &SCEDQp,
        opts: &ExploreOptions,
        iterations: usize,
        degenerate_skipped: usize,
        infeasible_pieces: usize,
    ) -> Self {
        PolicyMeta {
            case_hash: case_hash(&qp.case),
            eps_active: opts.eps_active,
            min_radius: opts.min_radius,
            seed: opts.seed,
            iterations,
            degenerate_skipped,
            infeasible_pieces,
            regions_before_unify: None,
        }
    }
}

pub fn case_hash(case: &NetworkCase) -> String {
    let text = serde_json::to_string(&case.to_case_file()).expect("case serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub qp: SCEDQp,
    pub load_set: Polytope,
    pub regions: Vec<CriticalRegion>,
    pub meta: PolicyMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub lambda: DVector<f64>,
    pub region: usize,
}

impl Policy {
    pub fn new(
        qp: SCEDQp,
        load_set: Polytope,
        regions: Vec<CriticalRegion>,
        meta: PolicyMeta,
    ) -> Self {
        Policy {
            qp,
            load_set,
            regions,
            meta,
        }
    }

    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }

    /// Index of the first region containing `l`.
    pub fn locate(&self, l: &DVector<f64>) -> Option<usize> {
        self.regions.iter().position(|r| r.contains(l, LOCATE_TOL))
    }

    /// LMPs at `l` from the first region that contains it. When no region
    /// does, a direct dispatch tells apart an infeasible load from a gap in
    /// the policy.
    pub fn evaluate(&self, l: &DVector<f64>) -> Result<Evaluation> {
        if l.len() != self.qp.n_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "load vector has {} entries, policy has {} nodes",
                l.len(),
                self.qp.n_nodes()
            )));
        }
        match self.locate(l) {
            Some(region) => Ok(Evaluation {
                lambda: self.regions[region].piece.lmp_at(l),
                region,
            }),
            None => {
                let sced_feasible = match self.qp.dispatch(l) {
                    Ok(_) => true,
                    Err(Error::DispatchInfeasible) => false,
                    Err(e) => return Err(e),
                };
                Err(Error::Uncovered { sced_feasible })
            }
        }
    }

    pub fn to_file(&self) -> PolicyFile {
        PolicyFile {
            format: POLICY_FORMAT.to_string(),
            nodes: self.qp.case.nodes.clone(),
            case: self.qp.case.to_case_file(),
            missing_gen_a: self.qp.case.missing_gen_a(),
            load_set: PolytopeDto::from(&self.load_set),
            regions: self
                .regions
                .iter()
                .map(|cr| RegionDto::from_region(cr, &self.qp))
                .collect(),
            meta: self.meta.clone(),
        }
    }

    pub fn from_file(file: &PolicyFile) -> Result<Self> {
        if file.format != POLICY_FORMAT {
            return Err(Error::Parse(format!(
                "unsupported policy format `{}` (expected `{POLICY_FORMAT}`)",
                file.format
            )));
        }
        let case = NetworkCase::from_file(
            &file.case,
            CaseOptions {
                missing_gen_a: file.missing_gen_a,
            },
        )?;
        let qp = assemble(&case, &build_shift_factors(&case)?)?;
        let n = qp.n_nodes();
        let load_set = file.load_set.to_polytope(n)?;
        let regions = file
            .regions
            .iter()
            .map(|r| r.to_region(&qp))
            .collect::<Result<Vec<_>>>()?;
        Ok(Policy::new(qp, load_set, regions, file.meta.clone()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("policy serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PolicyFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Policy::from_file(&file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Policy::from_json(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub format: String,
    pub nodes: Vec<String>,
    pub case: CaseFile,
    pub missing_gen_a: f64,
    pub load_set: PolytopeDto,
    pub regions: Vec<RegionDto>,
    pub meta: PolicyMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolytopeDto {
    #[serde(rename = "R")]
    pub r_mat: Vec<Vec<f64>>,
    #[serde(rename = "r")]
    pub r_vec: Vec<f64>,
}

impl From<&Polytope> for PolytopeDto {
    fn from(p: &Polytope) -> Self {
        PolytopeDto {
            r_mat: rows_of(&p.r_mat),
            r_vec: p.r_vec.iter().copied().collect(),
        }
    }
}

impl PolytopeDto {
    fn to_polytope(&self, dim: usize) -> Result<Polytope> {
        Ok(Polytope::new(
            matrix_from(&self.r_mat, self.r_vec.len(), dim, "R")?,
            DVector::from_vec(self.r_vec.clone()),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDto {
    #[serde(rename = "R")]
    pub r_mat: Vec<Vec<f64>>,
    #[serde(rename = "r")]
    pub r_vec: Vec<f64>,
    #[serde(rename = "F")]
    pub f: Vec<Vec<f64>>,
    pub g: Vec<f64>,
    pub active_set: Vec<usize>,
    pub active_labels: Vec<String>,
    pub base_point: Vec<f64>,
    pub generation: Vec<f64>,
    pub generation_jacobian: Vec<Vec<f64>>,
    pub gamma: f64,
    pub gamma_jacobian: Vec<f64>,
    pub duals: Vec<f64>,
    pub duals_jacobian: Vec<Vec<f64>>,
}

impl RegionDto {
    fn from_region(cr: &CriticalRegion, qp: &SCEDQp) -> Self {
        let p = &cr.piece;
        RegionDto {
            r_mat: rows_of(&cr.region.r_mat),
            r_vec: cr.region.r_vec.iter().copied().collect(),
            f: rows_of(&p.f),
            g: p.g.iter().copied().collect(),
            active_set: p.active_set.clone(),
            active_labels: p.active_set.iter().map(|&j| qp.row_label(j)).collect(),
            base_point: p.base_point.iter().copied().collect(),
            generation: p.p0.iter().copied().collect(),
            generation_jacobian: rows_of(&p.jac_p),
            gamma: p.gamma0,
            gamma_jacobian: p.jac_gamma.iter().copied().collect(),
            duals: p.y0.iter().copied().collect(),
            duals_jacobian: rows_of(&p.jac_y),
        }
    }

    fn to_region(&self, qp: &SCEDQp) -> Result<CriticalRegion> {
        let n = qp.n_nodes();
        let ng = qp.n_gens();
        let mi = qp.n_ineq();
        let check = |name: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(Error::Parse(format!(
                    "region field `{name}` has length {got}, expected {want}"
                )))
            }
        };
        check("g", self.g.len(), n)?;
        check("base_point", self.base_point.len(), n)?;
        check("generation", self.generation.len(), ng)?;
        check("gamma_jacobian", self.gamma_jacobian.len(), n)?;
        check("duals", self.duals.len(), mi)?;
        let region = Polytope::new(
            matrix_from(&self.r_mat, self.r_vec.len(), n, "R")?,
            DVector::from_vec(self.r_vec.clone()),
        );
        let piece = AffinePiece {
            base_point: DVector::from_vec(self.base_point.clone()),
            p0: DVector::from_vec(self.generation.clone()),
            jac_p: matrix_from(&self.generation_jacobian, ng, n, "generation_jacobian")?,
            gamma0: self.gamma,
            jac_gamma: RowDVector::from_vec(self.gamma_jacobian.clone()),
            y0: DVector::from_vec(self.duals.clone()),
            jac_y: matrix_from(&self.duals_jacobian, mi, n, "duals_jacobian")?,
            f: matrix_from(&self.f, n, n, "F")?,
            g: DVector::from_vec(self.g.clone()),
            active_set: self.active_set.clone(),
        };
        Ok(CriticalRegion { piece, region })
    }
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn matrix_from(rows: &[Vec<f64>], nrows: usize, ncols: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse(format!(
            "matrix `{name}` is not {nrows}×{ncols}"
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}
