//! H-polytopes `{z : R z <= r}` and the LP-based operations on them.

use nalgebra::{DMatrix, DVector, RowDVector};

use super::lp::{self, LpOutcome};
use crate::error::{Error, Result};

/// Slack allowed when testing membership or redundancy.
pub const FEAS_TOL: f64 = 1e-9;
/// Rows with a smaller norm are treated as constant.
const ZERO_ROW: f64 = 1e-12;
/// Caps the Chebyshev radius so unbounded sets still give a bounded LP.
const RADIUS_CAP: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    pub r_mat: DMatrix<f64>,
    pub r_vec: DVector<f64>,
    pub tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible {
        witness: DVector<f64>,
        /// Chebyshev radius (may be ~0 for flat sets).
        radius: f64,
    },
    Empty,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }

    pub fn radius(&self) -> Option<f64> {
        match self {
            Feasibility::Feasible { radius, .. } => Some(*radius),
            Feasibility::Empty => None,
        }
    }
}

impl Polytope {
    pub fn new(r_mat: DMatrix<f64>, r_vec: DVector<f64>) -> Self {
        assert_eq!(r_mat.nrows(), r_vec.len(), "polytope row mismatch");
        Polytope {
            r_mat,
            r_vec,
            tag: None,
        }
    }

    /// The whole space in `dim` dimensions.
    pub fn universe(dim: usize) -> Self {
        Polytope::new(DMatrix::zeros(0, dim), DVector::zeros(0))
    }

    pub fn from_box(lo: &DVector<f64>, hi: &DVector<f64>) -> Self {
        let n = lo.len();
        let mut r_mat = DMatrix::zeros(2 * n, n);
        let mut r_vec = DVector::zeros(2 * n);
        for i in 0..n {
            r_mat[(i, i)] = 1.0;
            r_vec[i] = hi[i];
            r_mat[(n + i, i)] = -1.0;
            r_vec[n + i] = -lo[i];
        }
        Polytope::new(r_mat, r_vec)
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = Some(tag.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.r_mat.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.r_mat.nrows()
    }

    pub fn row(&self, i: usize) -> RowDVector<f64> {
        self.r_mat.row(i).into_owned()
    }

    pub fn contains(&self, z: &DVector<f64>, tol: f64) -> bool {
        (0..self.n_rows()).all(|i| self.r_mat.row(i).dot(&z.transpose()) <= self.r_vec[i] + tol)
    }

    /// Largest row violation at `z` (negative when strictly inside).
    pub fn max_violation(&self, z: &DVector<f64>) -> f64 {
        (0..self.n_rows())
            .map(|i| self.r_mat.row(i).dot(&z.transpose()) - self.r_vec[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn intersect(&self, other: &Polytope) -> Polytope {
        assert_eq!(self.dim(), other.dim(), "polytope dimension mismatch");
        let mut r_mat = DMatrix::zeros(self.n_rows() + other.n_rows(), self.dim());
        r_mat.rows_mut(0, self.n_rows()).copy_from(&self.r_mat);
        r_mat
            .rows_mut(self.n_rows(), other.n_rows())
            .copy_from(&other.r_mat);
        let r_vec = DVector::from_iterator(
            self.n_rows() + other.n_rows(),
            self.r_vec.iter().chain(other.r_vec.iter()).copied(),
        );
        Polytope {
            r_mat,
            r_vec,
            tag: self.tag.clone(),
        }
    }

    pub fn push_row(&mut self, row: &RowDVector<f64>, rhs: f64) {
        let n = self.n_rows();
        let m = std::mem::replace(&mut self.r_mat, DMatrix::zeros(0, 0));
        self.r_mat = m.insert_row(n, 0.0);
        self.r_mat.row_mut(n).copy_from(row);
        let v = std::mem::replace(&mut self.r_vec, DVector::zeros(0));
        self.r_vec = v.push(rhs);
    }

    pub fn select_rows(&self, rows: &[usize]) -> Polytope {
        let r_mat = DMatrix::from_fn(rows.len(), self.dim(), |i, j| self.r_mat[(rows[i], j)]);
        let r_vec = DVector::from_fn(rows.len(), |i, _| self.r_vec[rows[i]]);
        Polytope {
            r_mat,
            r_vec,
            tag: self.tag.clone(),
        }
    }

    /// Scales rows to unit norm and drops constant rows that always hold.
    /// Returns `None` when a constant row can never hold.
    pub fn normalized(&self) -> Option<Polytope> {
        let mut keep = Vec::new();
        let mut r_mat = self.r_mat.clone();
        let mut r_vec = self.r_vec.clone();
        for i in 0..self.n_rows() {
            let norm = self.r_mat.row(i).norm();
            if norm <= ZERO_ROW {
                if self.r_vec[i] < -FEAS_TOL {
                    return None;
                }
                continue;
            }
            r_mat.row_mut(i).scale_mut(1.0 / norm);
            r_vec[i] /= norm;
            keep.push(i);
        }
        let p = Polytope {
            r_mat,
            r_vec,
            tag: self.tag.clone(),
        };
        Some(p.select_rows(&keep))
    }

    /// Chebyshev center and radius of the normalized set. `None` when the
    /// set is empty.
    pub fn chebyshev(&self) -> Option<(DVector<f64>, f64)> {
        let p = self.normalized()?;
        let n = p.dim();
        let m = p.n_rows();
        if m == 0 {
            return Some((DVector::zeros(n), RADIUS_CAP));
        }
        let mut a = DMatrix::zeros(m + 1, n + 1);
        a.view_mut((0, 0), (m, n)).copy_from(&p.r_mat);
        for i in 0..m {
            a[(i, n)] = 1.0;
        }
        a[(m, n)] = 1.0;
        let b = DVector::from_iterator(m + 1, p.r_vec.iter().copied().chain([RADIUS_CAP]));
        let mut c = DVector::zeros(n + 1);
        c[n] = 1.0;
        match lp::maximize(&c, &a, &b) {
            LpOutcome::Optimal { z, .. } => {
                let radius = z[n];
                if radius < -FEAS_TOL {
                    return None;
                }
                Some((z.rows(0, n).into_owned(), radius))
            }
            // t is free and the rows are finite, so neither can happen in
            // exact arithmetic; treat as empty
            LpOutcome::Infeasible | LpOutcome::Unbounded => None,
        }
    }

    /// Feasibility verdict with a witness; the witness is the Chebyshev
    /// center, hence strictly interior whenever the interior is nonempty.
    pub fn lp_feasible(&self) -> Feasibility {
        match self.chebyshev() {
            Some((witness, radius)) => Feasibility::Feasible { witness, radius },
            None => Feasibility::Empty,
        }
    }

    /// Maximum of `row·z` over the polytope; `None` if unbounded or empty.
    pub fn support(&self, row: &RowDVector<f64>) -> Option<f64> {
        match lp::maximize(&row.transpose(), &self.r_mat, &self.r_vec) {
            LpOutcome::Optimal { value, .. } => Some(value),
            _ => None,
        }
    }

    /// Removes redundant rows: a row goes iff maximizing its left-hand side
    /// over the remaining rows stays within `rhs + 1e-9`. Rows are scaled
    /// to unit norm first.
    pub fn minimize_representation(&self) -> Result<Polytope> {
        let p = self.normalized().ok_or(Error::EmptyPolytope)?;
        if !p.lp_feasible().is_feasible() {
            return Err(Error::EmptyPolytope);
        }
        let m = p.n_rows();
        let mut alive = vec![true; m];
        for i in 0..m {
            // remaining rows plus row i relaxed by one unit keep the LP bounded
            let others: Vec<usize> = (0..m).filter(|&j| j != i && alive[j]).collect();
            let mut test = p.select_rows(&others);
            test.push_row(&p.row(i), p.r_vec[i] + 1.0);
            let redundant = match test.support(&p.row(i)) {
                Some(v) => v <= p.r_vec[i] + FEAS_TOL,
                None => false,
            };
            if redundant {
                alive[i] = false;
            }
        }
        let keep: Vec<usize> = (0..m).filter(|&i| alive[i]).collect();
        Ok(p.select_rows(&keep))
    }

    /// True when every point of `self` satisfies every row of `other`.
    pub fn is_subset_of(&self, other: &Polytope) -> bool {
        (0..other.n_rows()).all(|i| {
            let row = other.row(i);
            let norm = row.norm().max(1.0);
            match self.support(&row) {
                Some(v) => v <= other.r_vec[i] + FEAS_TOL * norm,
                None => false,
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(rows: &[&[f64]], rhs: &[f64]) -> Polytope {
        let n = rows.first().map_or(0, |r| r.len());
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Polytope::new(
            DMatrix::from_row_slice(rows.len(), n, &flat),
            DVector::from_row_slice(rhs),
        )
    }

    #[test]
    fn empty_interval() {
        let p = poly(&[&[1.0], &[-1.0]], &[1.0, -2.0]);
        assert_eq!(p.lp_feasible(), Feasibility::Empty);
    }

    #[test]
    fn unit_interval_center() {
        let p = poly(&[&[1.0], &[-1.0]], &[1.0, 0.0]);
        match p.lp_feasible() {
            Feasibility::Feasible { witness, radius } => {
                assert!((witness[0] - 0.5).abs() < 1e-12);
                assert!((radius - 0.5).abs() < 1e-12);
            }
            Feasibility::Empty => panic!("expected feasible"),
        }
    }

    #[test]
    fn no_rows_is_whole_space() {
        match Polytope::universe(3).lp_feasible() {
            Feasibility::Feasible { witness, .. } => assert_eq!(witness, DVector::zeros(3)),
            Feasibility::Empty => panic!(),
        }
    }

    #[test]
    fn drops_dominated_row() {
        let p = poly(&[&[1.0], &[1.0]], &[1.0, 2.0])
            .minimize_representation()
            .unwrap();
        assert_eq!(p.n_rows(), 1);
        assert!((p.r_vec[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn drops_loose_diagonal_of_unit_box() {
        let lo = DVector::zeros(2);
        let hi = DVector::from_element(2, 1.0);
        let mut p = Polytope::from_box(&lo, &hi);
        p.push_row(&RowDVector::from_row_slice(&[1.0, 1.0]), 5.0);
        let m = p.minimize_representation().unwrap();
        assert_eq!(m.n_rows(), 4);
        assert!((0..4).all(|i| m.row(i).iter().filter(|v| v.abs() > 0.0).count() == 1));
    }

    #[test]
    fn triangle_is_already_minimal() {
        let p = poly(&[&[-1.0, 0.0], &[0.0, -1.0], &[1.0, 1.0]], &[0.0, 0.0, 1.0]);
        assert_eq!(p.minimize_representation().unwrap().n_rows(), 3);
    }

    #[test]
    fn duplicate_rows_keep_one() {
        let p = poly(&[&[1.0], &[2.0], &[-1.0]], &[1.0, 2.0, 0.0]);
        assert_eq!(p.minimize_representation().unwrap().n_rows(), 2);
    }

    #[test]
    fn minimize_rejects_empty() {
        let p = poly(&[&[1.0], &[-1.0]], &[1.0, -2.0]);
        assert!(matches!(
            p.minimize_representation(),
            Err(Error::EmptyPolytope)
        ));
    }

    #[test]
    fn constant_rows() {
        let p = poly(&[&[0.0], &[1.0]], &[-1.0, 1.0]);
        assert!(p.normalized().is_none());
        let q = poly(&[&[0.0], &[1.0]], &[0.5, 1.0]);
        assert_eq!(q.normalized().unwrap().n_rows(), 1);
    }
}
