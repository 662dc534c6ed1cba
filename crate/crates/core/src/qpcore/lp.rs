//! Dense two-phase tableau simplex for small LPs in inequality form
//!
//! ```text
//!     maximize    c'z
//!     subject to  A z <= b,   z free
//! ```
//!
//! Free variables are split as `z = z⁺ − z⁻`. Bland's rule is used for both
//! the entering and leaving choice, so the method cannot cycle.

use nalgebra::{DMatrix, DVector};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
const PHASE1_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { z: DVector<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<(DVector<f64>, f64)> {
        match self {
            LpOutcome::Optimal { z, value } => Some((z, value)),
            _ => None,
        }
    }
}

struct Tableau {
    /// rows × (cols + 1); last column is the rhs.
    t: DMatrix<f64>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.cols + 1;
        let p = self.t[(row, col)];
        for j in 0..width {
            self.t[(row, j)] /= p;
        }
        for i in 0..self.t.nrows() {
            if i == row {
                continue;
            }
            let f = self.t[(i, col)];
            if f == 0.0 {
                continue;
            }
            for j in 0..width {
                let v = self.t[(row, j)];
                if v != 0.0 {
                    self.t[(i, j)] -= f * v;
                }
            }
            self.t[(i, col)] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Maximizes `cost'y` over the columns allowed by `allowed`. Returns
    /// false on unboundedness.
    fn run(&mut self, cost: &[f64], allowed: &dyn Fn(usize) -> bool) -> bool {
        let m = self.t.nrows();
        let rhs = self.cols;
        let max_iter = 50 * (m + self.cols) + 1000;
        for _ in 0..max_iter {
            // reduced cost d_j = c_j - c_B' B^-1 a_j
            let mut entering = None;
            for j in 0..self.cols {
                if !allowed(j) || self.basis.contains(&j) {
                    continue;
                }
                let mut d = cost[j];
                for i in 0..m {
                    d -= cost[self.basis[i]] * self.t[(i, j)];
                }
                let scale = 1.0 + cost[j].abs();
                if d > COST_TOL * scale {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else { return true };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.t[(i, col)];
                if a > PIVOT_TOL {
                    let ratio = self.t[(i, rhs)].max(0.0) / a;
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((r, best)) => {
                            let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best.abs());
                            if ratio < best && !tie || tie && self.basis[i] < self.basis[r] {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, col),
                None => return false,
            }
        }
        // Bland's rule terminates in exact arithmetic; reaching here means
        // round-off stalled the method. Accept the current basis.
        true
    }
}

/// Solves `max c'z s.t. A z <= b` with `z` free.
pub fn maximize(c: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> LpOutcome {
    let n = c.len();
    let m = a.nrows();
    assert_eq!(a.ncols(), n, "LP column mismatch");
    assert_eq!(b.len(), m, "LP row mismatch");
    if m == 0 {
        return if c.iter().all(|&v| v == 0.0) {
            LpOutcome::Optimal {
                z: DVector::zeros(n),
                value: 0.0,
            }
        } else {
            LpOutcome::Unbounded
        };
    }

    // columns: z+ (n), z- (n), slack (m), artificial (one per negative rhs)
    let negative: Vec<usize> = (0..m).filter(|&i| b[i] < 0.0).collect();
    let n_art = negative.len();
    let art0 = 2 * n + m;
    let cols = art0 + n_art;
    let mut t = DMatrix::zeros(m, cols + 1);
    let mut basis = vec![0usize; m];
    let mut art_k = 0;
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(i, j)] = sign * a[(i, j)];
            t[(i, n + j)] = -sign * a[(i, j)];
        }
        t[(i, 2 * n + i)] = sign;
        t[(i, cols)] = sign * b[i];
        if b[i] < 0.0 {
            t[(i, art0 + art_k)] = 1.0;
            basis[i] = art0 + art_k;
            art_k += 1;
        } else {
            basis[i] = 2 * n + i;
        }
    }
    let mut tab = Tableau { t, basis, cols };

    if n_art > 0 {
        let mut cost1 = vec![0.0; cols];
        for c in cost1.iter_mut().skip(art0) {
            *c = -1.0;
        }
        tab.run(&cost1, &|_| true);
        let infeas: f64 = (0..m)
            .filter(|&i| tab.basis[i] >= art0)
            .map(|i| tab.t[(i, cols)])
            .sum();
        let scale = 1.0 + b.amax();
        if infeas > PHASE1_TOL * scale {
            return LpOutcome::Infeasible;
        }
        // drive remaining (zero-level) artificials out of the basis
        for i in 0..m {
            if tab.basis[i] < art0 {
                continue;
            }
            let col = (0..art0)
                .filter(|j| !tab.basis.contains(j))
                .max_by(|&x, &y| tab.t[(i, x)].abs().total_cmp(&tab.t[(i, y)].abs()));
            if let Some(col) = col {
                if tab.t[(i, col)].abs() > PIVOT_TOL {
                    tab.pivot(i, col);
                }
            }
            // otherwise the row is linearly dependent and stays parked on a
            // zero-level artificial that phase 2 may not re-enter
        }
    }

    let mut cost2 = vec![0.0; cols];
    for j in 0..n {
        cost2[j] = c[j];
        cost2[n + j] = -c[j];
    }
    if !tab.run(&cost2, &|j| j < art0) {
        return LpOutcome::Unbounded;
    }

    let mut y = vec![0.0; cols];
    for i in 0..m {
        y[tab.basis[i]] = tab.t[(i, cols)];
    }
    let z = DVector::from_fn(n, |j, _| y[j] - y[n + j]);
    let value = c.dot(&z);
    LpOutcome::Optimal { z, value }
}
