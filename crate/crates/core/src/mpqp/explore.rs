//! Critical-region enumeration over the load set.
//!
//! A depth-first frontier of polytopes is kept. For each frontier piece a
//! load with feasible dispatch is found, its critical region is built over
//! the whole load set, and the rest of the piece is split into new frontier
//! pieces.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::policy::{Policy, PolicyMeta};
use super::region::{build_region, CriticalRegion, MIN_RADIUS};
use super::sensitivity::sensitivity;
use crate::error::{Error, Result};
use crate::qpcore::lp::{self, LpOutcome};
use crate::qpcore::polytope::FEAS_TOL;
use crate::qpcore::{Polytope, QpOptions, EPS_ACTIVE};
use crate::sced::SCEDQp;

const MARGIN_CAP: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct ExploreOptions {
    pub min_radius: f64,
    pub eps_active: f64,
    /// Retries with a perturbed base point when the active set is degenerate.
    pub perturb_tries: usize,
    pub perturb_scale: f64,
    pub seed: u64,
    /// Overrides the default cap derived from the problem size.
    pub iteration_cap: Option<usize>,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions {
            min_radius: MIN_RADIUS,
            eps_active: EPS_ACTIVE,
            perturb_tries: 5,
            perturb_scale: 1e-6,
            seed: 0,
            iteration_cap: None,
        }
    }
}

/// A load in `subset` with feasible dispatch, together with the margin by
/// which it satisfies the subset rows, line limits and (non-pinned)
/// generator bounds. Solves one LP jointly over `(P, l, t)` maximizing the
/// margin `t`.
pub fn feasible_load_with_margin(qp: &SCEDQp, subset: &Polytope) -> Option<(DVector<f64>, f64)> {
    let subset = subset.normalized()?;
    let n = qp.n_nodes();
    let ng = qp.n_gens();
    let a = qp.ineq_mat();
    let b_jac = qp.rhs_jacobian();
    let b_fixed = qp.ineq_rhs(&DVector::zeros(n));
    let cols = ng + n + 1;
    let t = ng + n;

    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..subset.n_rows() {
        let mut row = vec![0.0; cols];
        for c in 0..n {
            row[ng + c] = subset.r_mat[(i, c)];
        }
        row[t] = 1.0;
        rows.push((row, subset.r_vec[i]));
    }
    for j in 0..qp.n_ineq() {
        let mut row = vec![0.0; cols];
        for k in 0..ng {
            row[k] = a[(j, k)];
        }
        for c in 0..n {
            row[ng + c] = -b_jac[(j, c)];
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if qp.pinned_pair(j).is_none() && norm > 0.0 {
            row[t] = norm;
        }
        rows.push((row, b_fixed[j]));
    }
    // balance as two inequalities
    let mut bal = vec![0.0; cols];
    bal[..ng].fill(1.0);
    bal[ng..ng + n].fill(-1.0);
    rows.push((bal.clone(), 0.0));
    rows.push((bal.iter().map(|v| -v).collect(), 0.0));
    let mut cap = vec![0.0; cols];
    cap[t] = 1.0;
    rows.push((cap, MARGIN_CAP));

    let a_lp = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i].0[j]);
    let b_lp = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let mut c = DVector::zeros(cols);
    c[t] = 1.0;
    match lp::maximize(&c, &a_lp, &b_lp) {
        LpOutcome::Optimal { z, .. } if z[t] >= -FEAS_TOL => {
            Some((z.rows(ng, n).into_owned(), z[t]))
        }
        _ => None,
    }
}

/// A load in `subset` with feasible dispatch, if one exists.
pub fn find_feasible_load(qp: &SCEDQp, subset: &Polytope) -> Option<DVector<f64>> {
    feasible_load_with_margin(qp, subset).map(|(l, _)| l)
}

/// Splits each piece minus the interior of `b` into the pieces
/// `{c_1 <= 0, …, c_{k−1} <= 0, c_k >= 0}` over the rows of `b` that cut it.
/// Pieces whose Chebyshev radius does not exceed `min_radius` are dropped.
pub fn partition_complement(
    remaining: &[Polytope],
    b: &Polytope,
    min_radius: f64,
) -> Vec<Polytope> {
    let mut out = Vec::new();
    let Some(b) = b.normalized() else {
        return remaining.to_vec();
    };
    for piece in remaining {
        let cuts: Vec<usize> = (0..b.n_rows())
            .filter(|&i| match piece.support(&b.row(i)) {
                Some(v) => v > b.r_vec[i] + FEAS_TOL,
                None => true,
            })
            .collect();
        let mut acc = piece.clone();
        for &i in &cuts {
            let row = b.row(i);
            let mut part = acc.clone();
            part.push_row(&(-&row), -b.r_vec[i]);
            if matches!(part.chebyshev(), Some((_, r)) if r > min_radius) {
                if let Ok(p) = part.minimize_representation() {
                    out.push(p);
                }
            }
            acc.push_row(&row, b.r_vec[i]);
        }
    }
    out
}

/// Upper bound on distinct active sets: subsets of the non-pinned rows with
/// at most as many members as there are generators, times ten.
pub fn default_iteration_cap(qp: &SCEDQp) -> usize {
    let m = (0..qp.n_ineq())
        .filter(|&j| qp.pinned_pair(j).is_none())
        .count();
    let kmax = qp.n_gens().min(m);
    let mut total = 0.0f64;
    let mut binom = 1.0f64;
    for k in 0..=kmax {
        if k > 0 {
            binom = binom * (m - k + 1) as f64 / k as f64;
        }
        total += binom;
        if total > 1e6 {
            break;
        }
    }
    (10.0 * total.min(1e6)) as usize
}

#[derive(Debug, Default, Clone)]
struct Tally {
    iterations: usize,
    degenerate_skipped: usize,
    infeasible_pieces: usize,
}

fn region_at(
    qp: &SCEDQp,
    l: &DVector<f64>,
    load_set: &Polytope,
    opts: &ExploreOptions,
) -> Result<Option<CriticalRegion>> {
    let qp_opts = QpOptions {
        eps_active: opts.eps_active,
        ..Default::default()
    };
    let res = match qp.dispatch_with(l, &qp_opts) {
        Ok(r) => r,
        Err(Error::DispatchInfeasible) => return Ok(None),
        Err(e) => return Err(e),
    };
    let piece = match sensitivity(qp, &res) {
        Ok(p) => p,
        Err(Error::Degenerate(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    match build_region(piece, qp, load_set, opts.min_radius) {
        Ok(cr) => Ok(Some(cr)),
        Err(Error::RegionEmpty) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Enumerates critical regions covering the dispatch-feasible part of
/// `load_set`. The result is not unified.
pub fn explore(qp: &SCEDQp, load_set: &Polytope, opts: &ExploreOptions) -> Result<Policy> {
    let n = qp.n_nodes();
    if load_set.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "load set has dimension {}, case has {n} nodes",
            load_set.dim()
        )));
    }
    let cap = opts
        .iteration_cap
        .unwrap_or_else(|| default_iteration_cap(qp));
    let load_set = load_set.minimize_representation()?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut regions: Vec<CriticalRegion> = Vec::new();
    let mut frontier = vec![load_set.clone()];
    let mut tally = Tally::default();

    while let Some(piece) = frontier.pop() {
        if tally.iterations >= cap {
            return Err(Error::ExplorationCap {
                cap,
                frontier: frontier.len() + 1,
            });
        }
        tally.iterations += 1;
        let Some((l, margin)) = feasible_load_with_margin(qp, &piece) else {
            tally.infeasible_pieces += 1;
            continue;
        };
        if margin <= opts.min_radius {
            tally.infeasible_pieces += 1;
            continue;
        }

        let mut found = region_at(qp, &l, &load_set, opts)?;
        let mut tries = 0;
        while found.is_none() && tries < opts.perturb_tries {
            tries += 1;
            let step = opts.perturb_scale.min(0.5 * margin);
            let dir = DVector::<f64>::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let norm = dir.norm();
            if norm == 0.0 {
                continue;
            }
            let trial = &l + dir * (step / norm);
            if piece.contains(&trial, 0.0) {
                found = region_at(qp, &trial, &load_set, opts)?;
            }
        }
        let Some(cr) = found else {
            tally.degenerate_skipped += 1;
            continue;
        };

        let idx = match regions
            .iter()
            .position(|r| r.piece.active_set == cr.piece.active_set)
        {
            Some(i) => i,
            None => {
                regions.push(cr);
                regions.len() - 1
            }
        };
        let rest = partition_complement(
            std::slice::from_ref(&piece),
            &regions[idx].region,
            opts.min_radius,
        );
        // reversed so the first split is explored first
        frontier.extend(rest.into_iter().rev());
    }

    // canonical order: lexicographic by Chebyshev center
    let mut keyed: Vec<(DVector<f64>, CriticalRegion)> = regions
        .into_iter()
        .map(|r| {
            (
                r.region
                    .chebyshev()
                    .map_or_else(|| DVector::zeros(n), |c| c.0),
                r,
            )
        })
        .collect();
    keyed.sort_by(|a, b| {
        a.0.iter()
            .zip(b.0.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let regions = keyed.into_iter().map(|(_, r)| r).collect();

    let meta = PolicyMeta::new(
        qp,
        opts,
        tally.iterations,
        tally.degenerate_skipped,
        tally.infeasible_pieces,
    );
    Ok(Policy::new(qp.clone(), load_set, regions, meta))
}
