//! Targeting over all regions of a policy.

use nalgebra::DVector;
use rayon::prelude::*;

use super::region_qp::{RegionProblem, RegionSolution, ZERO_X};
use super::spec::{Mode, SolveStats, TargetingPlan, TargetingSpec};
use crate::error::{Error, Result};
use crate::mpqp::Policy;

/// Per-region outcome, kept in region order.
struct RegionOutcome {
    relaxation_solved: bool,
    screened_out: bool,
    miqp_solved: bool,
    bb_nodes: usize,
    solution: Option<RegionSolution>,
}

fn run_regions<F>(
    policy: &Policy,
    spec: &TargetingSpec,
    per_region: F,
) -> Result<(Vec<RegionOutcome>, SolveStats)>
where
    F: Fn(&RegionProblem) -> Result<RegionOutcome> + Sync,
{
    spec.validate(policy.qp.n_nodes())?;
    let outcomes = policy
        .regions
        .par_iter()
        .map(|cr| per_region(&RegionProblem::new(cr, spec)))
        .collect::<Result<Vec<_>>>()?;
    let stats = SolveStats {
        regions: outcomes.len(),
        relaxations_solved: outcomes.iter().filter(|o| o.relaxation_solved).count(),
        regions_screened_out: outcomes.iter().filter(|o| o.screened_out).count(),
        miqps_solved: outcomes.iter().filter(|o| o.miqp_solved).count(),
        bb_nodes: outcomes.iter().map(|o| o.bb_nodes).sum(),
    };
    Ok((outcomes, stats))
}

/// Lowest objective wins; ties go to the lowest region index.
fn best(outcomes: &[RegionOutcome]) -> Option<(usize, &RegionSolution)> {
    outcomes
        .iter()
        .enumerate()
        .filter_map(|(m, o)| o.solution.as_ref().map(|s| (m, s)))
        .min_by(|a, b| a.1.objective.total_cmp(&b.1.objective).then(a.0.cmp(&b.0)))
}

fn finish(
    policy: &Policy,
    spec: &TargetingSpec,
    outcomes: &[RegionOutcome],
    stats: SolveStats,
) -> Result<TargetingPlan> {
    let (m, sol) = best(outcomes).ok_or(Error::DrInfeasible)?;
    Ok(build_plan(policy, spec, m, &sol.x, stats))
}

/// Assembles a plan from a reduction vector chosen in region `m`.
pub fn build_plan(
    policy: &Policy,
    spec: &TargetingSpec,
    m: usize,
    x: &DVector<f64>,
    stats: SolveStats,
) -> TargetingPlan {
    let x = x.map(|v| if v.abs() <= ZERO_X { 0.0 } else { v });
    let region = &policy.regions[m];
    let problem = RegionProblem::new(region, spec);
    let l_hat = &spec.l0 - &x;
    let lmp_after = region.piece.lmp_at(&l_hat);
    let lmp_before = match policy.evaluate(&spec.l0) {
        Ok(e) => e.lambda,
        Err(_) => policy
            .qp
            .dispatch(&spec.l0)
            .map(|d| d.lambda)
            .unwrap_or_else(|_| DVector::from_element(spec.n(), f64::NAN)),
    };
    let weight_term = if spec.uses_weight() {
        spec.weight.dot(&x)
    } else {
        0.0
    };
    let price_term = problem.price_term(&x);
    TargetingPlan {
        nodes: policy.qp.case.nodes.clone(),
        mode: spec.mode,
        lambda_ref: spec.lambda_ref,
        k: spec.k,
        v: x.iter().map(|&xi| u8::from(xi != 0.0)).collect(),
        x: x.iter().copied().collect(),
        l0: spec.l0.iter().copied().collect(),
        l_hat: l_hat.iter().copied().collect(),
        region: m,
        avg_lmp_before: lmp_before.mean(),
        lmp_before: lmp_before.iter().copied().collect(),
        avg_lmp_after: lmp_after.mean(),
        lmp_after: lmp_after.iter().copied().collect(),
        objective: price_term + weight_term,
        price_term,
        weight_term,
        stats,
    }
}

/// Screens each region with its continuous relaxation and solves the
/// mixed-integer problem only where the relaxation is feasible.
pub fn solve_targeting(policy: &Policy, spec: &TargetingSpec) -> Result<TargetingPlan> {
    let (outcomes, stats) = run_regions(policy, spec, |rp| {
        if rp.relaxation()?.is_none() {
            return Ok(RegionOutcome {
                relaxation_solved: true,
                screened_out: true,
                miqp_solved: false,
                bb_nodes: 0,
                solution: None,
            });
        }
        let (solution, bb_nodes) = rp.miqp()?;
        Ok(RegionOutcome {
            relaxation_solved: true,
            screened_out: false,
            miqp_solved: true,
            bb_nodes,
            solution,
        })
    })?;
    finish(policy, spec, &outcomes, stats)
}

/// Solves the mixed-integer problem in every region without screening.
pub fn solve_targeting_unscreened(policy: &Policy, spec: &TargetingSpec) -> Result<TargetingPlan> {
    let (outcomes, stats) = run_regions(policy, spec, |rp| {
        let (solution, bb_nodes) = rp.miqp()?;
        Ok(RegionOutcome {
            relaxation_solved: false,
            screened_out: false,
            miqp_solved: true,
            bb_nodes,
            solution,
        })
    })?;
    finish(policy, spec, &outcomes, stats)
}

/// Load shifting: targeting with zero net change in total load.
pub fn solve_shifting(policy: &Policy, spec: &TargetingSpec) -> Result<TargetingPlan> {
    if spec.mode != Mode::Shift {
        return Err(Error::spec("mode", "load shifting requires mode `shift`"));
    }
    solve_targeting(policy, spec)
}

/// The K nodes with the highest LMP at `l0` (ties to the lowest index).
pub fn highest_lmp_nodes(policy: &Policy, spec: &TargetingSpec) -> Result<Vec<usize>> {
    let lambda = match policy.evaluate(&spec.l0) {
        Ok(e) => e.lambda,
        Err(Error::Uncovered { .. }) => policy.qp.dispatch(&spec.l0)?.lambda,
        Err(e) => return Err(e),
    };
    let mut order: Vec<usize> = (0..lambda.len()).collect();
    order.sort_by(|&a, &b| lambda[b].total_cmp(&lambda[a]).then(a.cmp(&b)));
    order.truncate(spec.k);
    order.sort_unstable();
    Ok(order)
}

/// Baseline that targets the K highest-LMP nodes and only optimizes the
/// reductions there.
pub fn solve_heuristic(policy: &Policy, spec: &TargetingSpec) -> Result<TargetingPlan> {
    let targeted = highest_lmp_nodes(policy, spec)?;
    let (outcomes, stats) = run_regions(policy, spec, |rp| {
        Ok(RegionOutcome {
            relaxation_solved: false,
            screened_out: false,
            miqp_solved: false,
            bb_nodes: 0,
            solution: rp.fixed(&targeted)?,
        })
    })?;
    finish(policy, spec, &outcomes, stats)
}
