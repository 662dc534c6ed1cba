//! Scenario sweeps: targeting at each perturbed load, one CSV row each.
//!
//! Rows whose targeting problem is infeasible show `-` in every result
//! column.

use anyhow::Result;
use drt_core::targeting::{
    perturb_scenarios, solve_heuristic, solve_shifting, solve_targeting, Mode, TargetingPlan,
};
use nalgebra::DVector;

use crate::commands::{mode_of, policy_for, targeting_spec};
use crate::io::{read_load, write_output, ScenarioFile, Xbar};
use crate::ExperimentArgs;

const MISSING: &str = "-";

fn plan_columns(plan: Option<&TargetingPlan>) -> Vec<String> {
    match plan {
        Some(p) => {
            let targeted: Vec<&str> = p.targeted().iter().map(|&i| p.nodes[i].as_str()).collect();
            vec![
                p.total_reduction().to_string(),
                p.avg_lmp_after.to_string(),
                p.objective.to_string(),
                targeted.join(";"),
            ]
        }
        None => vec![MISSING.to_string(); 4],
    }
}

/// `Ok(None)` when the plan is infeasible for this scenario.
fn feasible(result: drt_core::Result<TargetingPlan>) -> Result<Option<TargetingPlan>> {
    match result {
        Ok(p) => Ok(Some(p)),
        Err(e) if e.is_domain_infeasibility() => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn run(a: &ExperimentArgs) -> Result<()> {
    let t = &a.targeting;
    let policy = policy_for(t)?;
    let case = &policy.qp.case;
    let loads = match &a.scenarios {
        Some(path) => ScenarioFile::read(path, case)?,
        None => {
            let center = read_load(&a.load, case)?;
            perturb_scenarios(
                &center,
                &case.load_lo,
                &case.load_hi,
                a.seed,
                a.count,
                a.sigma,
            )?
        }
    };
    let mode = mode_of(t);
    let xbar = Xbar::parse(&t.xbar, case)?;

    let mut header = vec![
        "scenario",
        "feasible",
        "avg_lmp_before",
        "total_reduction",
        "avg_lmp_after",
        "objective",
        "targeted",
    ];
    if a.compare_heuristic {
        header.extend([
            "heuristic_total_reduction",
            "heuristic_avg_lmp_after",
            "heuristic_objective",
            "heuristic_targeted",
        ]);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;

    for (s, l0) in loads.into_iter().enumerate() {
        let mut spec = targeting_spec(t, case, l0.clone(), mode)?;
        // a file-given bound may exceed a perturbed load
        spec.xbar = DVector::from_fn(l0.len(), |i, _| xbar.at(&l0)[i].min(l0[i]).max(0.0));
        let plan = feasible(match mode {
            Mode::Reduce => solve_targeting(&policy, &spec),
            Mode::Shift => solve_shifting(&policy, &spec),
        })?;
        let before = match &plan {
            Some(p) => p.avg_lmp_before.to_string(),
            None => policy
                .qp
                .dispatch(&l0)
                .map_or_else(|_| MISSING.to_string(), |d| d.lambda.mean().to_string()),
        };
        let mut row = vec![s.to_string(), plan.is_some().to_string(), before];
        row.extend(plan_columns(plan.as_ref()));
        if a.compare_heuristic {
            let heur = feasible(solve_heuristic(&policy, &spec))?;
            row.extend(plan_columns(heur.as_ref()));
        }
        w.write_record(&row)?;
    }
    write_output(a.out.as_deref(), &w.into_inner()?)
}
