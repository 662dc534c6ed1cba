//! Subcommand handlers and exit-status mapping.

use std::fmt;

use anyhow::Result;
use drt_core::mpqp::{build_policy, coverage_check, load_box, ExploreOptions, Policy};
use drt_core::netmodel::{build_shift_factors, NetworkCase};
use drt_core::qpcore::QpOptions;
use drt_core::sced::{assemble, SCEDQp};
use drt_core::targeting::{
    oracle_targeting, perturb_scenarios, solve_shifting, solve_targeting, Mode, TargetingPlan,
    TargetingSpec,
};
use drt_core::Error;
use nalgebra::DVector;
use serde::Serialize;

use crate::io::{
    open_case, open_policy, read_json, read_load, read_weight, write_json, write_output,
    ScenarioFile, Xbar, SCENARIO_FORMAT,
};
use crate::{
    EvalArgs, ModeArg, PolicyArgs, ReportArgs, ScedArgs, ScenarioArgs, TargetArgs, TargetingArgs,
};

/// A problem-level failure reported by the CLI itself.
#[derive(Debug)]
pub struct DomainFailure(pub String);

impl fmt::Display for DomainFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DomainFailure {}

fn is_input_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Io { .. }
            | Error::Parse(_)
            | Error::InvalidCase { .. }
            | Error::Disconnected(_)
            | Error::SingularSusceptance
            | Error::DimensionMismatch(_)
            | Error::NotPositiveDefinite
            | Error::NotPositiveSemidefinite
            | Error::NotSymmetric(_)
            | Error::InvalidSpec { .. }
            | Error::OracleTooLarge(_)
    )
}

/// 1 for infeasible problems and failed computations, 2 for bad input.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<DomainFailure>().is_some() {
            return 1;
        }
        if let Some(core) = cause.downcast_ref::<Error>() {
            return if is_input_error(core) { 2 } else { 1 };
        }
    }
    2
}

pub fn build_qp(case: &NetworkCase) -> Result<SCEDQp> {
    Ok(assemble(case, &build_shift_factors(case)?)?)
}

pub fn sced(a: &ScedArgs) -> Result<()> {
    let case = open_case(&a.case)?;
    let qp = build_qp(&case)?;
    let l = read_load(&a.load, &case)?;
    let opts = QpOptions {
        eps_active: a.eps_act,
        ..QpOptions::default()
    };
    let dispatch = qp.dispatch_with(&l, &opts)?;
    write_json(a.out.as_deref(), &dispatch.report(&qp))
}

pub fn policy(a: &PolicyArgs) -> Result<()> {
    let case_path = a.case.as_deref().expect("clap enforces --case");
    let qp = build_qp(&open_case(case_path)?)?;
    let opts = ExploreOptions {
        min_radius: a.min_radius,
        eps_active: a.eps_act,
        seed: a.seed,
        ..ExploreOptions::default()
    };
    let policy = build_policy(&qp, &load_box(&qp), &opts)?;
    if a.coverage_samples > 0 {
        let rep = coverage_check(&policy, a.coverage_samples, a.seed)?;
        eprintln!(
            "coverage: {}/{} samples matched, {} uncovered, max |dλ| {:.3e}",
            rep.matched, rep.samples, rep.uncovered, rep.max_error
        );
        if !rep.all_matched() {
            return Err(DomainFailure(format!(
                "policy disagrees with dispatch at {} of {} samples",
                rep.samples - rep.matched,
                rep.samples
            ))
            .into());
        }
    }
    let mut text = policy.to_json();
    text.push('\n');
    write_output(a.out.as_deref(), text.as_bytes())
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    nodes: &'a [String],
    load: Vec<f64>,
    region: usize,
    lambda: Vec<f64>,
}

pub fn policy_eval(a: &EvalArgs) -> Result<()> {
    let policy = open_policy(&a.policy, None)?;
    let l = read_load(&a.load, &policy.qp.case)?;
    let eval = policy.evaluate(&l)?;
    write_json(
        a.out.as_deref(),
        &EvalOutput {
            nodes: &policy.qp.case.nodes,
            load: l.iter().copied().collect(),
            region: eval.region,
            lambda: eval.lambda.iter().copied().collect(),
        },
    )
}

/// The policy named by `--policy`, or one built from `--case`.
pub fn policy_for(t: &TargetingArgs) -> Result<Policy> {
    match &t.policy {
        Some(path) => open_policy(path, Some(&t.case)),
        None => {
            let qp = build_qp(&open_case(&t.case)?)?;
            Ok(build_policy(
                &qp,
                &load_box(&qp),
                &ExploreOptions::default(),
            )?)
        }
    }
}

pub fn targeting_spec(
    t: &TargetingArgs,
    case: &NetworkCase,
    l0: DVector<f64>,
    mode: Mode,
) -> Result<TargetingSpec> {
    let xbar = Xbar::parse(&t.xbar, case)?.at(&l0);
    Ok(TargetingSpec {
        lambda_ref: t.lambda_ref,
        k: t.k,
        weight: read_weight(&t.weight, case)?,
        xbar,
        l0,
        mode,
        shift_linear_term: t.with_linear_term,
    })
}

pub fn mode_of(t: &TargetingArgs) -> Mode {
    match t.mode {
        Some(ModeArg::Shift) => Mode::Shift,
        Some(ModeArg::Reduce) | None => Mode::Reduce,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Proposed,
    Shift,
    Oracle,
}

pub fn target(a: &TargetArgs, solver: Solver) -> Result<()> {
    let policy = policy_for(&a.targeting)?;
    let case = &policy.qp.case;
    let l0 = read_load(&a.load, case)?;
    let mode = match solver {
        Solver::Shift => Mode::Shift,
        _ => mode_of(&a.targeting),
    };
    let spec = targeting_spec(&a.targeting, case, l0, mode)?;
    let plan = match solver {
        Solver::Proposed => solve_targeting(&policy, &spec)?,
        Solver::Shift => solve_shifting(&policy, &spec)?,
        Solver::Oracle => oracle_targeting(&policy, &spec)?,
    };
    write_json(a.out.as_deref(), &plan)
}

pub fn scenarios(a: &ScenarioArgs) -> Result<()> {
    let case = open_case(&a.case)?;
    let l0 = read_load(&a.load, &case)?;
    let loads = perturb_scenarios(&l0, &case.load_lo, &case.load_hi, a.seed, a.count, a.sigma)?;
    write_json(
        a.out.as_deref(),
        &ScenarioFile {
            format: SCENARIO_FORMAT.to_string(),
            nodes: case.nodes.clone(),
            seed: a.seed,
            sigma: a.sigma,
            loads: loads.iter().map(|l| l.iter().copied().collect()).collect(),
        },
    )
}

pub fn report(a: &ReportArgs) -> Result<()> {
    let plan: TargetingPlan = read_json(&a.plan)?;
    let n = plan.nodes.len();
    for (name, len) in [
        ("l0", plan.l0.len()),
        ("x", plan.x.len()),
        ("l_hat", plan.l_hat.len()),
        ("lmp_before", plan.lmp_before.len()),
        ("lmp_after", plan.lmp_after.len()),
    ] {
        anyhow::ensure!(
            len == n,
            "{}: `{name}` has {len} entries, expected {n}",
            a.plan.display()
        );
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["node", "l0", "x", "l_hat", "lmp_before", "lmp_after"])?;
    for i in 0..n {
        w.write_record([
            plan.nodes[i].clone(),
            plan.l0[i].to_string(),
            plan.x[i].to_string(),
            plan.l_hat[i].to_string(),
            plan.lmp_before[i].to_string(),
            plan.lmp_after[i].to_string(),
        ])?;
    }
    write_output(a.out.as_deref(), &w.into_inner()?)
}
