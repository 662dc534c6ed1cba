//! File formats and output plumbing shared by the subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use drt_core::mpqp::policy::case_hash;
use drt_core::mpqp::Policy;
use drt_core::netmodel::{load_case, load_case_with, CaseOptions, NetworkCase};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCENARIO_FORMAT: &str = "drt-scenarios/1";

/// Load scenarios as written by `drt scenarios`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub format: String,
    pub nodes: Vec<String>,
    pub seed: u64,
    pub sigma: f64,
    pub loads: Vec<Vec<f64>>,
}

impl ScenarioFile {
    pub fn read(path: &Path, case: &NetworkCase) -> Result<Vec<DVector<f64>>> {
        let file: ScenarioFile = read_json(path)?;
        if file.format != SCENARIO_FORMAT {
            bail!(
                "{}: unsupported scenario format `{}`",
                path.display(),
                file.format
            );
        }
        if file.nodes != case.nodes {
            bail!("{}: node list does not match the case", path.display());
        }
        file.loads
            .into_iter()
            .enumerate()
            .map(|(s, l)| {
                if l.len() != case.n_nodes() {
                    bail!(
                        "{}: scenario {s} has {} entries, expected {}",
                        path.display(),
                        l.len(),
                        case.n_nodes()
                    );
                }
                Ok(DVector::from_vec(l))
            })
            .collect()
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}

/// Writes `bytes` to `out` through a temporary file in the same directory,
/// or to stdout when no path is given.
pub fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    let Some(path) = out else {
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(bytes)?;
        return Ok(stdout.flush()?);
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)
        .with_context(|| format!("cannot create a file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_output(out, text.as_bytes())
}

pub fn open_case(path: &Path) -> Result<NetworkCase> {
    Ok(load_case(path)?)
}

/// Loads `--policy` and checks it was built from `case_path`. Without a case
/// path the policy's own case is used.
pub fn open_policy(policy_path: &Path, case_path: Option<&Path>) -> Result<Policy> {
    let policy = Policy::load(policy_path)?;
    if let Some(case_path) = case_path {
        let case = load_case_with(
            case_path,
            CaseOptions {
                missing_gen_a: policy.qp.case.missing_gen_a(),
            },
        )?;
        if case_hash(&case) != policy.meta.case_hash {
            bail!(
                "{} was not built from {}",
                policy_path.display(),
                case_path.display()
            );
        }
    }
    Ok(policy)
}

/// A per-node vector from a JSON file. Accepted shapes: an array of numbers
/// in node order, an object keyed by node id, or an array of
/// `{"node": id, "mw": value}` records. With `missing = Some(v)` nodes absent
/// from the keyed forms take `v`; otherwise every node must be present.
pub fn read_node_vector(
    path: &Path,
    case: &NetworkCase,
    missing: Option<f64>,
) -> Result<DVector<f64>> {
    let value: Value = read_json(path)?;
    let n = case.n_nodes();
    let ctx = || path.display().to_string();
    let number = |v: &Value, what: &str| -> Result<f64> {
        v.as_f64()
            .filter(|x| x.is_finite())
            .with_context(|| format!("{}: {what} is not a finite number", ctx()))
    };
    let mut out = vec![None; n];
    let mut set = |id: &str, v: f64| -> Result<()> {
        let i = case
            .node_index(id)
            .with_context(|| format!("{}: unknown node `{id}`", ctx()))?;
        if out[i].replace(v).is_some() {
            bail!("{}: duplicate entry for node `{id}`", ctx());
        }
        Ok(())
    };
    match &value {
        Value::Array(items) if items.iter().all(Value::is_number) => {
            if items.len() != n {
                bail!("{}: {} entries, expected {n}", ctx(), items.len());
            }
            let v: Result<Vec<f64>> = items
                .iter()
                .enumerate()
                .map(|(i, x)| number(x, &format!("entry {i}")))
                .collect();
            return Ok(DVector::from_vec(v?));
        }
        Value::Array(items) => {
            for (k, item) in items.iter().enumerate() {
                let id = item
                    .get("node")
                    .and_then(Value::as_str)
                    .with_context(|| format!("{}: entry {k} has no `node`", ctx()))?;
                let v = item
                    .get("mw")
                    .with_context(|| format!("{}: entry {k} has no `mw`", ctx()))?;
                set(id, number(v, &format!("entry {k}"))?)?;
            }
        }
        Value::Object(map) => {
            for (id, v) in map {
                set(id, number(v, &format!("node `{id}`"))?)?;
            }
        }
        _ => bail!("{}: expected an array or an object", ctx()),
    }
    out.iter()
        .enumerate()
        .map(|(i, v)| {
            v.or(missing)
                .with_context(|| format!("{}: no value for node `{}`", ctx(), case.nodes[i]))
        })
        .collect::<Result<Vec<_>>>()
        .map(DVector::from_vec)
}

/// `--load`: `base` or a file.
pub fn read_load(arg: &str, case: &NetworkCase) -> Result<DVector<f64>> {
    if arg == "base" {
        return Ok(case.base_load.clone());
    }
    read_node_vector(Path::new(arg), case, Some(0.0))
}

/// `--weight`: one number for every node, or a file.
pub fn read_weight(arg: &str, case: &NetworkCase) -> Result<DVector<f64>> {
    match arg.parse::<f64>() {
        Ok(w) => Ok(DVector::from_element(case.n_nodes(), w)),
        Err(_) => read_node_vector(Path::new(arg), case, None),
    }
}

/// `--xbar`: either a fraction of the load at each node or absolute values
/// from a file.
#[derive(Debug, Clone)]
pub enum Xbar {
    Fraction(f64),
    Values(DVector<f64>),
}

impl Xbar {
    pub fn parse(arg: &str, case: &NetworkCase) -> Result<Self> {
        match arg.parse::<f64>() {
            Ok(f) if (0.0..=1.0).contains(&f) => Ok(Xbar::Fraction(f)),
            Ok(f) => bail!("--xbar fraction {f} must lie in [0, 1]"),
            Err(_) => Ok(Xbar::Values(read_node_vector(Path::new(arg), case, None)?)),
        }
    }

    pub fn at(&self, l0: &DVector<f64>) -> DVector<f64> {
        match self {
            Xbar::Fraction(f) => l0 * *f,
            Xbar::Values(v) => v.clone(),
        }
    }
}
