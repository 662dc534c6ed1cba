//! Network cases: the JSON schema, validation, and DC shift factors.
//!
//! Node order in the case file fixes every vector and matrix ordering used
//! downstream. Generators keep file order; a node may host several. Nodes
//! without any generator get a pinned synthetic unit (`pmin = pmax = 0`)
//! with a small positive quadratic coefficient so the dispatch Hessian stays
//! positive definite. Synthetic units follow the real ones, in node order.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quadratic coefficient given to synthetic generators at load-only nodes.
pub const DEFAULT_MISSING_GEN_A: f64 = 1e-4;

/// On-disk case schema. Field names are part of the external interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseFile {
    pub nodes: Vec<String>,
    pub slack: String,
    #[serde(default)]
    pub lines: Vec<LineRecord>,
    #[serde(default)]
    pub generators: Vec<GeneratorRecord>,
    #[serde(default)]
    pub base_load: Vec<LoadRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub load_box: Vec<LoadBoxRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineRecord {
    pub from: String,
    pub to: String,
    pub x: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRecord {
    pub node: String,
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub pmin: f64,
    pub pmax: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadRecord {
    pub node: String,
    pub mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadBoxRecord {
    pub node: String,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Series reactance in p.u.
    pub x: f64,
    /// Thermal limit in MW, applied in both directions.
    pub limit: f64,
}

/// Quadratic cost `½·a·P² + b·P + c` with output limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generator {
    /// Index of the hosting node.
    pub node: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub pmin: f64,
    pub pmax: f64,
    /// Added for a node that had no generator in the case file.
    pub synthetic: bool,
}

impl Generator {
    pub fn is_pinned(&self) -> bool {
        self.pmin == self.pmax
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CaseOptions {
    pub missing_gen_a: f64,
}

impl Default for CaseOptions {
    fn default() -> Self {
        CaseOptions {
            missing_gen_a: DEFAULT_MISSING_GEN_A,
        }
    }
}

/// A validated network. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCase {
    pub nodes: Vec<String>,
    pub slack: usize,
    pub lines: Vec<Line>,
    /// Case-file generators followed by synthetic ones; every node hosts at
    /// least one.
    pub generators: Vec<Generator>,
    pub base_load: DVector<f64>,
    pub load_lo: DVector<f64>,
    pub load_hi: DVector<f64>,
}

pub fn load_case(path: impl AsRef<Path>) -> Result<NetworkCase> {
    load_case_with(path, CaseOptions::default())
}

pub fn load_case_with(path: impl AsRef<Path>, opts: CaseOptions) -> Result<NetworkCase> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: CaseFile = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    NetworkCase::from_file(&file, opts)
}

impl NetworkCase {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn n_generators(&self) -> usize {
        self.generators.len()
    }

    /// Node-by-generator incidence: column `k` is the unit vector of the
    /// node hosting generator `k`.
    pub fn gen_incidence(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.n_nodes(), self.n_generators());
        for (k, gen) in self.generators.iter().enumerate() {
            g[(gen.node, k)] = 1.0;
        }
        g
    }

    /// Nodal injections produced by a generator dispatch.
    pub fn nodal_generation(&self, p: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_nodes());
        for (k, gen) in self.generators.iter().enumerate() {
            out[gen.node] += p[k];
        }
        out
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == id)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: CaseFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        NetworkCase::from_file(&file, CaseOptions::default())
    }

    pub fn from_file(file: &CaseFile, opts: CaseOptions) -> Result<Self> {
        if file.nodes.is_empty() {
            return Err(Error::case("nodes", "at least one node is required"));
        }
        if opts.missing_gen_a.is_nan() || opts.missing_gen_a <= 0.0 {
            return Err(Error::case("missing_gen_a", "Q not positive definite"));
        }
        let mut index = HashMap::with_capacity(file.nodes.len());
        for (i, id) in file.nodes.iter().enumerate() {
            if index.insert(id.as_str(), i).is_some() {
                return Err(Error::case("nodes", format!("duplicate node id `{id}`")));
            }
        }
        let lookup = |field: String, id: &str| -> Result<usize> {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::case(field, format!("unknown node `{id}`")))
        };
        let n = file.nodes.len();
        let slack = lookup("slack".into(), &file.slack)?;

        let mut lines = Vec::with_capacity(file.lines.len());
        for (k, rec) in file.lines.iter().enumerate() {
            let from = lookup(format!("lines[{k}].from"), &rec.from)?;
            let to = lookup(format!("lines[{k}].to"), &rec.to)?;
            if from == to {
                return Err(Error::case(
                    format!("lines[{k}]"),
                    "line connects a node to itself",
                ));
            }
            if !rec.x.is_finite() || rec.x <= 0.0 {
                return Err(Error::case(
                    format!("lines[{k}].x"),
                    "reactance must be > 0",
                ));
            }
            if !rec.limit.is_finite() || rec.limit <= 0.0 {
                return Err(Error::case(
                    format!("lines[{k}].limit"),
                    "flow limit must be > 0",
                ));
            }
            lines.push(Line {
                from,
                to,
                x: rec.x,
                limit: rec.limit,
            });
        }

        let mut generators = Vec::with_capacity(file.generators.len() + n);
        let mut hosted = vec![false; n];
        for (k, rec) in file.generators.iter().enumerate() {
            let i = lookup(format!("generators[{k}].node"), &rec.node)?;
            hosted[i] = true;
            for (name, v) in [
                ("a", rec.a),
                ("b", rec.b),
                ("c", rec.c),
                ("pmin", rec.pmin),
                ("pmax", rec.pmax),
            ] {
                if !v.is_finite() {
                    return Err(Error::case(
                        format!("generators[{k}].{name}"),
                        "must be finite",
                    ));
                }
            }
            if rec.a.is_nan() || rec.a <= 0.0 {
                return Err(Error::case(
                    format!("generators[{k}].a"),
                    "Q not positive definite",
                ));
            }
            if rec.pmin > rec.pmax {
                return Err(Error::case(
                    format!("generators[{k}].pmin"),
                    "pmin exceeds pmax",
                ));
            }
            generators.push(Generator {
                node: i,
                a: rec.a,
                b: rec.b,
                c: rec.c,
                pmin: rec.pmin,
                pmax: rec.pmax,
                synthetic: false,
            });
        }
        for (i, _) in hosted.iter().enumerate().filter(|(_, h)| !**h) {
            generators.push(Generator {
                node: i,
                a: opts.missing_gen_a,
                b: 0.0,
                c: 0.0,
                pmin: 0.0,
                pmax: 0.0,
                synthetic: true,
            });
        }

        let mut base_load = DVector::zeros(n);
        let mut seen = vec![false; n];
        for (k, rec) in file.base_load.iter().enumerate() {
            let i = lookup(format!("base_load[{k}].node"), &rec.node)?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::case(
                    format!("base_load[{k}].node"),
                    "duplicate entry",
                ));
            }
            if !rec.mw.is_finite() {
                return Err(Error::case(format!("base_load[{k}].mw"), "must be finite"));
            }
            base_load[i] = rec.mw;
        }

        let mut load_lo = base_load.map(|l| (2.0 * l).min(0.0));
        let mut load_hi = base_load.map(|l| (2.0 * l).max(0.0));
        let mut seen = vec![false; n];
        for (k, rec) in file.load_box.iter().enumerate() {
            let i = lookup(format!("load_box[{k}].node"), &rec.node)?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::case(
                    format!("load_box[{k}].node"),
                    "duplicate entry",
                ));
            }
            load_lo[i] = rec.lo;
            load_hi[i] = rec.hi;
        }
        for i in 0..n {
            if !(load_lo[i] <= base_load[i] && base_load[i] <= load_hi[i]) {
                return Err(Error::case(
                    format!("load_box[{}]", file.nodes[i]),
                    format!(
                        "base load {} outside [{}, {}]",
                        base_load[i], load_lo[i], load_hi[i]
                    ),
                ));
            }
        }

        let case = NetworkCase {
            nodes: file.nodes.clone(),
            slack,
            lines,
            generators,
            base_load,
            load_lo,
            load_hi,
        };
        case.check_connected()?;
        Ok(case)
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.n_nodes();
        let mut adj = vec![Vec::new(); n];
        for line in &self.lines {
            adj[line.from].push(line.to);
            adj[line.to].push(line.from);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([self.slack]);
        seen[self.slack] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(i) => Err(Error::Disconnected(self.nodes[i].clone())),
            None => Ok(()),
        }
    }

    /// Serializes back to the file schema. Synthetic generators are omitted
    /// so that a round trip reproduces the same case.
    pub fn to_case_file(&self) -> CaseFile {
        CaseFile {
            nodes: self.nodes.clone(),
            slack: self.nodes[self.slack].clone(),
            lines: self
                .lines
                .iter()
                .map(|l| LineRecord {
                    from: self.nodes[l.from].clone(),
                    to: self.nodes[l.to].clone(),
                    x: l.x,
                    limit: l.limit,
                })
                .collect(),
            generators: self
                .generators
                .iter()
                .filter(|g| !g.synthetic)
                .map(|g| GeneratorRecord {
                    node: self.nodes[g.node].clone(),
                    a: g.a,
                    b: g.b,
                    c: g.c,
                    pmin: g.pmin,
                    pmax: g.pmax,
                })
                .collect(),
            base_load: self
                .nodes
                .iter()
                .zip(self.base_load.iter())
                .map(|(node, &mw)| LoadRecord {
                    node: node.clone(),
                    mw,
                })
                .collect(),
            load_box: self
                .nodes
                .iter()
                .enumerate()
                .map(|(i, node)| LoadBoxRecord {
                    node: node.clone(),
                    lo: self.load_lo[i],
                    hi: self.load_hi[i],
                })
                .collect(),
        }
    }

    /// The synthetic-generator coefficient recovered from the case, if any.
    pub fn missing_gen_a(&self) -> f64 {
        self.generators
            .iter()
            .find(|g| g.synthetic)
            .map_or(DEFAULT_MISSING_GEN_A, |g| g.a)
    }
}

/// Line-flow sensitivities to nodal injections under the DC approximation.
///
/// Rows follow line order, columns follow node order; the slack column is
/// identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftFactorMatrix {
    pub h: DMatrix<f64>,
}

impl ShiftFactorMatrix {
    pub fn flows(&self, injection: &DVector<f64>) -> DVector<f64> {
        &self.h * injection
    }
}

/// Builds H from topology: branch susceptances, reduced nodal susceptance
/// inverse with the slack row/column removed, slack column zero-padded.
///
/// The factorization runs in node-id order rather than file order so that a
/// permuted case file yields bit-identical factors.
pub fn build_shift_factors(case: &NetworkCase) -> Result<ShiftFactorMatrix> {
    let n = case.n_nodes();
    let m = case.n_lines();
    if m == 0 {
        return Ok(ShiftFactorMatrix {
            h: DMatrix::zeros(0, n),
        });
    }

    // canonical position -> file index
    let mut canon: Vec<usize> = (0..n).collect();
    canon.sort_by(|&a, &b| case.nodes[a].cmp(&case.nodes[b]));
    let mut pos = vec![0usize; n];
    for (p, &i) in canon.iter().enumerate() {
        pos[i] = p;
    }
    // reduced index over canonical positions, skipping the slack
    let slack_pos = pos[case.slack];
    let red = |p: usize| -> Option<usize> {
        match p.cmp(&slack_pos) {
            std::cmp::Ordering::Less => Some(p),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(p - 1),
        }
    };

    let mut bbus = DMatrix::<f64>::zeros(n - 1, n - 1);
    for line in &case.lines {
        let b = 1.0 / line.x;
        let (f, t) = (red(pos[line.from]), red(pos[line.to]));
        if let Some(f) = f {
            bbus[(f, f)] += b;
        }
        if let Some(t) = t {
            bbus[(t, t)] += b;
        }
        if let (Some(f), Some(t)) = (f, t) {
            bbus[(f, t)] -= b;
            bbus[(t, f)] -= b;
        }
    }
    let x_red = bbus.cholesky().ok_or(Error::SingularSusceptance)?.inverse();

    let mut h = DMatrix::zeros(m, n);
    for (e, line) in case.lines.iter().enumerate() {
        let b = 1.0 / line.x;
        let (f, t) = (red(pos[line.from]), red(pos[line.to]));
        for i in 0..n {
            let Some(c) = red(pos[i]) else { continue };
            let theta_f = f.map_or(0.0, |f| x_red[(f, c)]);
            let theta_t = t.map_or(0.0, |t| x_red[(t, c)]);
            h[(e, i)] = b * (theta_f - theta_t);
        }
    }
    Ok(ShiftFactorMatrix { h })
}
