use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid case field `{field}`: {reason}")]
    InvalidCase { field: String, reason: String },

    #[error("network graph is disconnected: node `{0}` is unreachable from the slack node")]
    Disconnected(String),

    #[error("reduced susceptance matrix is singular")]
    SingularSusceptance,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("Q not positive definite")]
    NotPositiveDefinite,

    #[error("Q not positive semidefinite")]
    NotPositiveSemidefinite,

    #[error("Q not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("QP infeasible: no point satisfies the constraints")]
    Infeasible,

    #[error("QP unbounded below")]
    Unbounded,

    #[error("active-set iteration limit ({0}) reached")]
    IterationLimit(usize),

    #[error("polytope is empty")]
    EmptyPolytope,

    #[error("dispatch infeasible: generation or network cannot serve the load")]
    DispatchInfeasible,

    #[error("degenerate active set: {0}")]
    Degenerate(String),

    #[error("critical region is empty or not full-dimensional")]
    RegionEmpty,

    #[error("exploration cap of {cap} iterations exceeded with {frontier} frontier pieces left")]
    ExplorationCap { cap: usize, frontier: usize },

    #[error("load not covered by the policy ({})", if *.sced_feasible { "policy incomplete: dispatch is feasible here" } else { "dispatch infeasible at this load" })]
    Uncovered { sced_feasible: bool },

    #[error("DR infeasible: no region admits a feasible targeting plan")]
    DrInfeasible,

    #[error("invalid targeting spec field `{field}`: {reason}")]
    InvalidSpec { field: String, reason: String },

    #[error("oracle size guard: {0}")]
    OracleTooLarge(String),
}

impl Error {
    pub(crate) fn case(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidCase {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn spec(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidSpec {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors that describe an infeasible domain problem rather
    /// than malformed input.
    pub fn is_domain_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::DispatchInfeasible
                | Error::DrInfeasible
                | Error::Infeasible
                | Error::Uncovered { .. }
        )
    }
}
