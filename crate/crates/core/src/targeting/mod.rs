//! Demand-response targeting on top of an LMP policy.

pub mod oracle;
pub mod region_qp;
pub mod scenarios;
pub mod solve;
pub mod spec;

pub use oracle::{oracle_targeting, subsets_up_to};
pub use region_qp::RegionProblem;
pub use scenarios::perturb_scenarios;
pub use solve::{
    highest_lmp_nodes, solve_heuristic, solve_shifting, solve_targeting, solve_targeting_unscreened,
};
pub use spec::{Mode, SolveStats, TargetingPlan, TargetingSpec};
