//! Seeded random sketches and their dimension formulas.

mod hadamard;
mod operator;
mod plan;

pub use hadamard::{fwht, fwht_in_place};
pub use operator::{
    apply_gaussian, apply_sparse_jlt, apply_srht, Side, SketchKind, SketchOperator,
};
pub use plan::{fjlt_dim, jlt_dim, PlanMode, SketchPlan, DEFAULT_C1, DEFAULT_C2, DEFAULT_DELTA};
