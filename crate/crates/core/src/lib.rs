//! Randomized approximation of statistical leverage scores.
//!
//! The crate estimates every leverage score and the coherence of a tall matrix
//! through a two-stage sketch `A · R⁻¹ · Π₂`, finds large cross-leverage
//! scores with a sorted two-pointer search, produces rank-`k` leverage
//! estimates for general matrices and samples columns of under-constrained
//! least-squares problems by leverage. Exact SVD-based routines in
//! [`matcore`] serve as the reference for all of them.

pub mod crosslev;
pub mod error;
pub mod fixtures;
pub mod levscore;
pub mod matcore;
pub mod rankklev;
pub mod rng;
pub mod sketch;
pub mod underls;

pub use error::{Error, Result};
pub use matcore::{DenseMatrix, LeverageMethod, LeverageReport};
pub use sketch::{SketchKind, SketchOperator, SketchPlan};
