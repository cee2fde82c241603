use serde::{Deserialize, Serialize};

use super::operator::{SketchKind, SketchOperator};
use crate::error::{Error, Result};
use crate::matcore::DEFAULT_RANK_TOLERANCE;
use crate::rng::derive_seed;

/// Default practical multiplier for `r1 = ⌈c1 · d · ln n⌉`.
pub const DEFAULT_C1: f64 = 20.0;
/// Default practical multiplier for `r2 = ⌈c2 · ln n / ε²⌉`.
pub const DEFAULT_C2: f64 = 12.0;
/// Default failure probability for the JLT stage.
pub const DEFAULT_DELTA: f64 = 0.1;

/// Salt separating the second-stage sketch seed from the first.
const JLT_SEED_SALT: u64 = 0x4a4c_5432;

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1/2], got {epsilon}"
        )));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    Ok(())
}

fn jlt_dim_from_ln(ln_points: f64, epsilon: f64, delta: f64) -> usize {
    let r = (12.0 * ln_points + 6.0 * (1.0 / delta).ln()) / (epsilon * epsilon);
    (r.ceil() as usize).max(1)
}

/// Target dimension of an ε-JLT for `n_points` fixed points:
/// `⌈(12 ln n + 6 ln(1/δ)) / ε²⌉`.
pub fn jlt_dim(n_points: usize, epsilon: f64, delta: f64) -> Result<usize> {
    if n_points == 0 {
        return Err(Error::InvalidParameter("n_points must be >= 1".into()));
    }
    check_epsilon(epsilon)?;
    check_delta(delta)?;
    Ok(jlt_dim_from_ln((n_points as f64).ln(), epsilon, delta))
}

/// SRHT sample size that makes it an ε-FJLT for an `n x d` orthonormal basis,
/// `⌈(14² d L / ε²) · ln(30² d L / ε²)⌉` with `L = ln(40 n d)`, capped at `n`.
pub fn fjlt_dim(n: usize, d: usize, epsilon: f64) -> Result<usize> {
    if d == 0 || n < d {
        return Err(Error::InvalidParameter(format!(
            "fjlt_dim needs n >= d >= 1, got n = {n}, d = {d}"
        )));
    }
    check_epsilon(epsilon)?;
    let (nf, df) = (n as f64, d as f64);
    let l = (40.0 * nf * df).ln();
    let eps2 = epsilon * epsilon;
    let r = (196.0 * df * l / eps2) * (900.0 * df * l / eps2).ln();
    Ok((r.ceil() as usize).min(n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    /// Dimensions from the closed-form JLT/FJLT bounds.
    Theory,
    /// `r1 = ⌈c1 d ln n⌉`, `r2 = ⌈c2 ln n / ε²⌉`.
    Practical,
}

/// Resolved dimensions and operator kinds for the two-stage leverage sketch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchPlan {
    pub n_rows: usize,
    pub n_cols: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub mode: PlanMode,
    pub c1: f64,
    pub c2: f64,
    /// Rows kept by the first-stage transform. Equals the padded row count when
    /// that transform is a full RHT.
    pub r1: usize,
    /// Columns of the second-stage projection.
    pub r2: usize,
    pub fjlt: SketchKind,
    pub jlt: SketchKind,
    pub rank_tolerance: f64,
}

impl SketchPlan {
    pub fn practical(n: usize, d: usize, epsilon: f64) -> Result<Self> {
        Self::practical_with(n, d, epsilon, DEFAULT_DELTA, DEFAULT_C1, DEFAULT_C2)
    }

    pub fn practical_with(
        n: usize,
        d: usize,
        epsilon: f64,
        delta: f64,
        c1: f64,
        c2: f64,
    ) -> Result<Self> {
        check_shape(n, d)?;
        check_epsilon(epsilon)?;
        check_delta(delta)?;
        if !(c1 > 0.0 && c2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "practical multipliers must be positive, got c1 = {c1}, c2 = {c2}"
            )));
        }
        let ln_n = (n as f64).ln();
        let r1 = ((c1 * d as f64 * ln_n).ceil() as usize).max(d);
        let r2 = ((c2 * ln_n / (epsilon * epsilon)).ceil() as usize).max(1);
        Self {
            n_rows: n,
            n_cols: d,
            epsilon,
            delta,
            mode: PlanMode::Practical,
            c1,
            c2,
            r1,
            r2,
            fjlt: SketchKind::Srht,
            jlt: SketchKind::SparseJlt,
            rank_tolerance: DEFAULT_RANK_TOLERANCE,
        }
        .resolved()
    }

    /// Dimensions from the closed-form bounds; `r2` covers the `n²` points
    /// (normalized rows and pairwise sums).
    pub fn theory(n: usize, d: usize, epsilon: f64, delta: f64) -> Result<Self> {
        check_shape(n, d)?;
        check_delta(delta)?;
        let r1 = fjlt_dim(n, d, epsilon)?;
        let r2 = jlt_dim_from_ln(2.0 * (n as f64).ln(), epsilon, delta);
        Self {
            n_rows: n,
            n_cols: d,
            epsilon,
            delta,
            mode: PlanMode::Theory,
            c1: DEFAULT_C1,
            c2: DEFAULT_C2,
            r1,
            r2,
            fjlt: SketchKind::Srht,
            jlt: SketchKind::SparseJlt,
            rank_tolerance: DEFAULT_RANK_TOLERANCE,
        }
        .resolved()
    }

    /// Full RHT followed by no projection; reproduces exact leverage scores.
    pub fn degenerate(n: usize, d: usize, epsilon: f64) -> Result<Self> {
        Self::practical(n, d, epsilon)?
            .with_fjlt(SketchKind::FullRht)?
            .with_jlt(SketchKind::Identity)
    }

    pub fn with_r1(mut self, r1: usize) -> Result<Self> {
        self.r1 = r1;
        if self.fjlt == SketchKind::FullRht {
            self.fjlt = SketchKind::Srht;
        }
        self.resolved()
    }

    pub fn with_r2(mut self, r2: usize) -> Result<Self> {
        self.r2 = r2;
        self.resolved()
    }

    pub fn with_fjlt(mut self, kind: SketchKind) -> Result<Self> {
        self.fjlt = kind;
        self.resolved()
    }

    pub fn with_jlt(mut self, kind: SketchKind) -> Result<Self> {
        self.jlt = kind;
        self.resolved()
    }

    pub fn with_rank_tolerance(mut self, tol: f64) -> Result<Self> {
        self.rank_tolerance = tol;
        self.resolved()
    }

    /// Applies caps and kind-implied sizes, then validates.
    fn resolved(mut self) -> Result<Self> {
        let n_pad = self.n_rows.next_power_of_two();
        match self.fjlt {
            SketchKind::Srht if self.r1 >= self.n_rows => {
                // sampling every row is the full transform
                self.fjlt = SketchKind::FullRht;
                self.r1 = n_pad;
            }
            SketchKind::FullRht => self.r1 = n_pad,
            SketchKind::Srht => {}
            other => {
                return Err(Error::InvalidParameter(format!(
                    "first-stage sketch must be an SRHT or full RHT, got {other:?}"
                )))
            }
        }
        match self.jlt {
            SketchKind::Identity => self.r2 = self.n_cols,
            SketchKind::SparseJlt | SketchKind::Gaussian => {}
            other => {
                return Err(Error::InvalidParameter(format!(
                    "second-stage sketch must be a sparse JLT, Gaussian or identity, got {other:?}"
                )))
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_shape(self.n_rows, self.n_cols)?;
        check_epsilon(self.epsilon)?;
        check_delta(self.delta)?;
        if self.r1 < self.n_cols {
            return Err(Error::InvalidParameter(format!(
                "r1 = {} must be at least d = {}",
                self.r1, self.n_cols
            )));
        }
        if self.r2 == 0 {
            return Err(Error::InvalidParameter("r2 must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.rank_tolerance) {
            return Err(Error::InvalidParameter(format!(
                "rank tolerance must lie in [0, 1), got {}",
                self.rank_tolerance
            )));
        }
        Ok(())
    }

    /// First-stage transform `Π₁` (r1 x n).
    pub fn fjlt_operator(&self, seed: u64) -> Result<SketchOperator> {
        SketchOperator::new(self.fjlt, seed, self.n_rows, self.r1)
    }

    /// Second-stage projection acting on d-dimensional rows (r2 x d).
    pub fn jlt_operator(&self, seed: u64) -> Result<SketchOperator> {
        SketchOperator::new(self.jlt, self.jlt_seed(seed), self.n_cols, self.r2)
    }

    pub fn jlt_seed(&self, seed: u64) -> u64 {
        derive_seed(seed, JLT_SEED_SALT)
    }
}

fn check_shape(n: usize, d: usize) -> Result<()> {
    if d == 0 || n <= d {
        return Err(Error::ShapeError(format!(
            "leverage sketch needs n > d >= 1, got {n}x{d}"
        )));
    }
    Ok(())
}
