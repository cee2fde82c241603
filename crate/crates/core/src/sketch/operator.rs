use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hadamard::fwht_in_place;
use crate::error::{Error, Result};
use crate::matcore::DenseMatrix;
use crate::rng::{stream_rng, STREAM_DENSE_ROWS, STREAM_ROW_SAMPLE, STREAM_SIGNS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchKind {
    /// `√(n_pad/r) · Sᵀ H D`, rows sampled uniformly without replacement.
    Srht,
    /// i.i.d. entries `±√(3/r)` with probability 1/6 each, zero otherwise.
    SparseJlt,
    /// i.i.d. standard normal entries, unscaled.
    Gaussian,
    Identity,
    /// `H D` on the zero-padded input; orthogonal.
    FullRht,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `Π · X`; `X` has `in_dim` rows.
    Left,
    /// `X · Πᵀ`; `X` has `in_dim` columns.
    Right,
}

/// A seeded random linear map `Π : ℝ^in_dim → ℝ^out_dim`.
///
/// The operator only stores its seed; every random piece is regenerated on
/// demand from its own stream, so two applications are bitwise identical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchOperator {
    pub kind: SketchKind,
    pub seed: u64,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl SketchOperator {
    pub fn new(kind: SketchKind, seed: u64, in_dim: usize, out_dim: usize) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidParameter(format!(
                "sketch dimensions must be positive, got {in_dim} -> {out_dim}"
            )));
        }
        let n_pad = in_dim.next_power_of_two();
        match kind {
            SketchKind::Srht if out_dim > n_pad => {
                return Err(Error::InvalidParameter(format!(
                    "SRHT cannot sample {out_dim} of {n_pad} rows"
                )))
            }
            SketchKind::FullRht if out_dim != n_pad => {
                return Err(Error::InvalidParameter(format!(
                    "full RHT output must be the padded size {n_pad}, got {out_dim}"
                )))
            }
            SketchKind::Identity if out_dim != in_dim => {
                return Err(Error::InvalidParameter(format!(
                    "identity sketch must be square, got {in_dim} -> {out_dim}"
                )))
            }
            _ => {}
        }
        Ok(Self {
            kind,
            seed,
            in_dim,
            out_dim,
        })
    }

    pub fn srht(seed: u64, in_dim: usize, out_dim: usize) -> Result<Self> {
        Self::new(SketchKind::Srht, seed, in_dim, out_dim)
    }

    pub fn full_rht(seed: u64, in_dim: usize) -> Result<Self> {
        Self::new(
            SketchKind::FullRht,
            seed,
            in_dim,
            in_dim.next_power_of_two(),
        )
    }

    pub fn sparse_jlt(seed: u64, in_dim: usize, out_dim: usize) -> Result<Self> {
        Self::new(SketchKind::SparseJlt, seed, in_dim, out_dim)
    }

    pub fn gaussian(seed: u64, in_dim: usize, out_dim: usize) -> Result<Self> {
        Self::new(SketchKind::Gaussian, seed, in_dim, out_dim)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(SketchKind::Identity, 0, dim, dim)
    }

    pub fn padded_dim(&self) -> usize {
        self.in_dim.next_power_of_two()
    }

    fn is_hadamard(&self) -> bool {
        matches!(self.kind, SketchKind::Srht | SketchKind::FullRht)
    }

    /// Diagonal of `D` (length `in_dim`; padded rows are zero either way).
    pub fn signs(&self) -> Vec<f64> {
        let mut rng = stream_rng(self.seed, STREAM_SIGNS);
        (0..self.in_dim)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect()
    }

    /// Ascending indices of the rows of `H D` kept by the transform.
    pub fn selected_rows(&self) -> Vec<usize> {
        let n_pad = self.padded_dim();
        if self.kind == SketchKind::FullRht || self.out_dim == n_pad {
            return (0..n_pad).collect();
        }
        let mut rng = stream_rng(self.seed, STREAM_ROW_SAMPLE);
        let mut rows = index::sample(&mut rng, n_pad, self.out_dim).into_vec();
        rows.sort_unstable();
        rows
    }

    /// `√(n_pad / r)` for Hadamard kinds, 1 otherwise.
    pub fn scale(&self) -> f64 {
        if self.is_hadamard() {
            (self.padded_dim() as f64 / self.out_dim as f64).sqrt()
        } else {
            1.0
        }
    }

    /// Row `k` of a dense (JLT or Gaussian) operator.
    fn dense_row(&self, k: usize) -> Vec<f64> {
        let mut rng = stream_rng(self.seed, STREAM_DENSE_ROWS + k as u64);
        match self.kind {
            SketchKind::SparseJlt => {
                let s = (3.0 / self.out_dim as f64).sqrt();
                (0..self.in_dim)
                    .map(|_| match rng.random_range(0u32..6) {
                        0 => s,
                        1 => -s,
                        _ => 0.0,
                    })
                    .collect()
            }
            SketchKind::Gaussian => (0..self.in_dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect(),
            _ => unreachable!("dense_row on a structured sketch"),
        }
    }

    /// The operator as an explicit `out_dim x in_dim` matrix.
    pub fn to_dense(&self) -> DenseMatrix {
        match self.kind {
            SketchKind::Identity => DenseMatrix::identity(self.in_dim),
            SketchKind::SparseJlt | SketchKind::Gaussian => {
                let mut data = Vec::with_capacity(self.out_dim * self.in_dim);
                for k in 0..self.out_dim {
                    data.extend(self.dense_row(k));
                }
                DenseMatrix::from_raw(self.out_dim, self.in_dim, data)
            }
            SketchKind::Srht | SketchKind::FullRht => {
                let n_pad = self.padded_dim();
                let signs = self.signs();
                let scale = self.scale() / (n_pad as f64).sqrt();
                let rows = self.selected_rows();
                DenseMatrix::from_fn(self.out_dim, self.in_dim, |k, t| {
                    let h = if (rows[k] & t).count_ones() % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    };
                    scale * h * signs[t]
                })
            }
        }
    }

    /// Applies the operator on the given side.
    pub fn apply(&self, x: &DenseMatrix, side: Side) -> Result<DenseMatrix> {
        let conforming = match side {
            Side::Left => x.rows(),
            Side::Right => x.cols(),
        };
        if conforming != self.in_dim {
            return Err(Error::DimensionMismatch {
                expected: format!("{:?}-side operand with dimension {}", side, self.in_dim),
                found: format!("{}x{}", x.rows(), x.cols()),
            });
        }
        match (self.kind, side) {
            (SketchKind::Identity, _) => Ok(x.clone()),
            (SketchKind::Srht | SketchKind::FullRht, Side::Left) => Ok(self.hadamard_left(x)),
            (SketchKind::Srht | SketchKind::FullRht, Side::Right) => {
                Ok(self.hadamard_left(&x.transpose()).transpose())
            }
            (_, Side::Left) => self.to_dense().matmul(x),
            (_, Side::Right) => x.matmul_transpose(&self.to_dense()),
        }
    }

    /// `√(n_pad/r) · Sᵀ H D X_pad`, one transform per column, `O(n c log n)`.
    fn hadamard_left(&self, x: &DenseMatrix) -> DenseMatrix {
        let n_pad = self.padded_dim();
        let signs = self.signs();
        let rows = self.selected_rows();
        let scale = self.scale();
        let cols = x.cols();
        let transform = |j: usize| -> Vec<f64> {
            let mut buf = vec![0.0; n_pad];
            for (i, (b, s)) in buf.iter_mut().zip(&signs).enumerate() {
                *b = s * x[(i, j)];
            }
            fwht_in_place(&mut buf).expect("padded length is a power of two");
            rows.iter().map(|&r| scale * buf[r]).collect()
        };
        let columns: Vec<Vec<f64>> = if n_pad * cols >= 1 << 14 {
            (0..cols).into_par_iter().map(transform).collect()
        } else {
            (0..cols).map(transform).collect()
        };
        let mut out = DenseMatrix::zeros(rows.len(), cols);
        for (j, col) in columns.iter().enumerate() {
            out.set_column(j, col);
        }
        out
    }
}

fn require_kind(op: &SketchOperator, kinds: &[SketchKind]) -> Result<()> {
    if kinds.contains(&op.kind) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "expected a {kinds:?} operator, got {:?}",
            op.kind
        )))
    }
}

/// `Π A` for an SRHT (or full RHT) operator.
pub fn apply_srht(op: &SketchOperator, a: &DenseMatrix) -> Result<DenseMatrix> {
    require_kind(op, &[SketchKind::Srht, SketchKind::FullRht])?;
    op.apply(a, Side::Left)
}

pub fn apply_sparse_jlt(op: &SketchOperator, x: &DenseMatrix, side: Side) -> Result<DenseMatrix> {
    require_kind(op, &[SketchKind::SparseJlt])?;
    op.apply(x, side)
}

pub fn apply_gaussian(op: &SketchOperator, a: &DenseMatrix, side: Side) -> Result<DenseMatrix> {
    require_kind(op, &[SketchKind::Gaussian])?;
    op.apply(a, side)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_gaussian_matrix;

    #[test]
    fn full_rht_is_orthogonal() {
        let a = seeded_gaussian_matrix(100, 3, 5);
        let op = SketchOperator::full_rht(9, 100).unwrap();
        let pa = apply_srht(&op, &a).unwrap();
        assert_eq!(pa.shape(), (128, 3));
        let rel = (pa.frobenius_norm() - a.frobenius_norm()).abs() / a.frobenius_norm();
        assert!(rel < 1e-12);
        let g = pa.transpose_matmul(&pa).unwrap();
        assert!(g.max_abs_diff(&a.transpose_matmul(&a).unwrap()) < 1e-10);
    }

    #[test]
    fn srht_is_deterministic() {
        let op = SketchOperator::srht(77, 8, 4).unwrap();
        let a = DenseMatrix::identity(8);
        let first = apply_srht(&op, &a).unwrap();
        let second = apply_srht(&op, &a).unwrap();
        assert_eq!(first.as_slice(), second.as_slice());
        assert_eq!(first.shape(), (4, 8));
    }

    #[test]
    fn structured_application_matches_dense() {
        let a = seeded_gaussian_matrix(37, 4, 1);
        for op in [
            SketchOperator::srht(3, 37, 20).unwrap(),
            SketchOperator::full_rht(3, 37).unwrap(),
        ] {
            let fast = op.apply(&a, Side::Left).unwrap();
            let dense = op.to_dense().matmul(&a).unwrap();
            assert!(fast.max_abs_diff(&dense) < 1e-12);
            let x = a.transpose();
            let right = op.apply(&x, Side::Right).unwrap();
            assert!(right.max_abs_diff(&dense.transpose()) < 1e-12);
        }
    }

    #[test]
    fn sparse_entries_and_density() {
        let op = SketchOperator::sparse_jlt(5, 100, 1000).unwrap();
        let m = op.to_dense();
        let s = (3.0f64 / 1000.0).sqrt();
        let mut nnz = 0usize;
        for &v in m.as_slice() {
            if v != 0.0 {
                assert!(v == s || v == -s);
                nnz += 1;
            }
        }
        let density = nnz as f64 / m.as_slice().len() as f64;
        assert!((density - 1.0 / 3.0).abs() <= 0.02, "{density}");
    }

    #[test]
    fn sparse_projection_is_isotropic() {
        // columns of Π have squared norm concentrating at 1
        let op = SketchOperator::sparse_jlt(8, 20, 100_000).unwrap();
        let m = op.to_dense();
        for j in 0..20 {
            let norm_sq: f64 = m.column(j).iter().map(|v| v * v).sum();
            assert!((norm_sq - 1.0).abs() <= 0.05, "{norm_sq}");
        }
    }

    #[test]
    fn gaussian_moments_and_reproducibility() {
        let op = SketchOperator::gaussian(2024, 1000, 1000).unwrap();
        let m = op.to_dense();
        let n = m.as_slice().len() as f64;
        let mean = m.as_slice().iter().sum::<f64>() / n;
        let var = m.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 0.01, "{mean}");
        assert!((var - 1.0).abs() <= 0.02, "{var}");
        let x = seeded_gaussian_matrix(3, 1000, 1);
        let a = apply_gaussian(&op, &x, Side::Right).unwrap();
        let b = apply_gaussian(&op, &x, Side::Right).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn kind_and_dimension_checks() {
        let op = SketchOperator::sparse_jlt(1, 5, 3).unwrap();
        assert!(apply_srht(&op, &DenseMatrix::identity(5)).is_err());
        assert!(matches!(
            op.apply(&DenseMatrix::identity(4), Side::Left),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(SketchOperator::srht(1, 5, 9).is_err());
        assert!(SketchOperator::new(SketchKind::FullRht, 1, 5, 5).is_err());
    }
}
