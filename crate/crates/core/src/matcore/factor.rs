//! Deterministic dense factorizations.
//!
//! Thin SVD is computed as Householder QR followed by one-sided (Hestenes)
//! Jacobi on the square triangular factor. Everything runs sequentially in a
//! fixed order, so results are bitwise reproducible.

use serde::{Deserialize, Serialize};

use super::dense::{dot, DenseMatrix};
use crate::error::{Error, Result};

/// Default relative cutoff below which singular values are treated as zero.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 80;

/// Compact SVD `A = U diag(σ) Vᵀ` truncated to the numerical rank.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThinSvd {
    /// `n x ρ`, orthonormal columns.
    pub u: DenseMatrix,
    /// Descending, all strictly above `rank_tolerance * σ₁`.
    pub singular_values: Vec<f64>,
    /// `d x ρ`, orthonormal columns.
    pub v: DenseMatrix,
    pub rank_tolerance: f64,
}

impl ThinSvd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn largest(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn smallest(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }

    /// `U diag(σ) Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (x, s) in us.row_mut(i).iter_mut().zip(&self.singular_values) {
                *x *= s;
            }
        }
        us.matmul_transpose(&self.v).expect("conforming factors")
    }

    /// Best rank-`k` approximation assembled from the leading triplets.
    pub fn truncated(&self, k: usize) -> ThinSvd {
        let k = k.min(self.rank());
        ThinSvd {
            u: self.u.leading_columns(k),
            singular_values: self.singular_values[..k].to_vec(),
            v: self.v.leading_columns(k),
            rank_tolerance: self.rank_tolerance,
        }
    }
}

fn check_input(a: &DenseMatrix) -> Result<()> {
    if a.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if let Some(pos) = a.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteEntry {
            row: pos / a.cols(),
            col: pos % a.cols(),
        });
    }
    Ok(())
}

fn check_tolerance(tol: f64) -> Result<()> {
    if !(0.0..1.0).contains(&tol) {
        return Err(Error::InvalidParameter(format!(
            "rank tolerance must lie in [0, 1), got {tol}"
        )));
    }
    Ok(())
}

/// Householder QR of a tall matrix, reflectors kept for forming `Q`.
pub struct HouseholderQr {
    /// Upper triangle holds `R`; below-diagonal entries are scratch.
    work: DenseMatrix,
    reflectors: Vec<Vec<f64>>,
    betas: Vec<f64>,
}

impl HouseholderQr {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        check_input(a)?;
        let (m, n) = a.shape();
        if m < n {
            return Err(Error::ShapeError(format!(
                "QR needs rows >= cols, got {m}x{n}"
            )));
        }
        let mut work = a.clone();
        let mut reflectors = Vec::with_capacity(n);
        let mut betas = Vec::with_capacity(n);
        let mut w = vec![0.0; n];
        for k in 0..n {
            let mut v: Vec<f64> = (k..m).map(|i| work[(i, k)]).collect();
            let norm = dot(&v, &v).sqrt();
            if norm == 0.0 {
                reflectors.push(v);
                betas.push(0.0);
                continue;
            }
            let alpha = if v[0] >= 0.0 { -norm } else { norm };
            v[0] -= alpha;
            let vtv = dot(&v, &v);
            let beta = if vtv > 0.0 { 2.0 / vtv } else { 0.0 };
            if beta != 0.0 {
                let w = &mut w[k..n];
                w.fill(0.0);
                for (i, &vi) in (k..m).zip(&v) {
                    if vi == 0.0 {
                        continue;
                    }
                    for (wj, &aij) in w.iter_mut().zip(&work.row(i)[k..n]) {
                        *wj += vi * aij;
                    }
                }
                for (i, &vi) in (k..m).zip(&v) {
                    let f = beta * vi;
                    if f == 0.0 {
                        continue;
                    }
                    for (aij, &wj) in work.row_mut(i)[k..n].iter_mut().zip(w.iter()) {
                        *aij -= f * wj;
                    }
                }
            }
            work[(k, k)] = alpha;
            for i in k + 1..m {
                work[(i, k)] = 0.0;
            }
            reflectors.push(v);
            betas.push(beta);
        }
        Ok(Self {
            work,
            reflectors,
            betas,
        })
    }

    /// The `d x d` upper-triangular factor.
    pub fn r(&self) -> DenseMatrix {
        let n = self.work.cols();
        DenseMatrix::from_fn(n, n, |i, j| if j >= i { self.work[(i, j)] } else { 0.0 })
    }

    /// The thin `m x d` orthonormal factor.
    pub fn q(&self) -> DenseMatrix {
        let (m, n) = self.work.shape();
        let mut q = DenseMatrix::zeros(m, n);
        for j in 0..n {
            q[(j, j)] = 1.0;
        }
        let mut w = vec![0.0; n];
        for k in (0..n).rev() {
            let beta = self.betas[k];
            if beta == 0.0 {
                continue;
            }
            let v = &self.reflectors[k];
            w.fill(0.0);
            for (i, &vi) in (k..m).zip(v) {
                for (wj, &qij) in w.iter_mut().zip(q.row(i)) {
                    *wj += vi * qij;
                }
            }
            for (i, &vi) in (k..m).zip(v) {
                let f = beta * vi;
                for (qij, &wj) in q.row_mut(i).iter_mut().zip(&w) {
                    *qij -= f * wj;
                }
            }
        }
        q
    }
}

/// Thin QR `A = Q R` of a tall matrix.
pub fn qr_thin(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let qr = HouseholderQr::new(a)?;
    Ok((qr.q(), qr.r()))
}

/// Orthonormal basis for the column space of `a` via column-pivoted Householder QR.
///
/// Columns whose remaining norm falls to `tol` times the largest column norm
/// or below are dropped, so the result has as many columns as the numerical rank.
pub fn orthonormal_basis(a: &DenseMatrix, tol: f64) -> Result<DenseMatrix> {
    check_input(a)?;
    check_tolerance(tol)?;
    let (m, n) = a.shape();
    let mut work = a.clone();
    let mut reflectors: Vec<(usize, Vec<f64>, f64)> = Vec::new();
    let mut first_norm = None;
    let steps = m.min(n);
    for k in 0..steps {
        // pick the remaining column with the largest trailing norm; ties to the lowest index
        let (mut best, mut best_norm) = (k, -1.0);
        for j in k..n {
            let s: f64 = (k..m).map(|i| work[(i, j)] * work[(i, j)]).sum();
            if s > best_norm {
                best = j;
                best_norm = s;
            }
        }
        let norm = best_norm.max(0.0).sqrt();
        let reference = *first_norm.get_or_insert(norm);
        if norm == 0.0 || norm <= tol * reference {
            break;
        }
        if best != k {
            for i in 0..m {
                work.as_mut_slice().swap(i * n + k, i * n + best);
            }
        }
        let mut v: Vec<f64> = (k..m).map(|i| work[(i, k)]).collect();
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vtv = dot(&v, &v);
        let beta = if vtv > 0.0 { 2.0 / vtv } else { 0.0 };
        for j in k..n {
            let s: f64 = (k..m).zip(&v).map(|(i, vi)| vi * work[(i, j)]).sum();
            let f = beta * s;
            for (i, vi) in (k..m).zip(&v) {
                work[(i, j)] -= f * vi;
            }
        }
        reflectors.push((k, v, beta));
    }
    let rank = reflectors.len();
    let mut q = DenseMatrix::zeros(m, rank);
    for j in 0..rank {
        q[(j, j)] = 1.0;
    }
    let mut w = vec![0.0; rank];
    for (k, v, beta) in reflectors.iter().rev() {
        w.fill(0.0);
        for (i, &vi) in (*k..m).zip(v) {
            for (wj, &qij) in w.iter_mut().zip(q.row(i)) {
                *wj += vi * qij;
            }
        }
        for (i, &vi) in (*k..m).zip(v) {
            let f = beta * vi;
            for (qij, &wj) in q.row_mut(i).iter_mut().zip(&w) {
                *qij -= f * wj;
            }
        }
    }
    Ok(q)
}

/// One-sided Jacobi SVD of a small square matrix. Returns `(U, σ, V)` with σ
/// sorted descending and untruncated; columns of `U` for zero σ are zero.
fn jacobi_svd(g: &DenseMatrix) -> (DenseMatrix, Vec<f64>, DenseMatrix) {
    let (m, n) = g.shape();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| g.column(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma: Vec<(f64, usize)> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| (dot(c, c).sqrt(), j))
        .collect();
    // stable: equal σ keep column order
    sigma.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut u = DenseMatrix::zeros(m, n);
    let mut v = DenseMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (out, &(s, j)) in sigma.iter().enumerate() {
        values.push(s);
        if s > 0.0 {
            for i in 0..m {
                u[(i, out)] = cols[j][i] / s;
            }
        }
        for i in 0..n {
            v[(i, out)] = vcols[j][i];
        }
    }
    (u, values, v)
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Compact SVD truncated at `rank_tolerance * σ₁`.
pub fn thin_svd(a: &DenseMatrix, rank_tolerance: f64) -> Result<ThinSvd> {
    check_input(a)?;
    check_tolerance(rank_tolerance)?;
    if a.rows() < a.cols() {
        let t = thin_svd(&a.transpose(), rank_tolerance)?;
        return Ok(ThinSvd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
            rank_tolerance,
        });
    }
    let qr = HouseholderQr::new(a)?;
    let (ur, sigma, v) = jacobi_svd(&qr.r());
    let largest = sigma.first().copied().unwrap_or(0.0);
    let rank = sigma
        .iter()
        .take_while(|&&s| s > 0.0 && s > rank_tolerance * largest)
        .count();
    let u = qr.q().matmul(&ur.leading_columns(rank))?;
    Ok(ThinSvd {
        u,
        singular_values: sigma[..rank].to_vec(),
        v: v.leading_columns(rank),
        rank_tolerance,
    })
}

/// All singular values, descending, untruncated.
pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    check_input(a)?;
    let tall = if a.rows() < a.cols() {
        a.transpose()
    } else {
        a.clone()
    };
    let qr = HouseholderQr::new(&tall)?;
    Ok(jacobi_svd(&qr.r()).1)
}

/// Largest singular value.
pub fn spectral_norm(a: &DenseMatrix) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

/// Moore–Penrose pseudoinverse `V Σ⁻¹ Uᵀ`.
pub fn pseudoinverse(a: &DenseMatrix, rank_tolerance: f64) -> Result<DenseMatrix> {
    let svd = thin_svd(a, rank_tolerance)?;
    Ok(pseudoinverse_from_svd(&svd))
}

pub fn pseudoinverse_from_svd(svd: &ThinSvd) -> DenseMatrix {
    let mut v_scaled = svd.v.clone();
    for i in 0..v_scaled.rows() {
        for (x, s) in v_scaled.row_mut(i).iter_mut().zip(&svd.singular_values) {
            *x /= s;
        }
    }
    v_scaled
        .matmul_transpose(&svd.u)
        .expect("conforming factors")
}

/// Inverse of a nonsingular upper-triangular matrix by back substitution.
pub fn upper_triangular_inverse(r: &DenseMatrix) -> Result<DenseMatrix> {
    let n = r.rows();
    if r.cols() != n {
        return Err(Error::ShapeError(format!(
            "triangular inverse needs a square matrix, got {}x{}",
            r.rows(),
            r.cols()
        )));
    }
    let mut inv = DenseMatrix::zeros(n, n);
    for col in 0..n {
        for i in (0..=col).rev() {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for j in i + 1..=col {
                s -= r[(i, j)] * inv[(j, col)];
            }
            let diag = r[(i, i)];
            if diag == 0.0 {
                return Err(Error::RankDeficient {
                    rank: i,
                    required: n,
                });
            }
            inv[(i, col)] = s / diag;
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_gaussian_matrix;

    fn orthonormality_error(q: &DenseMatrix) -> f64 {
        let g = q.transpose_matmul(q).unwrap();
        g.max_abs_diff(&DenseMatrix::identity(q.cols()))
    }

    #[test]
    fn identity_svd() {
        let svd = thin_svd(&DenseMatrix::identity(3), 0.0).unwrap();
        assert_eq!(svd.singular_values, vec![1.0, 1.0, 1.0]);
        assert!(svd.u.max_abs_diff(&DenseMatrix::identity(3)) < 1e-15);
        assert!(svd.v.max_abs_diff(&DenseMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn diagonal_svd_sorted() {
        let svd = thin_svd(&DenseMatrix::from_diag(&[1.0, 3.0, 2.0]), 0.0).unwrap();
        for (s, e) in svd.singular_values.iter().zip([3.0, 2.0, 1.0]) {
            assert!((s - e).abs() < 1e-14);
        }
    }

    #[test]
    fn random_reconstruction_and_orthonormality() {
        let a = seeded_gaussian_matrix(20, 5, 11);
        let svd = thin_svd(&a, DEFAULT_RANK_TOLERANCE).unwrap();
        assert_eq!(svd.rank(), 5);
        assert!(orthonormality_error(&svd.u) <= 1e-10);
        assert!(orthonormality_error(&svd.v) <= 1e-10);
        let resid = a.sub(&svd.reconstruct()).unwrap().frobenius_norm();
        assert!(resid <= 1e-8 * a.frobenius_norm(), "{resid}");
    }

    #[test]
    fn wide_matrix_svd() {
        let a = seeded_gaussian_matrix(4, 9, 3);
        let svd = thin_svd(&a, DEFAULT_RANK_TOLERANCE).unwrap();
        assert_eq!(svd.u.shape(), (4, 4));
        assert_eq!(svd.v.shape(), (9, 4));
        assert!(a.sub(&svd.reconstruct()).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn rank_truncation() {
        let x = seeded_gaussian_matrix(30, 2, 5);
        let y = seeded_gaussian_matrix(2, 6, 6);
        let a = x.matmul(&y).unwrap();
        let svd = thin_svd(&a, DEFAULT_RANK_TOLERANCE).unwrap();
        assert_eq!(svd.rank(), 2);
        assert_eq!(orthonormal_basis(&a, 1e-10).unwrap().cols(), 2);
    }

    #[test]
    fn pseudoinverse_examples() {
        let p = pseudoinverse(&DenseMatrix::from_diag(&[2.0, 4.0]), 0.0).unwrap();
        assert!(p.max_abs_diff(&DenseMatrix::from_diag(&[0.5, 0.25])) < 1e-15);

        let (q, _) = qr_thin(&seeded_gaussian_matrix(10, 3, 2)).unwrap();
        let p = pseudoinverse(&q, DEFAULT_RANK_TOLERANCE).unwrap();
        assert!(p.max_abs_diff(&q.transpose()) < 1e-12);
    }

    #[test]
    fn penrose_identities() {
        let a = seeded_gaussian_matrix(12, 4, 9);
        let p = pseudoinverse(&a, DEFAULT_RANK_TOLERANCE).unwrap();
        let ap = a.matmul(&p).unwrap();
        let pa = p.matmul(&a).unwrap();
        let scale = a.max_abs();
        assert!(ap.matmul(&a).unwrap().max_abs_diff(&a) <= 1e-8 * scale);
        assert!(pa.matmul(&p).unwrap().max_abs_diff(&p) <= 1e-8 * p.max_abs());
        assert!(ap.max_abs_diff(&ap.transpose()) <= 1e-8);
        assert!(pa.max_abs_diff(&pa.transpose()) <= 1e-8);
    }

    #[test]
    fn qr_reconstructs() {
        let a = seeded_gaussian_matrix(40, 7, 1);
        let (q, r) = qr_thin(&a).unwrap();
        assert!(orthonormality_error(&q) < 1e-12);
        assert!(q.matmul(&r).unwrap().max_abs_diff(&a) < 1e-12);
        let rinv = upper_triangular_inverse(&r).unwrap();
        assert!(
            r.matmul(&rinv)
                .unwrap()
                .max_abs_diff(&DenseMatrix::identity(7))
                < 1e-12
        );
    }

    #[test]
    fn errors() {
        assert!(matches!(
            thin_svd(&DenseMatrix::zeros(0, 3), 0.0),
            Err(Error::EmptyMatrix)
        ));
        assert!(matches!(
            thin_svd(&DenseMatrix::identity(2), 1.0),
            Err(Error::InvalidParameter(_))
        ));
    }
}
