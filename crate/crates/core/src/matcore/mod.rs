//! Dense storage, deterministic factorizations and the exact leverage oracle.

mod dense;
mod exact;
mod factor;

pub(crate) use dense::dot;
pub use dense::DenseMatrix;
pub use exact::{
    coherence, exact_cross_leverage, exact_cross_leverage_capped, exact_leverage,
    exact_leverage_with_tolerance, leverage_from_basis, normalize, LeverageMethod, LeverageReport,
    DEFAULT_DENSE_GRAM_CAP,
};
pub use factor::{
    orthonormal_basis, pseudoinverse, pseudoinverse_from_svd, qr_thin, singular_values,
    spectral_norm, thin_svd, upper_triangular_inverse, HouseholderQr, ThinSvd,
    DEFAULT_RANK_TOLERANCE,
};
