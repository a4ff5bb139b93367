//! Deterministic dense linear-algebra primitives: thin Householder QR,
//! symmetric eigendecomposition, positive definite log-determinant, and
//! singular values. Everything here is a pure function of its inputs and
//! safe to call concurrently.

mod cholesky;
mod dense;
mod eig;
pub(crate) mod qr;
mod svd;

pub use cholesky::logdet_posdef;
pub use dense::DenseMatrix;
pub use eig::{sym_eig, SymmetricEigen};
pub use qr::{orthonormality_defect, thin_qr};
pub use svd::{singular_values, spectral_norm};

/// Max-entry tolerance on `Q^T Q - I` for orthonormal factors.
pub const TOL_ORTHONORMAL: f64 = 1e-10;

/// A triangular factor is rank deficient when `|R[i,i]| <= TOL_RANK_RATIO * |R[1,1]|`.
pub const TOL_RANK_RATIO: f64 = 1e-12;

/// Relative max-entry tolerance for accepting a matrix as symmetric.
pub const TOL_SYMMETRY: f64 = 1e-10;
