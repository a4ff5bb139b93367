//! Matrix-free symmetric positive semi-definite operators.
//!
//! An operator exposes its action on blocks of vectors and a handful of
//! structure-aware exact quantities (trace, log-determinant of `I + A`)
//! used as references in tests and experiment reports. Operators are
//! immutable after construction; every run owns its own [`MatvecContext`]
//! so concurrent runs never contend on the matvec counter.

mod market;

pub use market::read_matrix_market;

use crate::error::{Error, Result};
use crate::kernels::{sym_eig, DenseMatrix, TOL_SYMMETRY};

/// Dimension above which densifying an operator is refused.
pub const DENSE_GUARD: usize = 8192;

/// Running count of single matrix-vector products.
///
/// A block apply on `m` columns adds exactly `m`. The count never decreases.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatvecContext {
    matvecs: u64,
}

impl MatvecContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn matvecs(&self) -> u64 {
        self.matvecs
    }

    fn charge(&mut self, columns: usize) {
        self.matvecs += columns as u64;
    }
}

/// Sparse vector used by the outer-product-sum operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    dim: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn new(dim: usize, indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::BadShape(format!(
                "sparse vector has {} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= dim) {
            return Err(Error::BadShape(format!(
                "sparse vector index {bad} out of range for dimension {dim}"
            )));
        }
        Ok(SparseVector {
            dim,
            indices,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(self.values.iter())
            .map(|(&i, &v)| v * dense[i])
            .sum()
    }

    pub fn dot_sparse(&self, other: &SparseVector) -> f64 {
        // Indices are kept sorted by the constructors in this crate.
        let mut sum = 0.0;
        let mut a = 0;
        let mut b = 0;
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    sum += self.values[a] * other.values[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        sum
    }

    pub fn axpy_into(&self, coeff: f64, dense: &mut [f64]) {
        for (&i, &v) in self.indices.iter().zip(self.values.iter()) {
            dense[i] += coeff * v;
        }
    }
}

/// Symmetric PSD operator accessed through matrix-vector products.
#[derive(Debug, Clone)]
pub enum SymmetricOperator {
    /// Explicit dense symmetric matrix.
    Dense(DenseMatrix),
    /// Diagonal matrix given by its diagonal entries.
    Diagonal(Vec<f64>),
    /// `U diag(lambda) U^T` with only `r <= n` explicit eigenpairs; the
    /// remaining eigenvalues are implicitly zero.
    EigenSynthetic {
        basis: DenseMatrix,
        eigenvalues: Vec<f64>,
    },
    /// `sum_j c_j x_j x_j^T` with coefficients `c_j >= 0` and sparse `x_j`
    /// that need not be orthonormal.
    OuterProductSum {
        dim: usize,
        terms: Vec<(f64, SparseVector)>,
    },
}

impl SymmetricOperator {
    pub fn dense(matrix: DenseMatrix) -> Result<Self> {
        if matrix.rows() != matrix.cols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                got: matrix.cols(),
            });
        }
        let asym = matrix.max_asymmetry();
        if asym > TOL_SYMMETRY * matrix.max_abs().max(1.0) {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        Ok(SymmetricOperator::Dense(matrix.symmetrize()))
    }

    pub fn diagonal(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::BadShape("diagonal operator needs at least one entry".into()));
        }
        Ok(SymmetricOperator::Diagonal(values))
    }

    /// Build from `r` explicit eigenpairs; `basis` must have orthonormal
    /// columns and `eigenvalues` must be sorted descending and nonnegative.
    pub fn eigen_synthetic(basis: DenseMatrix, eigenvalues: Vec<f64>) -> Result<Self> {
        if basis.cols() != eigenvalues.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.cols(),
                got: eigenvalues.len(),
            });
        }
        let defect = crate::kernels::orthonormality_defect(&basis);
        if defect > 1e-9 {
            return Err(Error::NotOrthonormal { deviation: defect });
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) || eigenvalues.iter().any(|&v| v < 0.0) {
            return Err(Error::BadParameter(
                "eigenvalues must be sorted descending and nonnegative".into(),
            ));
        }
        Ok(SymmetricOperator::EigenSynthetic { basis, eigenvalues })
    }

    pub fn outer_product_sum(dim: usize, terms: Vec<(f64, SparseVector)>) -> Result<Self> {
        for (c, x) in &terms {
            if *c < 0.0 {
                return Err(Error::BadParameter(format!(
                    "outer-product coefficient {c} is negative"
                )));
            }
            if x.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: x.dim(),
                });
            }
        }
        Ok(SymmetricOperator::OuterProductSum { dim, terms })
    }

    pub fn dim(&self) -> usize {
        match self {
            SymmetricOperator::Dense(m) => m.rows(),
            SymmetricOperator::Diagonal(v) => v.len(),
            SymmetricOperator::EigenSynthetic { basis, .. } => basis.rows(),
            SymmetricOperator::OuterProductSum { dim, .. } => *dim,
        }
    }

    /// `A X` for a block of column vectors, charging one matvec per column.
    pub fn apply_block(&self, x: &DenseMatrix, ctx: &mut MatvecContext) -> Result<DenseMatrix> {
        let n = self.dim();
        if x.rows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.rows(),
            });
        }
        ctx.charge(x.cols());
        let out = match self {
            SymmetricOperator::Dense(m) => m.mul(x),
            SymmetricOperator::Diagonal(d) => {
                let mut y = x.clone();
                for j in 0..y.cols() {
                    for (i, v) in y.col_mut(j).iter_mut().enumerate() {
                        *v *= d[i];
                    }
                }
                y
            }
            SymmetricOperator::EigenSynthetic { basis, eigenvalues } => {
                let mut proj = basis.transpose_mul(x); // r x m
                for j in 0..proj.cols() {
                    for (i, v) in proj.col_mut(j).iter_mut().enumerate() {
                        *v *= eigenvalues[i];
                    }
                }
                basis.mul(&proj)
            }
            SymmetricOperator::OuterProductSum { dim, terms } => {
                let mut y = DenseMatrix::zeros(*dim, x.cols());
                for j in 0..x.cols() {
                    let xcol = x.col(j);
                    let ycol = y.col_mut(j);
                    for (c, xv) in terms {
                        let w = c * xv.dot_dense(xcol);
                        if w != 0.0 {
                            xv.axpy_into(w, ycol);
                        }
                    }
                }
                y
            }
        };
        Ok(out)
    }

    /// Exact trace, computed from the structure of each variant.
    pub fn exact_trace(&self) -> f64 {
        match self {
            SymmetricOperator::Dense(m) => m.trace(),
            SymmetricOperator::Diagonal(d) => d.iter().sum(),
            SymmetricOperator::EigenSynthetic { eigenvalues, .. } => eigenvalues.iter().sum(),
            SymmetricOperator::OuterProductSum { terms, .. } => {
                terms.iter().map(|(c, x)| c * x.norm_squared()).sum()
            }
        }
    }

    /// Exact `logdet(I + A) = sum_j log(1 + lambda_j(A))`.
    ///
    /// Synthetic-eigenvalue operators work at any dimension; the other
    /// variants are guarded by [`DENSE_GUARD`] because they go through an
    /// eigendecomposition (of the matrix itself, or of the small Gram matrix
    /// for outer-product sums).
    pub fn exact_logdet_iplus(&self) -> Result<f64> {
        match self {
            SymmetricOperator::EigenSynthetic { eigenvalues, .. } => {
                Ok(eigenvalues.iter().map(|&v| v.max(0.0).ln_1p()).sum())
            }
            _ if self.dim() > DENSE_GUARD => Err(Error::TooLarge {
                n: self.dim(),
                limit: DENSE_GUARD,
            }),
            SymmetricOperator::Diagonal(d) => Ok(d.iter().map(|&v| v.max(0.0).ln_1p()).sum()),
            SymmetricOperator::Dense(m) => {
                let eig = sym_eig(m)?;
                Ok(eig.eigenvalues.iter().map(|&v| v.max(0.0).ln_1p()).sum())
            }
            SymmetricOperator::OuterProductSum { terms, .. } => {
                // Nonzero eigenvalues of X C X^T equal those of the r x r
                // Gram matrix C^{1/2} X^T X C^{1/2}; the implicit zeros
                // contribute nothing to logdet(I + A).
                if terms.is_empty() {
                    return Ok(0.0);
                }
                let r = terms.len();
                let mut gram = DenseMatrix::zeros(r, r);
                for i in 0..r {
                    for j in i..r {
                        let (ci, xi) = &terms[i];
                        let (cj, xj) = &terms[j];
                        let v = (ci * cj).sqrt() * xi.dot_sparse(xj);
                        gram[(i, j)] = v;
                        gram[(j, i)] = v;
                    }
                }
                let eig = sym_eig(&gram)?;
                Ok(eig.eigenvalues.iter().map(|&v| v.max(0.0).ln_1p()).sum())
            }
        }
    }

    /// Densify, guarded by [`DENSE_GUARD`].
    pub fn to_dense(&self) -> Result<DenseMatrix> {
        let n = self.dim();
        if n > DENSE_GUARD {
            return Err(Error::TooLarge {
                n,
                limit: DENSE_GUARD,
            });
        }
        Ok(match self {
            SymmetricOperator::Dense(m) => m.clone(),
            SymmetricOperator::Diagonal(d) => DenseMatrix::from_diagonal(d),
            SymmetricOperator::EigenSynthetic { basis, eigenvalues } => {
                let mut scaled = basis.clone();
                for j in 0..scaled.cols() {
                    let lam = eigenvalues[j];
                    for v in scaled.col_mut(j).iter_mut() {
                        *v *= lam;
                    }
                }
                scaled.mul(&basis.transpose())
            }
            SymmetricOperator::OuterProductSum { dim, terms } => {
                let mut m = DenseMatrix::zeros(*dim, *dim);
                for (c, x) in terms {
                    let mut dense_x = vec![0.0; *dim];
                    x.axpy_into(1.0, &mut dense_x);
                    for (j, &xj) in dense_x.iter().enumerate() {
                        if xj == 0.0 {
                            continue;
                        }
                        for (i, &xi) in dense_x.iter().enumerate() {
                            m[(i, j)] += c * xi * xj;
                        }
                    }
                }
                m
            }
        })
    }

    /// The matrix function `log(I + A)` as a dense operator, built from the
    /// eigendecomposition of the densified matrix with eigenvalues clamped
    /// at zero before `log(1 + .)`.
    pub fn dense_log_iplus(&self) -> Result<SymmetricOperator> {
        let dense = self.to_dense()?;
        let eig = sym_eig(&dense)?;
        let v = &eig.eigenvectors;
        let mut scaled = v.clone();
        for j in 0..scaled.cols() {
            let f = eig.eigenvalues[j].max(0.0).ln_1p();
            for entry in scaled.col_mut(j).iter_mut() {
                *entry *= f;
            }
        }
        let log_m = scaled.mul(&v.transpose()).symmetrize();
        SymmetricOperator::dense(log_m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_column(n: usize, i: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, 1, |r, _| if r == i { 1.0 } else { 0.0 })
    }

    #[test]
    fn diagonal_action_and_accounting() {
        let op = SymmetricOperator::diagonal(vec![1.0, 2.0, 3.0]).unwrap();
        let mut ctx = MatvecContext::new();
        let y = op.apply_block(&unit_column(3, 1), &mut ctx).unwrap();
        assert_eq!(y[(0, 0)], 0.0);
        assert_eq!(y[(1, 0)], 2.0);
        assert_eq!(y[(2, 0)], 0.0);
        assert_eq!(ctx.matvecs(), 1);
    }

    #[test]
    fn eigen_synthetic_action_in_eigenbasis() {
        let op = SymmetricOperator::eigen_synthetic(DenseMatrix::identity(2), vec![5.0, 1.0]).unwrap();
        let mut ctx = MatvecContext::new();
        let x = DenseMatrix::from_rows(&[&[1.0], &[1.0]]);
        let y = op.apply_block(&x, &mut ctx).unwrap();
        assert_eq!(y[(0, 0)], 5.0);
        assert_eq!(y[(1, 0)], 1.0);
    }

    #[test]
    fn rank_one_outer_product_action() {
        let x1 = SparseVector::new(3, vec![0], vec![1.0]).unwrap();
        let op = SymmetricOperator::outer_product_sum(3, vec![(2.0, x1)]).unwrap();
        let mut ctx = MatvecContext::new();
        let y = op.apply_block(&unit_column(3, 0), &mut ctx).unwrap();
        assert_eq!(y[(0, 0)], 2.0);
        assert_eq!(y[(1, 0)], 0.0);
    }

    #[test]
    fn exact_traces() {
        assert_eq!(
            SymmetricOperator::diagonal(vec![1.0, 2.0, 3.0]).unwrap().exact_trace(),
            6.0
        );
        let x = SparseVector::new(3, vec![0, 1], vec![1.0, 1.0]).unwrap();
        let op = SymmetricOperator::outer_product_sum(3, vec![(2.0, x)]).unwrap();
        assert_eq!(op.exact_trace(), 4.0);
    }

    #[test]
    fn geometric_eigen_trace_matches_series() {
        let n = 128;
        let gamma: f64 = 0.9;
        let lambdas: Vec<f64> = (0..n).map(|j| gamma.powi(j as i32)).collect();
        let op = SymmetricOperator::eigen_synthetic(DenseMatrix::identity(n), lambdas).unwrap();
        let closed_form = (1.0 - gamma.powi(n as i32)) / (1.0 - gamma);
        assert!((op.exact_trace() - closed_form).abs() <= 1e-12 * closed_form);
    }

    #[test]
    fn logdet_iplus_exact_cases() {
        let zero = SymmetricOperator::diagonal(vec![0.0; 5]).unwrap();
        assert_eq!(zero.exact_logdet_iplus().unwrap(), 0.0);

        let e = std::f64::consts::E;
        let d = SymmetricOperator::diagonal(vec![e - 1.0, e * e - 1.0]).unwrap();
        assert!((d.exact_logdet_iplus().unwrap() - 3.0).abs() < 1e-12);

        // Two unit eigenvalues plus two implicit zeros.
        let basis = DenseMatrix::from_fn(4, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        let op = SymmetricOperator::eigen_synthetic(basis, vec![1.0, 1.0]).unwrap();
        assert!((op.exact_logdet_iplus().unwrap() - 2.0 * 2.0f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn outer_sum_logdet_matches_dense_route() {
        let xs: Vec<(f64, SparseVector)> = (0..4)
            .map(|j| {
                let idx: Vec<usize> = (0..6).filter(|i| (i + j) % 2 == 0).collect();
                let vals: Vec<f64> = idx.iter().map(|&i| 0.3 + 0.1 * (i + j) as f64).collect();
                (1.0 / (1 + j) as f64, SparseVector::new(6, idx, vals).unwrap())
            })
            .collect();
        let op = SymmetricOperator::outer_product_sum(6, xs).unwrap();
        let dense = SymmetricOperator::dense(op.to_dense().unwrap()).unwrap();
        let a = op.exact_logdet_iplus().unwrap();
        let b = dense.exact_logdet_iplus().unwrap();
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));

        let trace_direct = op.exact_trace();
        let trace_dense = op.to_dense().unwrap().trace();
        assert!((trace_direct - trace_dense).abs() <= 1e-12 * trace_direct.max(1.0));
    }

    #[test]
    fn dense_log_iplus_spectral_mapping() {
        // A = (e-1) u u^T for unit u has log(I+A) = u u^T.
        let u = [0.6, 0.8];
        let a = DenseMatrix::from_fn(2, 2, |i, j| (std::f64::consts::E - 1.0) * u[i] * u[j]);
        let op = SymmetricOperator::dense(a).unwrap();
        let log_op = op.dense_log_iplus().unwrap();
        let log_m = log_op.to_dense().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((log_m[(i, j)] - u[i] * u[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_operator_log_iplus_is_zero() {
        let op = SymmetricOperator::diagonal(vec![0.0; 3]).unwrap();
        let log_op = op.dense_log_iplus().unwrap();
        assert!(log_op.to_dense().unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let op = SymmetricOperator::diagonal(vec![1.0, 2.0]).unwrap();
        let mut ctx = MatvecContext::new();
        let x = DenseMatrix::zeros(3, 1);
        assert!(matches!(
            op.apply_block(&x, &mut ctx),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn symmetry_probe_on_random_operator() {
        let basis = {
            let g = crate::sketch::fill_matrix(10, 10, crate::sketch::Distribution::Gaussian, 61);
            crate::kernels::thin_qr(&g).unwrap().0
        };
        let lambdas: Vec<f64> = (0..10).map(|j| 2.0f64.powi(-(j as i32))).collect();
        let op = SymmetricOperator::eigen_synthetic(basis, lambdas).unwrap();
        let mut ctx = MatvecContext::new();
        let scale = op.exact_trace();
        for t in 0..100 {
            let x = DenseMatrix::from_fn(10, 1, |i, _| ((i * 13 + t * 7) as f64).cos());
            let y = DenseMatrix::from_fn(10, 1, |i, _| ((i * 5 + t * 11 + 3) as f64).sin());
            let ax = op.apply_block(&x, &mut ctx).unwrap();
            let ay = op.apply_block(&y, &mut ctx).unwrap();
            let xtay = crate::kernels::DenseMatrix::from_fn(1, 1, |_, _| {
                (0..10).map(|i| x[(i, 0)] * ay[(i, 0)]).sum()
            });
            let ytax = crate::kernels::DenseMatrix::from_fn(1, 1, |_, _| {
                (0..10).map(|i| y[(i, 0)] * ax[(i, 0)]).sum()
            });
            assert!((xtay[(0, 0)] - ytax[(0, 0)]).abs() <= 1e-9 * scale.max(1.0));
        }
    }
}
