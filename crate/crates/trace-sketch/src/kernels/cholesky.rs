use super::dense::DenseMatrix;
use super::TOL_SYMMETRY;
use crate::error::{Error, Result};

/// Log-determinant of a symmetric positive definite matrix via Cholesky.
///
/// Returns `2 * sum_i ln L[i,i]` for `S = L L^T`. Fails with
/// [`Error::NotPositiveDefinite`] when a pivot is not strictly positive,
/// reporting the 1-based pivot index.
pub fn logdet_posdef(s: &DenseMatrix) -> Result<f64> {
    if s.rows() != s.cols() {
        return Err(Error::DimensionMismatch {
            expected: s.rows(),
            got: s.cols(),
        });
    }
    let asymmetry = s.max_asymmetry();
    if asymmetry > TOL_SYMMETRY * s.max_abs().max(1.0) {
        return Err(Error::NotSymmetric { asymmetry });
    }

    let n = s.rows();
    let mut l = s.symmetrize();
    let mut logdet = 0.0;
    for j in 0..n {
        let mut pivot = l[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if pivot <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                index: j + 1,
                pivot,
            });
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        logdet += ljj.ln();
        for i in (j + 1)..n {
            let mut v = l[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / ljj;
        }
    }
    Ok(2.0 * logdet)
}
