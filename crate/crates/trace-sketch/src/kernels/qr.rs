use super::dense::{dot, DenseMatrix};
use super::{TOL_RANK_RATIO};
use crate::error::{Error, Result};

/// Outcome of an unchecked Householder factorization.
pub(crate) struct QrFactors {
    pub q: DenseMatrix,
    pub r: DenseMatrix,
    /// Smallest |R[i,i]| / |R[0,0]| over the diagonal. 0 when R[0,0] = 0.
    pub min_diag_ratio: f64,
    /// 1-based column index attaining `min_diag_ratio`.
    pub min_diag_index: usize,
}

/// Householder QR of a tall matrix, always completing regardless of rank.
///
/// Returns the thin factor `Q` (n x l, orthonormal columns) and `R` (l x l,
/// upper triangular with nonnegative diagonal). The diagonal sign convention
/// makes the factorization unique for full-rank input, so identical input
/// bits give identical output bits.
pub(crate) fn householder_qr(y: &DenseMatrix) -> QrFactors {
    let n = y.rows();
    let l = y.cols();
    assert!(n >= l, "thin QR requires rows >= cols ({n} < {l})");

    // Work on a copy; reflectors overwrite the lower triangle implicitly.
    let mut a = y.clone();
    // v[j] holds the Householder vector for step j (length n - j).
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(l);

    for j in 0..l {
        // Build the reflector that maps column j (from row j down) onto e_1.
        let mut v: Vec<f64> = (j..n).map(|i| a[(i, j)]).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            // Choose the sign that avoids cancellation.
            let alpha = if v[0] >= 0.0 { -norm } else { norm };
            v[0] -= alpha;
            let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if vnorm > 0.0 {
                for x in v.iter_mut() {
                    *x /= vnorm;
                }
                // Apply H = I - 2 v v^T to the trailing columns.
                for c in j..l {
                    let mut proj = 0.0;
                    for (off, &vi) in v.iter().enumerate() {
                        proj += vi * a[(j + off, c)];
                    }
                    proj *= 2.0;
                    for (off, &vi) in v.iter().enumerate() {
                        a[(j + off, c)] -= proj * vi;
                    }
                }
            } else {
                v.iter_mut().for_each(|x| *x = 0.0); // column already on e_1
            }
        } else {
            v.iter_mut().for_each(|x| *x = 0.0); // zero column: identity reflector
        }
        reflectors.push(v);
    }

    // R is the leading l x l upper triangle of the reduced matrix.
    let mut r = DenseMatrix::zeros(l, l);
    for j in 0..l {
        for i in 0..=j {
            r[(i, j)] = a[(i, j)];
        }
    }

    // Thin Q: apply the reflectors in reverse order to the first l columns of I.
    let mut q = DenseMatrix::zeros(n, l);
    for j in 0..l {
        q[(j, j)] = 1.0;
    }
    for j in (0..l).rev() {
        let v = &reflectors[j];
        if v.iter().all(|&x| x == 0.0) {
            continue;
        }
        for c in 0..l {
            let col = q.col_mut(c);
            let mut proj = 0.0;
            for (off, &vi) in v.iter().enumerate() {
                proj += vi * col[j + off];
            }
            proj *= 2.0;
            for (off, &vi) in v.iter().enumerate() {
                col[j + off] -= proj * vi;
            }
        }
    }

    // Fix signs so the R diagonal is nonnegative.
    for j in 0..l {
        if r[(j, j)] < 0.0 {
            for c in j..l {
                r[(j, c)] = -r[(j, c)];
            }
            for x in q.col_mut(j).iter_mut() {
                *x = -*x;
            }
        }
    }

    let r00 = r[(0, 0)].abs();
    let (mut min_ratio, mut min_index) = (f64::INFINITY, 1);
    for j in 0..l {
        let ratio = if r00 > 0.0 { r[(j, j)].abs() / r00 } else { 0.0 };
        if ratio < min_ratio {
            min_ratio = ratio;
            min_index = j + 1;
        }
    }

    QrFactors {
        q,
        r,
        min_diag_ratio: min_ratio,
        min_diag_index: min_index,
    }
}

/// Thin QR factorization `Y = Q R` with a full-column-rank check.
///
/// `Q` is n x l with orthonormal columns, `R` is l x l upper triangular with
/// nonnegative diagonal. Fails with [`Error::RankDeficient`] when any
/// |R[i,i]| <= [`TOL_RANK_RATIO`] * |R[1,1]|, which signals that the input
/// did not have full column rank.
pub fn thin_qr(y: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let f = householder_qr(y);
    if f.min_diag_ratio <= TOL_RANK_RATIO {
        return Err(Error::RankDeficient {
            index: f.min_diag_index,
            ratio: f.min_diag_ratio,
        });
    }
    Ok((f.q, f.r))
}

/// Solve `R^T X^T = B^T` for X given upper-triangular R, i.e. X = B R^{-T}.
///
/// Used to apply the pseudo-inverse of a full-row-rank matrix through its
/// QR factors instead of forming an explicit inverse.
pub(crate) fn solve_rt_xt_eq_bt(r: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let k = r.rows();
    assert_eq!(r.cols(), k);
    assert_eq!(b.cols(), k);
    let m = b.rows();
    // X R^T = B is R X^T = B^T row-wise: back substitution on the upper
    // triangular R for each row of X.
    let mut x = DenseMatrix::zeros(m, k);
    for row in 0..m {
        for j in (0..k).rev() {
            let mut s = b[(row, j)];
            for p in (j + 1)..k {
                s -= r[(j, p)] * x[(row, p)];
            }
            x[(row, j)] = s / r[(j, j)];
        }
    }
    x
}

/// Max-entry deviation of `Q^T Q` from the identity.
pub fn orthonormality_defect(q: &DenseMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..q.cols() {
        for j in i..q.cols() {
            let g = dot(q.col(i), q.col(j));
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
    }
    worst
}
