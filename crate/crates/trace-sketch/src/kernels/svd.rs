use super::dense::{dot, DenseMatrix};
use super::eig::sym_eig;

/// Singular values in descending order, via one-sided Jacobi on the tall
/// orientation.
///
/// One-sided Jacobi computes small singular values to high relative
/// accuracy, which matters here because rank decisions compare
/// `sigma_min / sigma_max` against a 1e-12 threshold that Gram-matrix
/// methods cannot resolve.
pub fn singular_values(a: &DenseMatrix) -> Vec<f64> {
    let mut w = if a.rows() >= a.cols() {
        a.clone()
    } else {
        a.transpose()
    };
    let m = w.cols();

    let tol = 1e-15;
    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..m {
            for q in (p + 1)..m {
                let alpha = dot(w.col(p), w.col(p));
                let beta = dot(w.col(q), w.col(q));
                let gamma = dot(w.col(p), w.col(q));
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..w.rows() {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    w[(i, p)] = c * wp - s * wq;
                    w[(i, q)] = s * wp + c * wq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigmas: Vec<f64> = (0..m)
        .map(|j| dot(w.col(j), w.col(j)).sqrt())
        .collect();
    sigmas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sigmas
}

/// Largest singular value, via the Gram matrix of the smaller side.
///
/// The top eigenvalue of the Gram matrix carries full relative accuracy, and
/// the Gram route is much cheaper than a Jacobi sweep for wide or tall
/// matrices. Do not use this for small singular values.
pub fn spectral_norm(a: &DenseMatrix) -> f64 {
    let gram = if a.rows() <= a.cols() {
        // A A^T, rows x rows
        let at = a.transpose();
        at.transpose_mul(&at)
    } else {
        a.transpose_mul(a)
    };
    let eig = sym_eig(&gram.symmetrize()).expect("gram matrix is symmetric by construction");
    eig.eigenvalues[0].max(0.0).sqrt()
}
