//! Random starting guesses and their eigenspace projections.
//!
//! The starting guess `Omega` is an n x l random matrix, Gaussian or
//! Rademacher. Splitting it against an orthonormal eigenbasis into the
//! dominant part `Omega_1 = U_1^T Omega` and subdominant part
//! `Omega_2 = U_2^T Omega` gives the interaction norm
//! `||Omega_2 Omega_1^+||_2` that drives every error bound in [`crate::bounds`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{self, DenseMatrix, TOL_RANK_RATIO};
use crate::rng::CounterRng;

/// Entry distribution for random starting guesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    /// Independent standard normal entries.
    Gaussian,
    /// Independent +1/-1 entries with equal probability.
    Rademacher,
}

impl std::fmt::Display for Distribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Distribution::Gaussian => write!(f, "gaussian"),
            Distribution::Rademacher => write!(f, "rademacher"),
        }
    }
}

impl std::str::FromStr for Distribution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Distribution::Gaussian),
            "rademacher" => Ok(Distribution::Rademacher),
            other => Err(Error::BadParameter(format!(
                "unknown distribution '{other}' (expected gaussian or rademacher)"
            ))),
        }
    }
}

/// Random starting guess with its generation parameters, so it can be
/// regenerated bit-identically from `(n, l, distribution, seed)`.
#[derive(Debug, Clone)]
pub struct SketchMatrix {
    pub omega: DenseMatrix,
    pub distribution: Distribution,
    pub seed: u64,
}

/// Fill an arbitrary rows x cols matrix from the counter stream of `seed`,
/// column-major: entry (i, j) uses counter `j * rows + i`.
pub(crate) fn fill_matrix(rows: usize, cols: usize, dist: Distribution, seed: u64) -> DenseMatrix {
    let rng = CounterRng::new(seed);
    DenseMatrix::from_fn(rows, cols, |i, j| {
        let counter = (j * rows + i) as u64;
        match dist {
            Distribution::Gaussian => rng.normal(counter),
            Distribution::Rademacher => rng.sign(counter),
        }
    })
}

/// Draw an n x l starting guess. Deterministic in the seed; the fill order
/// is column-major from a single counter-based stream.
pub fn draw_sketch(n: usize, l: usize, dist: Distribution, seed: u64) -> Result<SketchMatrix> {
    if l < 1 || l > n {
        return Err(Error::BadShape(format!(
            "sketch needs 1 <= l <= n, got l = {l}, n = {n}"
        )));
    }
    Ok(SketchMatrix {
        omega: fill_matrix(n, l, dist, seed),
        distribution: dist,
        seed,
    })
}

/// The two eigenspace projections of a starting guess.
#[derive(Debug, Clone)]
pub struct ProjectionPair {
    /// `U_1^T Omega`, k x l.
    pub omega1: DenseMatrix,
    /// `U_2^T Omega`, (n-k) x l.
    pub omega2: DenseMatrix,
}

/// Project a sketch onto a dominant/subdominant eigenbasis split.
///
/// `[U_1 U_2]` must be orthonormal within 1e-9 (max-entry test on the Gram
/// matrix), otherwise the Frobenius energy of the sketch would not be
/// conserved across the split.
pub fn split_projections(
    u1: &DenseMatrix,
    u2: &DenseMatrix,
    sketch: &SketchMatrix,
) -> Result<ProjectionPair> {
    let n = sketch.omega.rows();
    if u1.rows() != n || u2.rows() != n || u1.cols() + u2.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: u1.cols() + u2.cols(),
        });
    }
    let defect = stacked_orthonormality_defect(u1, u2);
    if defect > 1e-9 {
        return Err(Error::NotOrthonormal { deviation: defect });
    }
    Ok(ProjectionPair {
        omega1: u1.transpose_mul(&sketch.omega),
        omega2: u2.transpose_mul(&sketch.omega),
    })
}

/// Identity-basis split: `omega1` is the first k rows of the matrix and
/// `omega2` the rest. This is the `U = I_n` convention used by the
/// probabilistic checks on raw random matrices.
pub fn split_rows(omega: &DenseMatrix, k: usize) -> Result<ProjectionPair> {
    let n = omega.rows();
    if k < 1 || k >= n {
        return Err(Error::BadShape(format!(
            "row split needs 1 <= k < rows, got k = {k}, rows = {n}"
        )));
    }
    Ok(ProjectionPair {
        omega1: omega.row_block(0, k),
        omega2: omega.row_block(k, n),
    })
}

fn stacked_orthonormality_defect(u1: &DenseMatrix, u2: &DenseMatrix) -> f64 {
    let mut worst = kernels::orthonormality_defect(u1);
    worst = worst.max(kernels::orthonormality_defect(u2));
    let cross = u1.transpose_mul(u2);
    worst.max(cross.max_abs())
}

/// The interaction norm and its two factors.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InteractionNorm {
    /// `||Omega_2 Omega_1^+||_2`.
    pub interaction: f64,
    /// `||Omega_2||_2`.
    pub omega2_norm: f64,
    /// `||Omega_1^+||_2 = 1 / sigma_k(Omega_1)`.
    pub omega1_pinv_norm: f64,
}

/// Spectral norm of `Omega_2 Omega_1^+`, with the factor norms.
///
/// Requires `rank(Omega_1) = k`, detected through singular values:
/// `sigma_k > 1e-12 * sigma_1`. The pseudo-inverse is applied through the
/// QR factors of `Omega_1^T` rather than formed explicitly.
pub fn interaction_norm(pair: &ProjectionPair) -> Result<InteractionNorm> {
    let k = pair.omega1.rows();
    if pair.omega1.cols() < k {
        return Err(Error::BadShape(format!(
            "omega1 must have at least k = {k} columns, got {}",
            pair.omega1.cols()
        )));
    }
    let sigmas = kernels::singular_values(&pair.omega1);
    let sigma_1 = sigmas[0];
    let sigma_k = sigmas[k - 1];
    if sigma_1 <= 0.0 || sigma_k <= TOL_RANK_RATIO * sigma_1 {
        return Err(Error::RankDeficientProjection {
            ratio: if sigma_1 > 0.0 { sigma_k / sigma_1 } else { 0.0 },
        });
    }

    // Omega_1^T = Q R with Q (l x k), R (k x k). Then
    // Omega_1^+ = Q R^{-T} and Omega_2 Omega_1^+ = (Omega_2 Q) R^{-T}.
    let f = kernels::qr::householder_qr(&pair.omega1.transpose());
    let w = pair.omega2.mul(&f.q);
    let m = kernels::qr::solve_rt_xt_eq_bt(&f.r, &w);

    Ok(InteractionNorm {
        interaction: kernels::spectral_norm(&m),
        omega2_norm: kernels::spectral_norm(&pair.omega2),
        omega1_pinv_norm: 1.0 / sigma_k,
    })
}
