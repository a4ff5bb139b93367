//! Randomized subspace iteration.
//!
//! After `q` power iterations on a random starting guess, the operator is
//! restricted to the captured subspace: `T = Q^T (A Q)` with `Q` an
//! orthonormal basis of `span(A^q Omega)`. The trace and log-determinant of
//! `T` estimate those of `A` from below.

use crate::error::{Error, Result};
use crate::kernels::{self, DenseMatrix, TOL_RANK_RATIO};
use crate::operators::{MatvecContext, SymmetricOperator};
use crate::sketch::SketchMatrix;

/// Basis, restriction, and diagnostics from one subspace iteration run.
#[derive(Debug, Clone)]
pub struct SubspaceOutput {
    /// Orthonormal basis `Q`, n x l.
    pub basis: DenseMatrix,
    /// Restriction `T = Q^T A Q`, l x l, symmetrized.
    pub restriction: DenseMatrix,
    /// Matrix-vector products consumed: always `l * (q + 1)`.
    pub matvecs: u64,
    /// Number of power iterations `q`.
    pub iterations: usize,
    /// Re-orthogonalization period used (0 = idealized single QR).
    pub stabilize_period: usize,
    /// Smallest triangular diagonal ratio |R[i,i]| / |R[1,1]| seen across
    /// all QR factorizations of the run. Values at or below the rank
    /// tolerance mean `A^q Omega` did not have full column rank, which for
    /// a low-rank operator is expected and harmless.
    pub min_r_ratio: f64,
    /// Seed of the sketch that produced this run.
    pub seed: u64,
}

/// Matrix-vector products consumed by a run with `l` columns and `q`
/// iterations: `l * (q + 1)`.
pub fn matvec_cost(l: usize, q: usize) -> u64 {
    (l as u64) * (q as u64 + 1)
}

/// Run subspace iteration on `op` with the given starting guess.
///
/// `stabilize_period = 0` is the idealized variant: form `Y = A^q Omega`,
/// then take one thin QR. `stabilize_period = s >= 1` re-orthogonalizes
/// after every `s` applications of `A` (s = 1, the default in the CLI,
/// re-orthogonalizes at every step). Both variants span `A^q Omega` in
/// exact arithmetic. The final step is always `T = Q^T (A Q)`.
///
/// Rank handling: a rank-deficient intermediate is fatal only when the
/// sketch itself is rank deficient (a bad random draw, fixable by
/// re-seeding, reported as [`Error::RankDeficient`]). When the deficiency
/// comes from the operator having rank below `l`, the orthonormal basis is
/// still well defined, the estimates remain exact lower bounds, and the run
/// proceeds with the deficiency recorded in `min_r_ratio`.
pub fn subspace_iterate(
    op: &SymmetricOperator,
    sketch: &SketchMatrix,
    q: usize,
    stabilize_period: usize,
) -> Result<SubspaceOutput> {
    let n = op.dim();
    let l = sketch.omega.cols();
    if q < 1 {
        return Err(Error::BadParameter("q must be at least 1".into()));
    }
    if sketch.omega.rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: sketch.omega.rows(),
        });
    }
    if l > n {
        return Err(Error::BadShape(format!(
            "sketch has l = {l} columns but the operator dimension is {n}"
        )));
    }

    let mut ctx = MatvecContext::new();
    let mut block = sketch.omega.clone();
    let mut min_ratio = f64::INFINITY;
    let mut sketch_checked = false;

    for step in 1..=q {
        block = op.apply_block(&block, &mut ctx)?;
        let reorthogonalize = (stabilize_period >= 1 && step % stabilize_period == 0) || step == q;
        if reorthogonalize {
            let f = kernels::qr::householder_qr(&block);
            if f.min_diag_ratio <= TOL_RANK_RATIO && !sketch_checked {
                // Distinguish a bad sketch from a low-rank operator: only
                // the former violates the full-rank assumption in a way a
                // new seed can repair.
                kernels::thin_qr(&sketch.omega)?;
                sketch_checked = true;
            }
            min_ratio = min_ratio.min(f.min_diag_ratio);
            block = f.q;
        }
    }

    let aq = op.apply_block(&block, &mut ctx)?;
    let restriction = block.transpose_mul(&aq).symmetrize();

    Ok(SubspaceOutput {
        basis: block,
        restriction,
        matvecs: ctx.matvecs(),
        iterations: q,
        stabilize_period,
        min_r_ratio: min_ratio,
        seed: sketch.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::sym_eig;
    use crate::sketch::{draw_sketch, Distribution, SketchMatrix};

    #[test]
    fn rank_one_operator_collapses_to_e1() {
        let op = SymmetricOperator::diagonal(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let omega = DenseMatrix::from_fn(4, 1, |_, _| 1.0);
        let sketch = SketchMatrix {
            omega,
            distribution: Distribution::Gaussian,
            seed: 0,
        };
        let out = subspace_iterate(&op, &sketch, 1, 1).unwrap();
        assert!((out.basis[(0, 0)].abs() - 1.0).abs() < 1e-14);
        for i in 1..4 {
            assert!(out.basis[(i, 0)].abs() < 1e-14);
        }
        assert!((out.restriction[(0, 0)] - 1.0).abs() < 1e-14);
        assert_eq!(out.matvecs, 2);
    }

    #[test]
    fn identity_restriction_has_unit_spectrum() {
        let n = 8;
        let op = SymmetricOperator::diagonal(vec![1.0; n]).unwrap();
        let sketch = draw_sketch(n, 3, Distribution::Gaussian, 11).unwrap();
        let out = subspace_iterate(&op, &sketch, 1, 1).unwrap();
        let eig = sym_eig(&out.restriction).unwrap();
        for &v in &eig.eigenvalues {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!((out.restriction.trace() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn low_rank_operator_with_oversized_sketch_recovers_trace() {
        // rank(A) = k < l: the run must not fail, and tr(T) = tr(A).
        let n = 30;
        let k = 5;
        let basis = {
            let g = crate::sketch::fill_matrix(n, k, Distribution::Gaussian, 3);
            kernels::thin_qr(&g).unwrap().0
        };
        let lambdas: Vec<f64> = (0..k).map(|j| (k - j) as f64).collect();
        let op = SymmetricOperator::eigen_synthetic(basis, lambdas).unwrap();
        let sketch = draw_sketch(n, 12, Distribution::Gaussian, 21).unwrap();
        let out = subspace_iterate(&op, &sketch, 1, 1).unwrap();
        assert!(out.min_r_ratio <= TOL_RANK_RATIO);
        let exact = op.exact_trace();
        assert!((out.restriction.trace() - exact).abs() <= 1e-10 * exact);
    }

    #[test]
    fn duplicate_rademacher_columns_fail_loudly() {
        // A 2x2 Rademacher sketch with identical columns cannot be repaired
        // by iteration; the sketch itself is rank deficient.
        let omega = DenseMatrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let sketch = SketchMatrix {
            omega,
            distribution: Distribution::Rademacher,
            seed: 0,
        };
        let op = SymmetricOperator::diagonal(vec![2.0, 1.0]).unwrap();
        assert!(matches!(
            subspace_iterate(&op, &sketch, 1, 1),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn matvec_cost_formula() {
        assert_eq!(matvec_cost(30, 1), 60);
        assert_eq!(matvec_cost(60, 3), 240);
    }

    #[test]
    fn matvec_accounting_matches_formula() {
        let n = 16;
        let op = SymmetricOperator::diagonal((1..=n).map(|i| i as f64).collect()).unwrap();
        for (l, q, s) in [(4, 1, 1), (5, 3, 1), (3, 2, 0), (6, 4, 2)] {
            let sketch = draw_sketch(n, l, Distribution::Gaussian, 1000 + q as u64).unwrap();
            let out = subspace_iterate(&op, &sketch, q, s).unwrap();
            assert_eq!(out.matvecs, matvec_cost(l, q), "l={l} q={q} s={s}");
        }
    }

    #[test]
    fn idealized_and_stabilized_agree() {
        let n = 24;
        let basis = {
            let g = crate::sketch::fill_matrix(n, n, Distribution::Gaussian, 8);
            kernels::thin_qr(&g).unwrap().0
        };
        let gamma: f64 = 0.7;
        let lambdas: Vec<f64> = (0..n).map(|j| gamma.powi(j as i32)).collect();
        let op = SymmetricOperator::eigen_synthetic(basis, lambdas).unwrap();
        let tr_a = op.exact_trace();
        for q in 1..=3 {
            let sketch = draw_sketch(n, 6, Distribution::Gaussian, 500 + q as u64).unwrap();
            let ideal = subspace_iterate(&op, &sketch, q, 0).unwrap();
            let stab = subspace_iterate(&op, &sketch, q, 1).unwrap();
            assert!(
                (ideal.restriction.trace() - stab.restriction.trace()).abs() <= 1e-8 * tr_a,
                "q = {q}"
            );
        }
    }

    #[test]
    fn restriction_is_psd_and_interlaces() {
        let n = 20;
        let diag: Vec<f64> = (0..n).map(|j| 1.5f64.powi(-(j as i32)) * 4.0).collect();
        let op = SymmetricOperator::diagonal(diag.clone()).unwrap();
        let sketch = draw_sketch(n, 7, Distribution::Gaussian, 99).unwrap();
        let out = subspace_iterate(&op, &sketch, 2, 1).unwrap();
        let eig = sym_eig(&out.restriction).unwrap();
        let t_norm = eig.eigenvalues[0].abs();
        for (j, &lam_t) in eig.eigenvalues.iter().enumerate() {
            assert!(lam_t >= -1e-9 * t_norm, "negative eigenvalue in T");
            assert!(lam_t <= diag[j] + 1e-9 * diag[0], "interlacing violated at {j}");
        }
    }

    #[test]
    fn basis_invariance_of_trace_and_logdet() {
        let n = 12;
        let op = SymmetricOperator::diagonal((1..=n).map(|i| 1.0 / i as f64).collect()).unwrap();
        let sketch = draw_sketch(n, 4, Distribution::Gaussian, 17).unwrap();
        let out = subspace_iterate(&op, &sketch, 1, 1).unwrap();

        // Rotate the basis by a random orthogonal Z and rebuild T.
        let z = {
            let g = crate::sketch::fill_matrix(4, 4, Distribution::Gaussian, 23);
            kernels::thin_qr(&g).unwrap().0
        };
        let qz = out.basis.mul(&z);
        let mut ctx = MatvecContext::new();
        let aqz = op.apply_block(&qz, &mut ctx).unwrap();
        let t2 = qz.transpose_mul(&aqz).symmetrize();

        assert!((out.restriction.trace() - t2.trace()).abs() <= 1e-10);
        let ld1: f64 = sym_eig(&out.restriction)
            .unwrap()
            .eigenvalues
            .iter()
            .map(|&v| v.max(0.0).ln_1p())
            .sum();
        let ld2: f64 = sym_eig(&t2)
            .unwrap()
            .eigenvalues
            .iter()
            .map(|&v| v.max(0.0).ln_1p())
            .sum();
        assert!((ld1 - ld2).abs() <= 1e-10);
    }
}
