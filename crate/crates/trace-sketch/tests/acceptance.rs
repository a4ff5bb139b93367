//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (visible with `cargo test --test acceptance -- --nocapture`).

use std::sync::OnceLock;
use std::time::Instant;

use trace_sketch::bounds::{
    delta_ratio, gaussian_constants, logdet_bounds_structural, oversampling_for_delta,
    probabilistic_trace_upper, rademacher_min_samples, trace_bounds_structural,
    ProbabilisticConstant, SpectrumModel,
};
use trace_sketch::estimators::{logdet_iplus_from_restriction, trace_from_restriction};
use trace_sketch::experiments::{concentration_experiment, gap_experiment, mc_compare_experiment};
use trace_sketch::genmat::{geometric_matrix, outer_sum_matrix, random_orthogonal, OuterSumSpec};
use trace_sketch::kernels::{sym_eig, DenseMatrix};
use trace_sketch::operators::SymmetricOperator;
use trace_sketch::probcheck::{binomial_slack, tail_bound_check, TailBoundKind};
use trace_sketch::rng::{derive_seed, CounterRng};
use trace_sketch::sketch::{draw_sketch, interaction_norm, split_projections, Distribution};
use trace_sketch::subspace::{matvec_cost, subspace_iterate};

const MASTER_SEED: u64 = 20240811;

fn report(criterion: &str, pass: bool, detail: &str, started: Instant) {
    println!(
        "acceptance {criterion}: {} ({detail}; {:.1}s)",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

/// Criterion 1: the exactly-rank-40 operator is recovered to machine
/// precision with l = 60 samples, for both distributions.
#[test]
fn criterion_1_exact_rank_recovery() {
    let started = Instant::now();
    let spec = OuterSumSpec {
        n: 5000,
        h: 2.0,
        l: 0.0,
        density: 0.025,
        split: 40,
        total_rank: 300,
        seed: derive_seed(MASTER_SEED, 1),
    };
    let op = outer_sum_matrix(&spec).unwrap();
    let exact_trace = op.exact_trace();
    let exact_logdet = op.exact_logdet_iplus().unwrap();

    let mut worst: f64 = 0.0;
    for (i, dist) in [Distribution::Gaussian, Distribution::Rademacher].into_iter().enumerate() {
        let sketch = draw_sketch(5000, 60, dist, derive_seed(MASTER_SEED, 10 + i as u64)).unwrap();
        let out = subspace_iterate(&op, &sketch, 1, 1).unwrap();
        let tr_err = (exact_trace - trace_from_restriction(&out).value).abs() / exact_trace;
        let ld_err =
            (exact_logdet - logdet_iplus_from_restriction(&out).unwrap().value).abs() / exact_logdet;
        worst = worst.max(tr_err).max(ld_err);
    }
    report(
        "1 exact-rank recovery",
        worst <= 1e-10,
        &format!("worst relative error {worst:.2e} (tolerance 1e-10)"),
        started,
    );
}

struct CorpusStats {
    pairs: usize,
    sandwich_violations: usize,
    interlacing_violations: usize,
    monotonicity_violations: usize,
    worst_margin: f64,
}

fn corpus() -> &'static CorpusStats {
    static CORPUS: OnceLock<CorpusStats> = OnceLock::new();
    CORPUS.get_or_init(run_corpus)
}

/// 1000 random (dense SPD matrix of order <= 64, seed) pairs with a strict
/// gap at k, checking the structural sandwich, interlacing, and
/// monotonicity on every run.
fn run_corpus() -> CorpusStats {
    let rng = CounterRng::new(derive_seed(MASTER_SEED, 2));
    let pairs = 1000;
    let mut sandwich = 0;
    let mut interlacing = 0;
    let mut monotonicity = 0;
    let mut worst_margin = f64::INFINITY;

    for t in 0..pairs {
        let c = (t as u64) * 16;
        let n = 8 + (rng.value(c) % 57) as usize; // 8..=64
        let k = 1 + (rng.value(c + 1) % (n as u64 / 3).max(1)) as usize;
        let l_max = (n - k).min(k + 8);
        let l = k + (rng.value(c + 2) % (l_max - k + 1) as u64) as usize;
        let q = 1 + (rng.value(c + 3) % 3) as usize;

        // Spectrum: sorted uniforms in (0.1, 1.1], dominant block scaled up
        // to guarantee a strict gap at k.
        let mut lambdas: Vec<f64> = (0..n)
            .map(|j| 0.1 + rng.uniform(c + 8 + j as u64 * 7))
            .collect();
        lambdas.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for lam in lambdas.iter_mut().take(k) {
            *lam *= 2.0;
        }

        let basis = random_orthogonal(n, n, derive_seed(MASTER_SEED, 3000 + t as u64)).unwrap();
        let synthetic =
            SymmetricOperator::eigen_synthetic(basis.clone(), lambdas.clone()).unwrap();
        let dense = SymmetricOperator::dense(synthetic.to_dense().unwrap()).unwrap();
        let spectrum = SpectrumModel::new(lambdas.clone(), k).unwrap();

        let sketch = draw_sketch(n, l, Distribution::Gaussian, derive_seed(MASTER_SEED, 4000 + t as u64)).unwrap();
        let out = subspace_iterate(&dense, &sketch, q, 1).unwrap();

        let exact_trace: f64 = lambdas.iter().sum();
        let exact_logdet: f64 = lambdas.iter().map(|&v| v.ln_1p()).sum();
        let est_trace = trace_from_restriction(&out).value;
        let est_logdet = logdet_iplus_from_restriction(&out).unwrap().value;
        let trace_err = exact_trace - est_trace;
        let logdet_err = exact_logdet - est_logdet;

        // Realized interaction norm against the construction eigenbasis.
        let u1 = basis.leading_columns(k);
        let u2 = DenseMatrix::from_fn(n, n - k, |i, j| basis[(i, j + k)]);
        let pair = split_projections(&u1, &u2, &sketch).unwrap();
        let w = match interaction_norm(&pair) {
            Ok(norms) => norms.interaction,
            Err(_) => continue, // rank condition violated; excluded by construction
        };

        let tb = trace_bounds_structural(&spectrum, q, w, Some(l)).unwrap();
        let lb = logdet_bounds_structural(&spectrum, q, w, Some(l)).unwrap();
        let slack_t = 1e-9 * exact_trace.max(1.0);
        let slack_l = 1e-9 * exact_logdet.max(1.0);
        if !(trace_err >= tb.lower - slack_t && trace_err <= tb.chosen_upper + slack_t) {
            sandwich += 1;
        }
        if !(logdet_err >= lb.lower - slack_l && logdet_err <= lb.chosen_upper + slack_l) {
            sandwich += 1;
        }
        worst_margin = worst_margin
            .min(tb.chosen_upper - trace_err)
            .min(trace_err - tb.lower)
            .min(lb.chosen_upper - logdet_err)
            .min(logdet_err - lb.lower);

        // Interlacing: lambda_j(T) <= lambda_j(A).
        let t_eig = sym_eig(&out.restriction).unwrap();
        let tol = 1e-9 * lambdas[0];
        for (j, &lam_t) in t_eig.eigenvalues.iter().enumerate() {
            if lam_t > lambdas[j] + tol {
                interlacing += 1;
                break;
            }
        }
        if est_trace > exact_trace + slack_t || est_logdet > exact_logdet + slack_l {
            monotonicity += 1;
        }
    }

    CorpusStats {
        pairs,
        sandwich_violations: sandwich,
        interlacing_violations: interlacing,
        monotonicity_violations: monotonicity,
        worst_margin,
    }
}

/// Criterion 2: deterministic sandwich property, zero violations.
#[test]
fn criterion_2_structural_sandwich() {
    let started = Instant::now();
    let stats = corpus();
    report(
        "2 structural sandwich",
        stats.sandwich_violations == 0,
        &format!(
            "{} pairs, {} violations, tightest margin {:.2e}",
            stats.pairs, stats.sandwich_violations, stats.worst_margin
        ),
        started,
    );
}

/// Criterion 3: interlacing and monotonicity, zero violations.
#[test]
fn criterion_3_interlacing_and_monotonicity() {
    let started = Instant::now();
    let stats = corpus();
    report(
        "3 interlacing/monotonicity",
        stats.interlacing_violations == 0 && stats.monotonicity_violations == 0,
        &format!(
            "{} pairs, {} interlacing violations, {} monotonicity violations",
            stats.pairs, stats.interlacing_violations, stats.monotonicity_violations
        ),
        started,
    );
}

/// Criterion 4: probabilistic bound coverage for Gaussian sketches, and
/// the Rademacher tail at its required sample count.
#[test]
fn criterion_4_probabilistic_coverage() {
    let started = Instant::now();
    let n = 128;
    let k = 10;
    let p = 20;
    let delta = 0.1;
    let gamma = 0.9;
    let trials = 1000;

    let op = geometric_matrix(n, gamma, derive_seed(MASTER_SEED, 5)).unwrap();
    let exact_trace = op.exact_trace();
    let spectrum = SpectrumModel::geometric(n, gamma, k).unwrap();
    let upper = probabilistic_trace_upper(
        &spectrum,
        1,
        &ProbabilisticConstant::GaussianConcentration { p, delta },
    )
    .unwrap();

    let mut exceed = 0;
    for t in 0..trials {
        let sketch =
            draw_sketch(n, k + p, Distribution::Gaussian, derive_seed(MASTER_SEED, 6000 + t)).unwrap();
        let out = subspace_iterate(&op, &sketch, 1, 1).unwrap();
        let err = exact_trace - trace_from_restriction(&out).value;
        if err > upper {
            exceed += 1;
        }
    }
    let gaussian_ok = (exceed as f64) / (trials as f64) <= delta;

    // Rademacher side: at l = k + 20 the required sample count is far
    // larger, so the theorem's bound is vacuous there. Evaluate it at its
    // own minimum sample count on a k = 5 instance and require the
    // interaction statistic never to exceed C_r.
    let rho = 8.0 / 9.0;
    let small_k = 5;
    let min_l = rademacher_min_samples(n, small_k, delta, rho).unwrap() as usize;
    assert!(
        (rademacher_min_samples(n, k, delta, rho).unwrap() as usize) > k + 20,
        "expected the k + 20 Rademacher configuration to be vacuous"
    );
    let check = tail_bound_check(
        TailBoundKind::RademacherInteraction {
            n,
            k: small_k,
            l: min_l,
            delta,
            rho,
        },
        200,
        derive_seed(MASTER_SEED, 7),
    )
    .unwrap();
    let rademacher_ok = check.summary.exceed_count == 0;

    report(
        "4 probabilistic coverage",
        gaussian_ok && rademacher_ok,
        &format!(
            "gaussian exceedance {exceed}/{trials} (allowed {:.0}%), rademacher exceedances {}/200 at l = {min_l}",
            delta * 100.0,
            check.summary.exceed_count
        ),
        started,
    );
}

/// Criterion 5: error grows with gamma at fixed l = 50 and stays below the
/// simplified bound at C = C_g(delta = 0.1).
#[test]
fn criterion_5_gap_experiment_shape() {
    let started = Instant::now();
    let rows = gap_experiment(
        128,
        &[0.86, 0.90, 0.94, 0.98],
        &[30],
        20,
        1,
        Distribution::Gaussian,
        20,
        0.1,
        derive_seed(MASTER_SEED, 8),
    )
    .unwrap();
    assert_eq!(rows.len(), 4);
    let mut monotone = true;
    let mut bounded = true;
    for pair in rows.windows(2) {
        if pair[1].median_trace_err <= pair[0].median_trace_err {
            monotone = false;
        }
    }
    for row in &rows {
        if row.median_trace_err > row.simplified_bound {
            bounded = false;
        }
    }
    let medians: Vec<String> = rows
        .iter()
        .map(|r| format!("{:.2e}@{}", r.median_trace_err, r.gamma))
        .collect();
    report(
        "5 gap-experiment shape",
        monotone && bounded,
        &format!("medians {} (monotone: {monotone}, bounded: {bounded})", medians.join(", ")),
        started,
    );
}

/// Criterion 6: subspace beats Hutchinson at matched sample counts for
/// every k >= 20 on the gamma = 0.9 matrix.
#[test]
fn criterion_6_mc_comparison() {
    let started = Instant::now();
    let ks = [20, 30, 40, 50, 60, 70, 80];
    let rows = mc_compare_experiment(
        128,
        0.9,
        &ks,
        20,
        1,
        100,
        derive_seed(MASTER_SEED, 9),
    )
    .unwrap();
    let mut all_better = true;
    let mut detail = String::new();
    for row in &rows {
        if row.subspace_trace_err >= row.hutchinson_trace_err {
            all_better = false;
        }
        detail.push_str(&format!(
            "k={}: {:.1e} vs {:.1e}; ",
            row.k, row.subspace_trace_err, row.hutchinson_trace_err
        ));
    }
    report("6 mc comparison", all_better, detail.trim_end(), started);
}

/// Criterion 7: constant cross-checks and exact matvec accounting.
#[test]
fn criterion_7_constant_cross_checks() {
    let started = Instant::now();
    let delta = 2.0 / std::f64::consts::E;
    let c = gaussian_constants(128, 10, 20, Some(delta)).unwrap();
    let ratio = c.c_g.unwrap() / c.c_ge;
    let ratio_ok = (1.5..=1.7).contains(&ratio);

    let oversampling_ok = oversampling_for_delta(1e-16) == 16;

    let op = geometric_matrix(64, 0.8, derive_seed(MASTER_SEED, 11)).unwrap();
    let mut matvec_ok = true;
    for (l, q) in [(5, 1), (12, 2), (20, 3), (30, 1)] {
        let sketch =
            draw_sketch(64, l, Distribution::Gaussian, derive_seed(MASTER_SEED, 12 + q as u64)).unwrap();
        let out = subspace_iterate(&op, &sketch, q, 1).unwrap();
        if out.matvecs != matvec_cost(l, q) {
            matvec_ok = false;
        }
    }
    report(
        "7 constant cross-checks",
        ratio_ok && oversampling_ok && matvec_ok,
        &format!("C_g/C_ge = {ratio:.4}, p(1e-16) = {}, matvecs exact: {matvec_ok}", oversampling_for_delta(1e-16)),
        started,
    );
}

/// Criterion 8: concentration of measure at desk scale; mean and variance
/// fall with l, Gaussian and Rademacher agree within 3 pooled standard
/// errors.
#[test]
fn criterion_8_concentration() {
    let started = Instant::now();
    let trials = 10_000;
    let cells = concentration_experiment(
        128,
        0.9,
        &[30, 50, 70],
        1,
        trials,
        50,
        derive_seed(MASTER_SEED, 13),
    )
    .unwrap();

    let mut monotone = true;
    for dist in [Distribution::Gaussian, Distribution::Rademacher] {
        let series: Vec<_> = cells.iter().filter(|c| c.dist == dist).collect();
        assert_eq!(series.len(), 3);
        for pair in series.windows(2) {
            if !(pair[1].errors.trace.mean < pair[0].errors.trace.mean
                && pair[1].errors.trace.variance < pair[0].errors.trace.variance)
            {
                monotone = false;
            }
        }
    }

    let mut agree = true;
    let mut detail = String::new();
    for ell in [30usize, 50, 70] {
        let g = cells
            .iter()
            .find(|c| c.dist == Distribution::Gaussian && c.ell == ell)
            .unwrap();
        let r = cells
            .iter()
            .find(|c| c.dist == Distribution::Rademacher && c.ell == ell)
            .unwrap();
        let se = (g.errors.trace.variance / trials as f64
            + r.errors.trace.variance / trials as f64)
            .sqrt();
        let diff = (g.errors.trace.mean - r.errors.trace.mean).abs();
        if diff >= 3.0 * se {
            agree = false;
        }
        detail.push_str(&format!("l={ell}: diff {:.1}se; ", diff / se));
    }
    report(
        "8 concentration",
        monotone && agree,
        &format!("monotone: {monotone}; {}", detail.trim_end()),
        started,
    );
}

/// Criterion 9: appendix tail bounds, empirical exceedance within binomial
/// slack of nominal.
#[test]
fn criterion_9_tail_bounds() {
    let started = Instant::now();
    let trials = 2000;

    let gauss = tail_bound_check(
        TailBoundKind::GaussianPinv {
            k: 10,
            p: 20,
            t: 2.0,
        },
        trials,
        derive_seed(MASTER_SEED, 14),
    )
    .unwrap();
    let gauss_frac = gauss.summary.exceed_count as f64 / trials as f64;
    let gauss_ok = gauss_frac <= binomial_slack(gauss.nominal, trials);

    let rad = tail_bound_check(
        TailBoundKind::RademacherColumnNorm {
            n: 64,
            r: 5,
            delta: 0.05,
            basis_seed: derive_seed(MASTER_SEED, 15),
        },
        trials,
        derive_seed(MASTER_SEED, 16),
    )
    .unwrap();
    let rad_frac = rad.summary.exceed_count as f64 / trials as f64;
    let rad_ok = rad_frac <= binomial_slack(0.05, trials);

    report(
        "9 appendix tail bounds",
        gauss_ok && rad_ok,
        &format!(
            "gauss-pinv exceedance {:.1e} (nominal {:.1e}), rad-col-norm exceedance {:.3} (nominal 0.05)",
            gauss_frac, gauss.nominal, rad_frac
        ),
        started,
    );
}
