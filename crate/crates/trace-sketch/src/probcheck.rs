//! Empirical verification of the probabilistic claims: pseudo-inverse norm
//! behavior of random projections, tail bounds, and the concentration of
//! the estimator error distribution.
//!
//! Trials are independent given derived seeds (`trial_seed =
//! derive_seed(master_seed, trial_index)`) and fan out across workers;
//! summaries are computed from the full sorted sample, so aggregation is
//! order-independent.

use std::io::Write;

use serde::Serialize;

use crate::bounds::{gaussian_constants, rademacher_constant, rademacher_min_samples};
use crate::error::{Error, Result};
use crate::estimators::{logdet_iplus_from_restriction, trace_from_restriction};
use crate::genmat::GenSpec;
use crate::kernels::{singular_values, DenseMatrix, TOL_RANK_RATIO};
use crate::operators::SymmetricOperator;
use crate::parallel::run_trials;
use crate::rng::{derive_seed, CounterRng};
use crate::sketch::{fill_matrix, interaction_norm, split_rows, Distribution};
use crate::subspace::subspace_iterate;

/// Summary statistics over a batch of trials.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrialSummary {
    pub trials: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// (5%, 50%, 95%) quantiles by nearest rank on the sorted sample.
    pub quantiles: (f64, f64, f64),
    /// Trials whose statistic met or exceeded the threshold under test.
    pub exceed_count: usize,
    /// Trials whose sampled matrix was numerically rank deficient.
    pub rank_deficient_count: usize,
}

impl TrialSummary {
    /// Summarize `values` (one per successful trial). `trials` counts all
    /// attempts including rank-deficient ones, which contribute no value.
    fn from_values(
        mut values: Vec<f64>,
        trials: usize,
        exceed_count: usize,
        rank_deficient_count: usize,
    ) -> Self {
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = values.len();
        let (mean, variance) = if m == 0 {
            (f64::NAN, f64::NAN)
        } else {
            let mean = values.iter().sum::<f64>() / m as f64;
            let var = if m > 1 {
                values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m as f64 - 1.0)
            } else {
                0.0
            };
            (mean, var)
        };
        let quantile = |p: f64| -> f64 {
            if m == 0 {
                f64::NAN
            } else {
                values[(((m - 1) as f64) * p).round() as usize]
            }
        };
        TrialSummary {
            trials,
            mean,
            variance,
            quantiles: (quantile(0.05), quantile(0.5), quantile(0.95)),
            exceed_count,
            rank_deficient_count,
        }
    }
}

/// Per-oversampling results of the pseudo-inverse norm experiment.
#[derive(Debug, Clone, Serialize)]
pub struct PinvRow {
    pub p: usize,
    /// Summary of `||Omega_1^+||_2^2` over the non-deficient trials.
    pub summary: TrialSummary,
}

/// Sample k x (k+p) random matrices and record the squared pseudo-inverse
/// norm and the rank-deficiency rate for each oversampling `p`.
///
/// Rank deficiency means `sigma_k <= 1e-12 sigma_1`; deficient draws have
/// no finite pseudo-inverse norm and are excluded from the moment
/// statistics but counted in `rank_deficient_count`.
pub fn pinv_norm_experiment(
    k: usize,
    p_values: &[usize],
    dist: Distribution,
    trials: usize,
    seed: u64,
) -> Result<Vec<PinvRow>> {
    if trials < 1 {
        return Err(Error::BadParameter("trials must be at least 1".into()));
    }
    if k < 1 {
        return Err(Error::BadParameter("k must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(p_values.len());
    for (pi, &p) in p_values.iter().enumerate() {
        let samples = run_trials(trials, |t| {
            let trial_seed = derive_seed(seed, (pi * trials + t) as u64);
            let omega1 = fill_matrix(k, k + p, dist, trial_seed);
            let sigmas = singular_values(&omega1);
            let sigma_1 = sigmas[0];
            let sigma_k = sigmas[k - 1];
            if sigma_1 <= 0.0 || sigma_k <= TOL_RANK_RATIO * sigma_1 {
                None
            } else {
                Some(1.0 / (sigma_k * sigma_k))
            }
        });
        let deficient = samples.iter().filter(|v| v.is_none()).count();
        let values: Vec<f64> = samples.into_iter().flatten().collect();
        rows.push(PinvRow {
            p,
            summary: TrialSummary::from_values(values, trials, 0, deficient),
        });
    }
    Ok(rows)
}

/// Which tail inequality to sample.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum TailBoundKind {
    /// `||G^+|| >= e sqrt(k+p)/(p+1) * t` for Gaussian k x (k+p) G has
    /// probability at most `t^-(p+1)`; requires `p >= 2`, `t >= 1`.
    GaussianPinv { k: usize, p: usize, t: f64 },
    /// `||V^T z|| >= sqrt(r) + sqrt(8 log(1/delta))` for an n x r
    /// orthonormal V and Rademacher z has probability at most `delta`.
    RademacherColumnNorm {
        n: usize,
        r: usize,
        delta: f64,
        basis_seed: u64,
    },
    /// `||Omega_2||^2 ||Omega_1^+||^2 >= C_g` has probability at most
    /// `delta` for Gaussian sketches; requires `p >= 4`.
    GaussianInteraction {
        n: usize,
        k: usize,
        p: usize,
        delta: f64,
    },
    /// `||Omega_2||^2 ||Omega_1^+||^2 >= C_r` has probability at most
    /// `delta` for Rademacher sketches with `l >= rademacher_min_samples`.
    RademacherInteraction {
        n: usize,
        k: usize,
        l: usize,
        delta: f64,
        rho: f64,
    },
}

/// Result of sampling a tail inequality.
#[derive(Debug, Clone, Serialize)]
pub struct TailCheck {
    pub summary: TrialSummary,
    /// The deterministic threshold of the inequality.
    pub threshold: f64,
    /// The probability the inequality assigns to exceeding the threshold.
    pub nominal: f64,
}

/// Sample the statistic of a tail inequality and report the empirical
/// exceedance against the nominal probability.
///
/// Interaction checks use the identity eigenbasis split (`Omega_1` is the
/// top k rows of the raw random matrix), which matches how the bounds are
/// exercised on synthetic spectra.
pub fn tail_bound_check(kind: TailBoundKind, trials: usize, seed: u64) -> Result<TailCheck> {
    if trials < 1 {
        return Err(Error::BadParameter("trials must be at least 1".into()));
    }
    match kind {
        TailBoundKind::GaussianPinv { k, p, t } => {
            if p < 2 {
                return Err(Error::OversamplingTooSmall { p, min: 2 });
            }
            if t < 1.0 {
                return Err(Error::BadParameter(format!("t must be >= 1, got {t}")));
            }
            let threshold =
                std::f64::consts::E * ((k + p) as f64).sqrt() / (p + 1) as f64 * t;
            let nominal = t.powi(-(p as i32 + 1));
            let samples = run_trials(trials, |i| {
                let g = fill_matrix(k, k + p, Distribution::Gaussian, derive_seed(seed, i as u64));
                let sigmas = singular_values(&g);
                let sigma_k = sigmas[k - 1];
                if sigma_k > 0.0 {
                    1.0 / sigma_k
                } else {
                    f64::INFINITY
                }
            });
            Ok(summarize_against_threshold(samples, trials, threshold, nominal))
        }
        TailBoundKind::RademacherColumnNorm {
            n,
            r,
            delta,
            basis_seed,
        } => {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::BadParameter(format!("delta must be in (0,1), got {delta}")));
            }
            let v = crate::genmat::random_orthogonal(n, r, basis_seed)?;
            let threshold = (r as f64).sqrt() + (8.0 * (1.0 / delta).ln()).sqrt();
            let samples = run_trials(trials, |i| {
                let rng = CounterRng::new(derive_seed(seed, i as u64));
                let z = DenseMatrix::from_fn(n, 1, |row, _| rng.sign(row as u64));
                v.transpose_mul(&z).frobenius_norm()
            });
            Ok(summarize_against_threshold(samples, trials, threshold, delta))
        }
        TailBoundKind::GaussianInteraction { n, k, p, delta } => {
            let c_g = gaussian_constants(n, k, p, Some(delta))?.c_g.unwrap();
            let samples =
                interaction_samples(n, k, k + p, Distribution::Gaussian, trials, seed);
            Ok(summarize_against_threshold(samples, trials, c_g, delta))
        }
        TailBoundKind::RademacherInteraction {
            n,
            k,
            l,
            delta,
            rho,
        } => {
            let min_l = rademacher_min_samples(n, k, delta, rho)?;
            if (l as u64) < min_l {
                return Err(Error::BadParameter(format!(
                    "l = {l} is below the required sample count {min_l}"
                )));
            }
            let c_r = rademacher_constant(n, k, l, delta, rho)?;
            let samples = interaction_samples(n, k, l, Distribution::Rademacher, trials, seed);
            Ok(summarize_against_threshold(samples, trials, c_r, delta))
        }
    }
}

fn interaction_samples(
    n: usize,
    k: usize,
    l: usize,
    dist: Distribution,
    trials: usize,
    seed: u64,
) -> Vec<f64> {
    run_trials(trials, |i| {
        let omega = fill_matrix(n, l, dist, derive_seed(seed, i as u64));
        let pair = split_rows(&omega, k).expect("k < n by construction");
        match interaction_norm(&pair) {
            Ok(norms) => norms.omega2_norm * norms.omega2_norm
                * norms.omega1_pinv_norm * norms.omega1_pinv_norm,
            // A rank-deficient projection has an unbounded pseudo-inverse
            // norm; it exceeds any threshold.
            Err(_) => f64::INFINITY,
        }
    })
}

fn summarize_against_threshold(
    samples: Vec<f64>,
    trials: usize,
    threshold: f64,
    nominal: f64,
) -> TailCheck {
    let exceed = samples.iter().filter(|&&v| v >= threshold).count();
    let deficient = samples.iter().filter(|&&v| v.is_infinite()).count();
    let finite: Vec<f64> = samples.into_iter().filter(|v| v.is_finite()).collect();
    TailCheck {
        summary: TrialSummary::from_values(finite, trials, exceed, deficient),
        threshold,
        nominal,
    }
}

/// Estimator configuration for the error-distribution study.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EstimatorConfig {
    pub distribution: Distribution,
    /// Number of sketch columns l.
    pub samples: usize,
    /// Power iterations q.
    pub iterations: usize,
    /// Re-orthogonalization period (0 = idealized).
    pub stabilize_period: usize,
}

/// Empirical distribution of the relative errors of both estimators.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorDistribution {
    pub trace: TrialSummary,
    pub logdet: TrialSummary,
    /// Per-trial relative trace errors, trial order.
    pub trace_values: Vec<f64>,
    /// Per-trial relative logdet errors, trial order.
    pub logdet_values: Vec<f64>,
    /// (left bin edge, count) pairs over the observed range.
    pub trace_histogram: Vec<(f64, u64)>,
    pub logdet_histogram: Vec<(f64, u64)>,
}

/// Run the estimator `trials` times on the generated operator and collect
/// the distribution of relative errors for trace and logdet(I + A).
pub fn error_distribution(
    gen: &GenSpec,
    config: &EstimatorConfig,
    trials: usize,
    bins: usize,
    seed: u64,
) -> Result<ErrorDistribution> {
    if trials < 1 {
        return Err(Error::BadParameter("trials must be at least 1".into()));
    }
    if bins < 1 {
        return Err(Error::BadParameter("bins must be at least 1".into()));
    }
    let op = gen.build()?;
    let exact_trace = op.exact_trace();
    let exact_logdet = op.exact_logdet_iplus()?;
    if exact_trace <= 0.0 || exact_logdet <= 0.0 {
        return Err(Error::ZeroTrace);
    }

    let pairs = run_trials(trials, |t| -> Result<(f64, f64)> {
        let (dt, dl) = single_run_errors(
            &op,
            config,
            derive_seed(seed, t as u64),
            exact_trace,
            exact_logdet,
        )?;
        Ok((dt, dl))
    });
    let mut trace_values = Vec::with_capacity(trials);
    let mut logdet_values = Vec::with_capacity(trials);
    for pair in pairs {
        let (dt, dl) = pair?;
        trace_values.push(dt);
        logdet_values.push(dl);
    }

    Ok(ErrorDistribution {
        trace: TrialSummary::from_values(trace_values.clone(), trials, 0, 0),
        logdet: TrialSummary::from_values(logdet_values.clone(), trials, 0, 0),
        trace_histogram: histogram(&trace_values, bins),
        logdet_histogram: histogram(&logdet_values, bins),
        trace_values,
        logdet_values,
    })
}

/// One estimator run; returns the relative errors (Delta_t, Delta_l).
pub fn single_run_errors(
    op: &SymmetricOperator,
    config: &EstimatorConfig,
    trial_seed: u64,
    exact_trace: f64,
    exact_logdet: f64,
) -> Result<(f64, f64)> {
    let sketch = crate::sketch::draw_sketch(op.dim(), config.samples, config.distribution, trial_seed)?;
    let out = subspace_iterate(op, &sketch, config.iterations, config.stabilize_period)?;
    let dt = (exact_trace - trace_from_restriction(&out).value) / exact_trace;
    let dl = (exact_logdet - logdet_iplus_from_restriction(&out)?.value) / exact_logdet;
    Ok((dt, dl))
}

/// Histogram with `bins` uniform bins over the observed range, emitted as
/// (left edge, count). The maximum lands in the last bin; a degenerate
/// range yields a single bin holding everything.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, u64)> {
    if values.is_empty() {
        return Vec::new();
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![(lo, values.len() as u64)];
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        let mut idx = ((v - lo) / width) as usize;
        if idx >= bins {
            idx = bins - 1;
        }
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + i as f64 * width, c))
        .collect()
}

/// Write per-trial values as a one-column CSV.
pub fn write_values_csv<W: Write>(w: &mut W, name: &str, values: &[f64]) -> std::io::Result<()> {
    writeln!(w, "trial,{name}")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(w, "{i},{v:.17e}")?;
    }
    Ok(())
}

/// Write a histogram as (bin_edge, count) CSV.
pub fn write_histogram_csv<W: Write>(w: &mut W, hist: &[(f64, u64)]) -> std::io::Result<()> {
    writeln!(w, "bin_edge,count")?;
    for (edge, count) in hist {
        writeln!(w, "{edge:.17e},{count}")?;
    }
    Ok(())
}

/// `nominal + 3 sqrt(nominal / trials)`: the acceptance slack for comparing
/// an empirical exceedance fraction against a tail probability.
pub fn binomial_slack(nominal: f64, trials: usize) -> f64 {
    nominal + 3.0 * (nominal / trials as f64).sqrt()
}
