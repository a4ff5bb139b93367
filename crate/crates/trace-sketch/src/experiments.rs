//! Experiment drivers behind the CLI `experiment` subcommand.
//!
//! Each driver sweeps a parameter, runs seeded trials, and returns one row
//! per sweep point, sorted by sweep key. The CLI turns rows into CSV; the
//! acceptance suite calls the same drivers directly.

use serde::Serialize;

use crate::bounds::{gaussian_constants, simplified_rel_bound, SpectrumModel};
use crate::error::{Error, Result};
use crate::estimators::{
    gaussian_trace_mc, hutchinson_trace, logdet_iplus_from_restriction, trace_from_restriction,
};
use crate::genmat::{geometric_matrix, outer_sum_matrix, OuterSumSpec};
use crate::kernels::DenseMatrix;
use crate::operators::SymmetricOperator;
use crate::parallel::run_trials;
use crate::probcheck::{error_distribution, ErrorDistribution, EstimatorConfig};
use crate::rng::derive_seed;
use crate::sketch::{draw_sketch, interaction_norm, split_projections, Distribution, ProjectionPair};
use crate::subspace::subspace_iterate;

/// Nearest-rank median of a sample.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[(values.len() - 1) / 2]
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapRow {
    pub gamma: f64,
    pub k: usize,
    pub ell: usize,
    pub median_trace_err: f64,
    pub median_logdet_err: f64,
    /// Simplified relative bound evaluated with the concentration constant.
    pub simplified_bound: f64,
}

/// Effect of the eigenvalue gap: relative errors on geometric matrices
/// across `gammas` and split indices `ks`, with `l = k + p`.
pub fn gap_experiment(
    n: usize,
    gammas: &[f64],
    ks: &[usize],
    p: usize,
    q: usize,
    dist: Distribution,
    trials: usize,
    delta: f64,
    seed: u64,
) -> Result<Vec<GapRow>> {
    let mut rows = Vec::new();
    for (gi, &gamma) in gammas.iter().enumerate() {
        let op = geometric_matrix(n, gamma, derive_seed(seed, gi as u64))?;
        let exact_trace = op.exact_trace();
        let exact_logdet = op.exact_logdet_iplus()?;
        for &k in ks {
            let ell = k + p;
            if ell > n {
                return Err(Error::BadParameter(format!(
                    "l = k + p = {ell} exceeds n = {n}"
                )));
            }
            let cell_seed = derive_seed(seed, (1000 + gi * ks.len() + rank_of(ks, k)) as u64);
            let (mut dts, mut dls) = run_cell(&op, dist, ell, q, trials, cell_seed, exact_trace, exact_logdet)?;
            let c_g = gaussian_constants(n, k, p.max(4), Some(delta))?.c_g.unwrap();
            rows.push(GapRow {
                gamma,
                k,
                ell,
                median_trace_err: median(&mut dts),
                median_logdet_err: median(&mut dls),
                simplified_bound: simplified_rel_bound(gamma, n, k, q, c_g),
            });
        }
    }
    rows.sort_by(|a, b| (a.gamma, a.k).partial_cmp(&(b.gamma, b.k)).unwrap());
    Ok(rows)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct McCompareRow {
    pub k: usize,
    pub ell: usize,
    pub subspace_trace_err: f64,
    pub subspace_logdet_err: f64,
    pub hutchinson_trace_err: f64,
    pub gaussian_trace_err: f64,
    pub hutchinson_logdet_err: f64,
    pub gaussian_logdet_err: f64,
}

/// Subspace estimators against Monte Carlo baselines at matched sample
/// counts (`N = l = k + p`), median relative error over seeded trials.
pub fn mc_compare_experiment(
    n: usize,
    gamma: f64,
    ks: &[usize],
    p: usize,
    q: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<McCompareRow>> {
    let op = geometric_matrix(n, gamma, derive_seed(seed, 0))?;
    let exact_trace = op.exact_trace();
    let exact_logdet = op.exact_logdet_iplus()?;
    // The Monte Carlo logdet route probes log(I + A); build it once.
    let log_op = op.dense_log_iplus()?;

    let mut rows = Vec::new();
    for (ki, &k) in ks.iter().enumerate() {
        let ell = k + p;
        if ell > n {
            return Err(Error::BadParameter(format!("l = k + p = {ell} exceeds n = {n}")));
        }
        let cell_seed = derive_seed(seed, 1 + ki as u64);
        let (mut dts, mut dls) = run_cell(
            &op,
            Distribution::Gaussian,
            ell,
            q,
            trials,
            cell_seed,
            exact_trace,
            exact_logdet,
        )?;

        let mc = run_trials(trials, |t| -> Result<(f64, f64, f64, f64)> {
            let s = derive_seed(cell_seed, (trials + t) as u64);
            let hutch = hutchinson_trace(&op, ell, s)?.value;
            let gauss = gaussian_trace_mc(&op, ell, derive_seed(s, 1))?.value;
            let hutch_ld = hutchinson_trace(&log_op, ell, derive_seed(s, 2))?.value;
            let gauss_ld = gaussian_trace_mc(&log_op, ell, derive_seed(s, 3))?.value;
            Ok((
                (hutch - exact_trace).abs() / exact_trace,
                (gauss - exact_trace).abs() / exact_trace,
                (hutch_ld - exact_logdet).abs() / exact_logdet,
                (gauss_ld - exact_logdet).abs() / exact_logdet,
            ))
        });
        let mut hutch_errs = Vec::with_capacity(trials);
        let mut gauss_errs = Vec::with_capacity(trials);
        let mut hutch_ld_errs = Vec::with_capacity(trials);
        let mut gauss_ld_errs = Vec::with_capacity(trials);
        for r in mc {
            let (h, g, hl, gl) = r?;
            hutch_errs.push(h);
            gauss_errs.push(g);
            hutch_ld_errs.push(hl);
            gauss_ld_errs.push(gl);
        }

        rows.push(McCompareRow {
            k,
            ell,
            subspace_trace_err: median(&mut dts),
            subspace_logdet_err: median(&mut dls),
            hutchinson_trace_err: median(&mut hutch_errs),
            gaussian_trace_err: median(&mut gauss_errs),
            hutchinson_logdet_err: median(&mut hutch_ld_errs),
            gaussian_logdet_err: median(&mut gauss_ld_errs),
        });
    }
    rows.sort_by_key(|r| r.k);
    Ok(rows)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SubspaceQRow {
    pub q: usize,
    pub k: usize,
    pub ell: usize,
    pub median_trace_err: f64,
    pub median_logdet_err: f64,
}

/// Effect of the iteration count `q` at zero oversampling (`l = k`).
pub fn subspace_q_experiment(
    n: usize,
    gamma: f64,
    ks: &[usize],
    qs: &[usize],
    dist: Distribution,
    trials: usize,
    seed: u64,
) -> Result<Vec<SubspaceQRow>> {
    let op = geometric_matrix(n, gamma, derive_seed(seed, 0))?;
    let exact_trace = op.exact_trace();
    let exact_logdet = op.exact_logdet_iplus()?;
    let mut rows = Vec::new();
    for (qi, &q) in qs.iter().enumerate() {
        for (ki, &k) in ks.iter().enumerate() {
            let cell_seed = derive_seed(seed, 1 + (qi * ks.len() + ki) as u64);
            let (mut dts, mut dls) =
                run_cell(&op, dist, k, q, trials, cell_seed, exact_trace, exact_logdet)?;
            rows.push(SubspaceQRow {
                q,
                k,
                ell: k,
                median_trace_err: median(&mut dts),
                median_logdet_err: median(&mut dls),
            });
        }
    }
    rows.sort_by_key(|r| (r.q, r.k));
    Ok(rows)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundQualityRow {
    pub dist: Distribution,
    pub k: usize,
    pub ell: usize,
    pub median_rel_err: f64,
    /// First structural upper bound over tr(A), median across trials.
    pub median_est1: f64,
    /// Second structural upper bound over tr(A), median across trials
    /// (NaN when never valid).
    pub median_est2: f64,
    /// Residual mass ratio, the theoretical optimum.
    pub delta: f64,
}

/// Realized trace errors against the two structural upper bounds evaluated
/// with the per-trial interaction norm.
pub fn bound_quality_experiment(
    n: usize,
    gamma: f64,
    ks: &[usize],
    p: usize,
    q: usize,
    dists: &[Distribution],
    trials: usize,
    seed: u64,
) -> Result<Vec<BoundQualityRow>> {
    let basis_seed = derive_seed(seed, 0);
    let op = geometric_matrix(n, gamma, basis_seed)?;
    let basis = match &op {
        SymmetricOperator::EigenSynthetic { basis, .. } => basis.clone(),
        _ => unreachable!("geometric operators are eigen-synthetic"),
    };
    let exact_trace = op.exact_trace();

    let mut rows = Vec::new();
    for (di, &dist) in dists.iter().enumerate() {
        for (ki, &k) in ks.iter().enumerate() {
            let ell = k + p;
            if ell > n {
                return Err(Error::BadParameter(format!("l = k + p = {ell} exceeds n = {n}")));
            }
            let spectrum = SpectrumModel::geometric(n, gamma, k)?;
            let tail = spectrum.trace_tail();
            let u1 = basis.leading_columns(k);
            let u2 = DenseMatrix::from_fn(n, n - k, |i, j| basis[(i, j + k)]);
            let cell_seed = derive_seed(seed, 1 + (di * ks.len() + ki) as u64);

            let results = run_trials(trials, |t| -> Result<(f64, f64, f64)> {
                let sketch = draw_sketch(n, ell, dist, derive_seed(cell_seed, t as u64))?;
                let out = subspace_iterate(&op, &sketch, q, 1)?;
                let rel_err = (exact_trace - trace_from_restriction(&out).value) / exact_trace;
                let pair = split_projections(&u1, &u2, &sketch)?;
                let w = interaction_norm(&pair)?.interaction;
                let g = gamma;
                let est1 = (1.0 + g.powi(q as i32 - 1) * w) * tail / exact_trace;
                let est2 = if w > 0.0 && w <= g.powi(-(q as i32)) {
                    (1.0 + g.powi(2 * q as i32 - 1) * w * w) * tail / exact_trace
                } else {
                    f64::NAN
                };
                Ok((rel_err, est1, est2))
            });
            let mut errs = Vec::new();
            let mut est1s = Vec::new();
            let mut est2s = Vec::new();
            for r in results {
                let (e, e1, e2) = r?;
                errs.push(e);
                est1s.push(e1);
                if e2.is_finite() {
                    est2s.push(e2);
                }
            }
            rows.push(BoundQualityRow {
                dist,
                k,
                ell,
                median_rel_err: median(&mut errs),
                median_est1: median(&mut est1s),
                median_est2: if est2s.is_empty() { f64::NAN } else { median(&mut est2s) },
                delta: crate::bounds::delta_ratio(&spectrum)?,
            });
        }
    }
    rows.sort_by_key(|r| (format!("{}", r.dist), r.k));
    Ok(rows)
}

/// One cell of the concentration-of-measure study.
#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationCell {
    pub dist: Distribution,
    pub ell: usize,
    pub errors: ErrorDistribution,
}

/// Distribution of relative errors across many starting guesses, for each
/// sample count and both distributions.
pub fn concentration_experiment(
    n: usize,
    gamma: f64,
    ells: &[usize],
    q: usize,
    trials: usize,
    bins: usize,
    seed: u64,
) -> Result<Vec<ConcentrationCell>> {
    let gen = crate::genmat::GenSpec::Geometric {
        n,
        gamma,
        seed: derive_seed(seed, 0),
    };
    let mut cells = Vec::new();
    for (di, &dist) in [Distribution::Gaussian, Distribution::Rademacher].iter().enumerate() {
        for (li, &ell) in ells.iter().enumerate() {
            let config = EstimatorConfig {
                distribution: dist,
                samples: ell,
                iterations: q,
                stabilize_period: 1,
            };
            let cell_seed = derive_seed(seed, 1 + (di * ells.len() + li) as u64);
            let errors = error_distribution(&gen, &config, trials, bins, cell_seed)?;
            cells.push(ConcentrationCell { dist, ell, errors });
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MediumRow {
    pub ell: usize,
    pub median_trace_err: f64,
    pub median_logdet_err: f64,
}

/// Sample-size sweep on the sparse outer-product-sum operator.
pub fn medium_experiment(
    spec: &OuterSumSpec,
    ells: &[usize],
    q: usize,
    dist: Distribution,
    trials: usize,
    seed: u64,
) -> Result<Vec<MediumRow>> {
    let op = outer_sum_matrix(spec)?;
    let exact_trace = op.exact_trace();
    let exact_logdet = op.exact_logdet_iplus()?;
    let mut rows = Vec::new();
    for (li, &ell) in ells.iter().enumerate() {
        let cell_seed = derive_seed(seed, li as u64);
        let (mut dts, mut dls) =
            run_cell(&op, dist, ell, q, trials, cell_seed, exact_trace, exact_logdet)?;
        rows.push(MediumRow {
            ell,
            median_trace_err: median(&mut dts),
            median_logdet_err: median(&mut dls),
        });
    }
    rows.sort_by_key(|r| r.ell);
    Ok(rows)
}

/// Split a sketch against the eigenbasis of an eigen-synthetic operator.
pub fn eigen_split(
    op: &SymmetricOperator,
    k: usize,
    sketch: &crate::sketch::SketchMatrix,
) -> Result<ProjectionPair> {
    match op {
        SymmetricOperator::EigenSynthetic { basis, .. } if basis.cols() == basis.rows() => {
            let n = basis.rows();
            let u1 = basis.leading_columns(k);
            let u2 = DenseMatrix::from_fn(n, n - k, |i, j| basis[(i, j + k)]);
            split_projections(&u1, &u2, sketch)
        }
        _ => Err(Error::BadParameter(
            "eigen split requires a full eigen-synthetic operator".into(),
        )),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    op: &SymmetricOperator,
    dist: Distribution,
    ell: usize,
    q: usize,
    trials: usize,
    cell_seed: u64,
    exact_trace: f64,
    exact_logdet: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let results = run_trials(trials, |t| -> Result<(f64, f64)> {
        let sketch = draw_sketch(op.dim(), ell, dist, derive_seed(cell_seed, t as u64))?;
        let out = subspace_iterate(op, &sketch, q, 1)?;
        let dt = (exact_trace - trace_from_restriction(&out).value) / exact_trace;
        let dl = (exact_logdet - logdet_iplus_from_restriction(&out)?.value) / exact_logdet;
        Ok((dt, dl))
    });
    let mut dts = Vec::with_capacity(trials);
    let mut dls = Vec::with_capacity(trials);
    for r in results {
        let (dt, dl) = r?;
        dts.push(dt);
        dls.push(dl);
    }
    Ok((dts, dls))
}

fn rank_of(ks: &[usize], k: usize) -> usize {
    ks.iter().position(|&x| x == k).unwrap_or(0)
}
