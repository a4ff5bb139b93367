//! Closed-form error bounds and planning for the subspace estimators.
//!
//! All bounds are driven by a [`SpectrumModel`]: the eigenvalues of the
//! operator, split at an index `k` where a gap `lambda_k > lambda_{k+1}`
//! exists. Structural bounds additionally take the realized interaction
//! norm `w = ||Omega_2 Omega_1^+||_2`; probabilistic bounds replace `w^2`
//! by a distribution-specific constant that holds in expectation or with
//! probability `1 - delta`. Natural logarithms throughout, except
//! [`oversampling_for_delta`] whose defining formula is in base 10.

use serde::Serialize;

use crate::error::{Error, Result};

/// Eigenvalues sorted descending with a dominant/subdominant split index.
#[derive(Debug, Clone)]
pub struct SpectrumModel {
    eigenvalues: Vec<f64>,
    k: usize,
}

impl SpectrumModel {
    /// `eigenvalues` must be sorted descending and nonnegative;
    /// `1 <= k < n`. Whether a strict gap exists at `k` is checked by
    /// [`gap_ratio`] at evaluation time.
    pub fn new(eigenvalues: Vec<f64>, k: usize) -> Result<Self> {
        let n = eigenvalues.len();
        if n < 2 {
            return Err(Error::BadParameter("spectrum needs at least 2 eigenvalues".into()));
        }
        if k < 1 || k >= n {
            return Err(Error::BadParameter(format!(
                "split index must satisfy 1 <= k < n, got k = {k}, n = {n}"
            )));
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::BadParameter("eigenvalues must be sorted descending".into()));
        }
        if eigenvalues.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::BadParameter("eigenvalues must be finite and nonnegative".into()));
        }
        Ok(SpectrumModel { eigenvalues, k })
    }

    /// Geometric spectrum `lambda_j = gamma^(j-1)`, the standard synthetic
    /// test case.
    pub fn geometric(n: usize, gamma: f64, k: usize) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::BadParameter(format!("gamma must be in (0,1), got {gamma}")));
        }
        Self::new((0..n).map(|j| gamma.powi(j as i32)).collect(), k)
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `lambda_j`, 1-based.
    pub fn lambda(&self, j: usize) -> f64 {
        self.eigenvalues[j - 1]
    }

    /// `tr(Lambda) = sum_j lambda_j`.
    pub fn trace_total(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// `tr(Lambda_2) = sum_{j > k} lambda_j`.
    pub fn trace_tail(&self) -> f64 {
        self.eigenvalues[self.k..].iter().sum()
    }

    /// The subdominant eigenvalues `Lambda_2`.
    pub fn tail(&self) -> &[f64] {
        &self.eigenvalues[self.k..]
    }

    /// `logdet(I + Lambda_2)`.
    pub fn logdet_iplus_tail(&self) -> f64 {
        self.tail().iter().map(|&v| v.ln_1p()).sum()
    }
}

/// `gamma = lambda_{k+1} / lambda_k < 1`.
pub fn gap_ratio(spectrum: &SpectrumModel) -> Result<f64> {
    let k = spectrum.k();
    let lambda_k = spectrum.lambda(k);
    let lambda_k1 = spectrum.lambda(k + 1);
    if lambda_k == 0.0 {
        return Err(Error::ZeroEigenvalue { k });
    }
    if lambda_k1 >= lambda_k {
        return Err(Error::NoGap {
            k,
            lambda_k,
            lambda_k1,
        });
    }
    Ok(lambda_k1 / lambda_k)
}

/// Which term of the min in the bound constant attained the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundBranch {
    /// First-order term `gamma^(q-1)w` (trace) or the unscaled factor
    /// (logdet): the sketch has a weak dominant-subspace contribution.
    WeakContribution,
    /// Second-order term `gamma^(2q-1) w^2` (trace) or the `1/lambda_k`
    /// refinement (logdet).
    StrongContribution,
}

/// Evaluated lower and upper bounds on the estimator error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundReport {
    /// Guaranteed minimum error (the irreducible part of the tail).
    pub lower: f64,
    /// First upper bound, valid unconditionally.
    pub upper_a: f64,
    /// Second upper bound, with its validity flag.
    pub upper_b: f64,
    pub upper_b_valid: bool,
    /// `min` of the valid upper bounds.
    pub chosen_upper: f64,
    /// The combined factor theta multiplying the tail.
    pub theta: f64,
    /// The interaction norm (structural) or probabilistic constant that
    /// entered the bound.
    pub constant_used: f64,
    pub branch: BoundBranch,
}

/// Structural (deterministic) bounds on `tr(A) - tr(T)`.
///
/// `w` is the realized interaction norm. The lower bound subtracts
/// `sum_{j=k+1..l} lambda_j` when the sample count `l` is supplied and
/// nothing otherwise. The second upper bound applies only when
/// `0 < w <= gamma^(-q)`.
pub fn trace_bounds_structural(
    spectrum: &SpectrumModel,
    q: usize,
    w: f64,
    l: Option<usize>,
) -> Result<BoundReport> {
    validate_qw(q, w)?;
    let gamma = gap_ratio(spectrum)?;
    let tail = spectrum.trace_tail();
    let lower = tail - partial_tail_sum(spectrum, l)?;

    let term_a = gamma.powi(q as i32 - 1) * w;
    let term_b = gamma.powi(2 * q as i32 - 1) * w * w;
    let upper_a = (1.0 + term_a) * tail;
    let upper_b = (1.0 + term_b) * tail;
    let upper_b_valid = w > 0.0 && w <= gamma.powi(-(q as i32));

    let (chosen_upper, branch) = if upper_b_valid && upper_b <= upper_a {
        (upper_b, BoundBranch::StrongContribution)
    } else {
        (upper_a, BoundBranch::WeakContribution)
    };
    let theta = if upper_b_valid { term_a.min(term_b) } else { term_a };

    Ok(BoundReport {
        lower,
        upper_a,
        upper_b,
        upper_b_valid,
        chosen_upper,
        theta,
        constant_used: w,
        branch,
    })
}

/// Structural bounds on `logdet(I + A) - logdet(I + T)`.
///
/// The upper bound is `logdet(I + Lambda_2) + logdet(I + theta_2 Lambda_2)`
/// with `theta_2 = gamma^(2q-1) w^2 min(1, 1/lambda_k)`; the `1/lambda_k`
/// refinement applies when `lambda_k > 1` and is then always tighter.
pub fn logdet_bounds_structural(
    spectrum: &SpectrumModel,
    q: usize,
    w: f64,
    l: Option<usize>,
) -> Result<BoundReport> {
    validate_qw(q, w)?;
    let gamma = gap_ratio(spectrum)?;
    let base = spectrum.logdet_iplus_tail();
    let lower = base - partial_tail_logdet(spectrum, l)?;

    let w2 = gamma.powi(2 * q as i32 - 1) * w * w;
    let lambda_k = spectrum.lambda(spectrum.k());
    let upper_a = base + logdet_iplus_scaled_tail(spectrum, w2);
    let refinement = w2 / lambda_k;
    let upper_b = base + logdet_iplus_scaled_tail(spectrum, refinement);
    let upper_b_valid = lambda_k > 1.0;

    let (chosen_upper, branch, theta) = if upper_b_valid {
        (upper_b, BoundBranch::StrongContribution, refinement)
    } else {
        (upper_a, BoundBranch::WeakContribution, w2)
    };

    Ok(BoundReport {
        lower,
        upper_a,
        upper_b,
        upper_b_valid,
        chosen_upper,
        theta,
        constant_used: w,
        branch,
    })
}

/// Upper bound on `logdet(A) - logdet(T)` for positive definite `A`:
/// `logdet(Lambda_2) + logdet(I + (gamma^(2q-1)/lambda_k) w^2 Lambda_2)`.
pub fn logdet_posdef_upper(spectrum: &SpectrumModel, q: usize, w: f64) -> Result<f64> {
    validate_qw(q, w)?;
    let lambda_n = spectrum.lambda(spectrum.n());
    if lambda_n <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            index: spectrum.n(),
            pivot: lambda_n,
        });
    }
    let gamma = gap_ratio(spectrum)?;
    let lambda_k = spectrum.lambda(spectrum.k());
    let scale = gamma.powi(2 * q as i32 - 1) * w * w / lambda_k;
    let logdet_tail: f64 = spectrum.tail().iter().map(|&v| v.ln()).sum();
    Ok(logdet_tail + logdet_iplus_scaled_tail(spectrum, scale))
}

/// `mu = sqrt(n - k) + sqrt(k + p)`.
pub fn mu(n: usize, k: usize, p: usize) -> f64 {
    assert!(n > k && k >= 1, "mu requires n > k >= 1");
    ((n - k) as f64).sqrt() + ((k + p) as f64).sqrt()
}

/// The Gaussian bound constants.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GaussianConstants {
    /// Expectation-bound constant; requires `p >= 2`.
    pub c_ge: f64,
    /// Concentration-bound constant at failure probability `delta`;
    /// requires `p >= 4`. Absent when no `delta` was supplied.
    pub c_g: Option<f64>,
}

/// Constants for the Gaussian expectation and concentration bounds.
pub fn gaussian_constants(n: usize, k: usize, p: usize, delta: Option<f64>) -> Result<GaussianConstants> {
    if n <= k || k < 1 {
        return Err(Error::BadParameter(format!("need n > k >= 1, got n = {n}, k = {k}")));
    }
    if p < 2 {
        return Err(Error::OversamplingTooSmall { p, min: 2 });
    }
    let mu = mu(n, k, p);
    let kp = (k + p) as f64;
    let p1 = (p + 1) as f64;
    let shared = std::f64::consts::E.powi(2) * kp / (p1 * p1);

    let c_ge = shared
        * (1.0 / (2.0 * std::f64::consts::PI * p1)).powf(2.0 / p1)
        * (mu + 2.0f64.sqrt()).powi(2)
        * (p1 / (p as f64 - 1.0));

    let c_g = match delta {
        None => None,
        Some(delta) => {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::BadParameter(format!("delta must be in (0,1), got {delta}")));
            }
            if p < 4 {
                return Err(Error::OversamplingTooSmall { p, min: 4 });
            }
            let tail = (2.0 / delta).ln();
            Some(shared * (2.0 / delta).powf(2.0 / p1) * (mu + (2.0 * tail).sqrt()).powi(2))
        }
    };

    Ok(GaussianConstants { c_ge, c_g })
}

/// Expectation bounds on the squared norms of the Gaussian projections.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GaussianExpectationNorms {
    /// Bound on `E ||G_2||_2^2` for G_2 of shape (n-k) x (k+p).
    pub norm2_sq: f64,
    /// Bound on `E ||G_1^+||_2^2` for G_1 of shape k x (k+p).
    pub pinv_sq: f64,
}

/// Expectation bounds for the spectral norm and pseudo-inverse norm of
/// Gaussian projections; requires `p >= 2` and `k >= 2`.
pub fn gaussian_expectation_norms(n: usize, k: usize, p: usize) -> Result<GaussianExpectationNorms> {
    if n <= k {
        return Err(Error::BadParameter(format!("need n > k, got n = {n}, k = {k}")));
    }
    if p < 2 {
        return Err(Error::ParameterTooSmall { name: "p", value: p, min: 2 });
    }
    if k < 2 {
        return Err(Error::ParameterTooSmall { name: "k", value: k, min: 2 });
    }
    let mu = mu(n, k, p);
    let p1 = (p + 1) as f64;
    let norm2_sq = mu * mu + 2.0 * ((std::f64::consts::PI / 2.0).sqrt() * mu + 1.0);
    let pinv_sq = (p1 / (p as f64 - 1.0))
        * (1.0 / (2.0 * std::f64::consts::PI * p1)).powf(2.0 / p1)
        * (std::f64::consts::E * ((k + p) as f64).sqrt() / p1).powi(2);
    Ok(GaussianExpectationNorms { norm2_sq, pinv_sq })
}

/// Concentration constant for Rademacher starting guesses:
/// `C_r = 1/(1-rho) [1 + 3 l^-1 (sqrt(n-k) + sqrt(8 log(4l/delta)))^2 log(4(n-k)/delta)]`.
pub fn rademacher_constant(n: usize, k: usize, l: usize, delta: f64, rho: f64) -> Result<f64> {
    validate_rad_params(n, k, delta, rho)?;
    if l < 1 {
        return Err(Error::BadParameter("l must be at least 1".into()));
    }
    let nk = (n - k) as f64;
    let lf = l as f64;
    let cu = nk.sqrt() + (8.0 * (4.0 * lf / delta).ln()).sqrt();
    Ok((1.0 + 3.0 / lf * cu * cu * (4.0 * nk / delta).ln()) / (1.0 - rho))
}

/// Minimum Rademacher sample count for the tail bound to hold:
/// `l >= 2 rho^-2 (sqrt(k) + sqrt(8 log(4n/delta)))^2 log(4k/delta)`.
///
/// This evaluates the formula exactly; rounding its constants (e.g. to
/// 2.54, 11 and 4.7 at delta = 0.005, n = 1024) gives slightly different
/// counts and is not done here.
pub fn rademacher_min_samples(n: usize, k: usize, delta: f64, rho: f64) -> Result<u64> {
    validate_rad_params(n, k, delta, rho)?;
    let cl = (k as f64).sqrt() + (8.0 * (4.0 * n as f64 / delta).ln()).sqrt();
    let raw = 2.0 / (rho * rho) * cl * cl * (4.0 * k as f64 / delta).ln();
    Ok(raw.ceil() as u64)
}

fn validate_rad_params(n: usize, k: usize, delta: f64, rho: f64) -> Result<()> {
    if n <= k || k < 1 {
        return Err(Error::BadParameter(format!("need n > k >= 1, got n = {n}, k = {k}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::BadParameter(format!("delta must be in (0,1), got {delta}")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::BadParameter(format!("rho must be in (0,1), got {rho}")));
    }
    Ok(())
}

/// Choice of constant for the probabilistic upper bounds.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum ProbabilisticConstant {
    /// Gaussian expectation bound with oversampling `p` (l = k + p).
    GaussianExpectation { p: usize },
    /// Gaussian concentration bound holding with probability `1 - delta`.
    GaussianConcentration { p: usize, delta: f64 },
    /// Rademacher concentration bound at `l` samples.
    Rademacher { l: usize, delta: f64, rho: f64 },
}

impl ProbabilisticConstant {
    /// Resolve to the numeric constant for a spectrum of size n, split k.
    pub fn resolve(&self, n: usize, k: usize) -> Result<f64> {
        match *self {
            ProbabilisticConstant::GaussianExpectation { p } => {
                Ok(gaussian_constants(n, k, p, None)?.c_ge)
            }
            ProbabilisticConstant::GaussianConcentration { p, delta } => {
                Ok(gaussian_constants(n, k, p, Some(delta))?.c_g.unwrap())
            }
            ProbabilisticConstant::Rademacher { l, delta, rho } => {
                rademacher_constant(n, k, l, delta, rho)
            }
        }
    }
}

/// Probabilistic upper bound on `tr(A) - tr(T)`:
/// `(1 + gamma^(2q-1) C) tr(Lambda_2)`.
pub fn probabilistic_trace_upper(
    spectrum: &SpectrumModel,
    q: usize,
    constant: &ProbabilisticConstant,
) -> Result<f64> {
    if q < 1 {
        return Err(Error::BadParameter("q must be at least 1".into()));
    }
    let tail = spectrum.trace_tail();
    if tail == 0.0 {
        return Ok(0.0);
    }
    let gamma = gap_ratio(spectrum)?;
    let c = constant.resolve(spectrum.n(), spectrum.k())?;
    Ok((1.0 + gamma.powi(2 * q as i32 - 1) * c) * tail)
}

/// Probabilistic upper bound on `logdet(I + A) - logdet(I + T)`:
/// `logdet(I + Lambda_2) + logdet(I + gamma^(2q-1) C Lambda_2)`.
pub fn probabilistic_logdet_upper(
    spectrum: &SpectrumModel,
    q: usize,
    constant: &ProbabilisticConstant,
) -> Result<f64> {
    if q < 1 {
        return Err(Error::BadParameter("q must be at least 1".into()));
    }
    if spectrum.tail().iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let gamma = gap_ratio(spectrum)?;
    let c = constant.resolve(spectrum.n(), spectrum.k())?;
    let scale = gamma.powi(2 * q as i32 - 1) * c;
    Ok(spectrum.logdet_iplus_tail() + logdet_iplus_scaled_tail(spectrum, scale))
}

/// Residual mass ratio `Delta = tr(Lambda_2) / tr(Lambda)`, the irreducible
/// relative error floor of the subspace trace estimator.
pub fn delta_ratio(spectrum: &SpectrumModel) -> Result<f64> {
    let total = spectrum.trace_total();
    if total <= 0.0 {
        return Err(Error::ZeroTrace);
    }
    Ok(spectrum.trace_tail() / total)
}

/// Spectrum-free upper bound `Delta <= (n-k) gamma / (n gamma + k (1 - gamma))`.
pub fn delta_upper(gamma: f64, n: usize, k: usize) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::BadParameter(format!("gamma must be in (0,1), got {gamma}")));
    }
    if n <= k || k < 1 {
        return Err(Error::BadParameter(format!("need n > k >= 1, got n = {n}, k = {k}")));
    }
    let nf = n as f64;
    let kf = k as f64;
    Ok((nf - kf) * gamma / (nf * gamma + kf * (1.0 - gamma)))
}

/// Iteration count and predicted error from the (epsilon, delta) planner.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PlanResult {
    pub q: usize,
    pub l: usize,
    pub predicted_rel_error: f64,
    pub constant: f64,
    pub matvecs: u64,
}

/// Iterations needed so that `(1 + gamma^(2q-1) C) Delta <= eps`:
/// `q = ceil(1/2 (1 + log(C Delta / (eps - Delta)) / log(1/gamma)))`,
/// clamped below at 1.
///
/// `Delta = 0` means the target is already met at `q = 1`. `Delta >= eps`
/// is unreachable for any `q` because `Delta` is the error floor.
pub fn plan_q(gamma: f64, delta_ratio: f64, eps: f64, c: f64) -> Result<(usize, f64)> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::BadParameter(format!("gamma must be in (0,1), got {gamma}")));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::BadParameter(format!("eps must be in (0,1], got {eps}")));
    }
    if c <= 0.0 {
        return Err(Error::BadParameter(format!("constant must be positive, got {c}")));
    }
    if delta_ratio < 0.0 {
        return Err(Error::BadParameter("delta ratio must be nonnegative".into()));
    }
    if delta_ratio == 0.0 {
        return Ok((1, 0.0));
    }
    if delta_ratio >= eps {
        return Err(Error::TargetUnreachable {
            eps,
            delta: delta_ratio,
        });
    }
    let raw = 0.5 * (1.0 + (c * delta_ratio / (eps - delta_ratio)).ln() / (1.0 / gamma).ln());
    let q = (raw.ceil() as i64).max(1) as usize;
    let predicted = (1.0 + gamma.powi(2 * q as i32 - 1) * c) * delta_ratio;
    Ok((q, predicted))
}

/// Oversampling that makes `(2/delta)^(1/(p+1))` modest:
/// `p = ceil(log10(2/delta)) - 1`.
pub fn oversampling_for_delta(delta: f64) -> u64 {
    assert!(delta > 0.0 && delta < 1.0, "delta must be in (0,1)");
    // Tolerant ceiling: 2/delta lands on powers of ten for the usual
    // delta values and must not round up through floating-point fuzz.
    let x = (2.0 / delta).log10();
    let p = (x - 1e-9).ceil() as i64 - 1;
    p.max(0) as u64
}

/// Complete Gaussian plan: oversampling from `delta`, constant `C_g`, and
/// the iteration count from [`plan_q`].
pub fn plan_gaussian(
    n: usize,
    k: usize,
    gamma: f64,
    delta_ratio: f64,
    eps: f64,
    delta: f64,
) -> Result<PlanResult> {
    // The concentration constant needs p >= 4.
    let p = (oversampling_for_delta(delta) as usize).max(4);
    let c = gaussian_constants(n, k, p, Some(delta))?.c_g.unwrap();
    let (q, predicted) = plan_q(gamma, delta_ratio, eps, c)?;
    let l = k + p;
    Ok(PlanResult {
        q,
        l,
        predicted_rel_error: predicted,
        constant: c,
        matvecs: crate::subspace::matvec_cost(l, q),
    })
}

/// Complete Rademacher plan: sample count from the tail-bound requirement,
/// constant `C_r` at that count, iteration count from [`plan_q`].
pub fn plan_rademacher(
    n: usize,
    k: usize,
    gamma: f64,
    delta_ratio: f64,
    eps: f64,
    delta: f64,
    rho: f64,
) -> Result<PlanResult> {
    let l = rademacher_min_samples(n, k, delta, rho)? as usize;
    let c = rademacher_constant(n, k, l, delta, rho)?;
    let (q, predicted) = plan_q(gamma, delta_ratio, eps, c)?;
    Ok(PlanResult {
        q,
        l,
        predicted_rel_error: predicted,
        constant: c,
        matvecs: crate::subspace::matvec_cost(l, q),
    })
}

/// Simplified relative-error bound for the geometric spectrum:
/// `(1 + gamma^(2q-1) C) gamma^k (1 - gamma^(n-k)) / (1 - gamma^n)`.
pub fn simplified_rel_bound(gamma: f64, n: usize, k: usize, q: usize, c: f64) -> f64 {
    assert!(gamma > 0.0 && gamma < 1.0, "gamma must be in (0,1)");
    assert!(k >= 1 && k <= n, "need 1 <= k <= n");
    assert!(q >= 1, "q must be at least 1");
    let gk = gamma.powi(k as i32);
    let tail_frac = gk * (1.0 - gamma.powi((n - k) as i32)) / (1.0 - gamma.powi(n as i32));
    (1.0 + gamma.powi(2 * q as i32 - 1) * c) * tail_frac
}

fn validate_qw(q: usize, w: f64) -> Result<()> {
    if q < 1 {
        return Err(Error::BadParameter("q must be at least 1".into()));
    }
    if !(w >= 0.0 && w.is_finite()) {
        return Err(Error::BadParameter(format!(
            "interaction norm must be finite and nonnegative, got {w}"
        )));
    }
    Ok(())
}

fn partial_tail_sum(spectrum: &SpectrumModel, l: Option<usize>) -> Result<f64> {
    match l {
        None => Ok(0.0),
        Some(l) => {
            let k = spectrum.k();
            if l < k || l > spectrum.n() {
                return Err(Error::BadParameter(format!(
                    "sample count l = {l} must satisfy k <= l <= n"
                )));
            }
            Ok(spectrum.eigenvalues[k..l].iter().sum())
        }
    }
}

fn partial_tail_logdet(spectrum: &SpectrumModel, l: Option<usize>) -> Result<f64> {
    match l {
        None => Ok(0.0),
        Some(l) => {
            let k = spectrum.k();
            if l < k || l > spectrum.n() {
                return Err(Error::BadParameter(format!(
                    "sample count l = {l} must satisfy k <= l <= n"
                )));
            }
            Ok(spectrum.eigenvalues[k..l].iter().map(|&v| v.ln_1p()).sum())
        }
    }
}

fn logdet_iplus_scaled_tail(spectrum: &SpectrumModel, scale: f64) -> f64 {
    spectrum.tail().iter().map(|&v| (scale * v).ln_1p()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_421() -> SpectrumModel {
        SpectrumModel::new(vec![4.0, 2.0, 1.0], 1).unwrap()
    }

    #[test]
    fn gap_ratio_cases() {
        assert_eq!(gap_ratio(&spec_421()).unwrap(), 0.5);

        let geo = SpectrumModel::geometric(16, 0.9, 5).unwrap();
        assert!((gap_ratio(&geo).unwrap() - 0.9).abs() < 1e-15);

        let flat = SpectrumModel::new(vec![1.0, 1.0, 0.5], 1).unwrap();
        assert!(matches!(gap_ratio(&flat), Err(Error::NoGap { .. })));

        let zero = SpectrumModel::new(vec![0.0, 0.0], 1).unwrap();
        assert!(matches!(gap_ratio(&zero), Err(Error::ZeroEigenvalue { .. })));
    }

    #[test]
    fn trace_bounds_hand_example() {
        // spectrum (4,2,1), k=1, q=1, w=1: gamma=0.5, tail=3.
        let r = trace_bounds_structural(&spec_421(), 1, 1.0, None).unwrap();
        assert!((r.upper_a - 6.0).abs() < 1e-14);
        assert!((r.upper_b - 4.5).abs() < 1e-14);
        assert!(r.upper_b_valid); // w = 1 <= gamma^-1 = 2
        assert!((r.chosen_upper - 4.5).abs() < 1e-14);
        assert_eq!(r.branch, BoundBranch::StrongContribution);
        // Without a supplied sample count the subtraction is empty.
        assert_eq!(r.lower, 3.0);
        // Supplying l = n accounts for the whole tail.
        let rn = trace_bounds_structural(&spec_421(), 1, 1.0, Some(3)).unwrap();
        assert_eq!(rn.lower, 0.0);
    }

    #[test]
    fn trace_bounds_invalid_second_branch() {
        // w = 10 > gamma^-q = 2: second bound invalid, first chosen.
        let r = trace_bounds_structural(&spec_421(), 1, 10.0, None).unwrap();
        assert!(!r.upper_b_valid);
        assert!((r.chosen_upper - r.upper_a).abs() < 1e-14);
        assert_eq!(r.branch, BoundBranch::WeakContribution);
    }

    #[test]
    fn trace_bounds_zero_interaction_collapse() {
        // w = 0 with l = k: interval collapses to the tail mass.
        let r = trace_bounds_structural(&spec_421(), 1, 0.0, Some(1)).unwrap();
        assert!((r.lower - 3.0).abs() < 1e-14);
        assert!((r.chosen_upper - 3.0).abs() < 1e-14);
        assert!((r.upper_a - 3.0).abs() < 1e-14);
    }

    #[test]
    fn trace_lower_bound_subtracts_supplied_tail() {
        let r = trace_bounds_structural(&spec_421(), 1, 0.5, Some(2)).unwrap();
        // tail = 3, minus lambda_2 = 2.
        assert!((r.lower - 1.0).abs() < 1e-14);
    }

    #[test]
    fn logdet_bounds_hand_example() {
        // lambda_k = 4 > 1: refinement engaged, theta_2 = 0.5 * 1 * (1/4).
        let r = logdet_bounds_structural(&spec_421(), 1, 1.0, None).unwrap();
        assert!((r.theta - 0.125).abs() < 1e-14);
        let expected = (3.0f64 * 2.0).ln() + (1.25f64 * 1.125).ln();
        assert!((r.chosen_upper - expected).abs() < 1e-12);
        assert_eq!(r.branch, BoundBranch::StrongContribution);
    }

    #[test]
    fn logdet_bounds_no_refinement_below_one() {
        let spec = SpectrumModel::new(vec![0.5, 0.25, 0.1], 1).unwrap();
        let r = logdet_bounds_structural(&spec, 1, 1.0, None).unwrap();
        assert!(!r.upper_b_valid);
        assert_eq!(r.branch, BoundBranch::WeakContribution);
    }

    #[test]
    fn logdet_zero_interaction_collapse() {
        let r = logdet_bounds_structural(&spec_421(), 1, 0.0, Some(1)).unwrap();
        let tail = (3.0f64).ln() + (2.0f64).ln();
        assert!((r.lower - tail).abs() < 1e-14);
        assert!((r.chosen_upper - tail).abs() < 1e-14);
    }

    #[test]
    fn logdet_posdef_upper_hand_example() {
        let got = logdet_posdef_upper(&spec_421(), 1, 1.0).unwrap();
        let expected = 2.0f64.ln() + (1.25f64 * 1.125).ln();
        assert!((got - expected).abs() < 1e-12);

        // w = 0: only logdet(Lambda_2) remains.
        let got0 = logdet_posdef_upper(&spec_421(), 1, 0.0).unwrap();
        assert!((got0 - 2.0f64.ln()).abs() < 1e-14);

        let singular = SpectrumModel::new(vec![1.0, 0.5, 0.0], 1).unwrap();
        assert!(matches!(
            logdet_posdef_upper(&singular, 1, 1.0),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn mu_frozen_value() {
        assert!((mu(128, 10, 20) - 16.340006066251878).abs() < 1e-12);
        assert!((mu(6, 5, 0) - (1.0 + 5.0f64.sqrt())).abs() < 1e-14);
        assert!(mu(256, 10, 20) > mu(128, 10, 20));
        assert!(mu(128, 10, 30) > mu(128, 10, 20));
    }

    #[test]
    fn gaussian_constants_frozen_values() {
        let c = gaussian_constants(128, 10, 20, Some(0.01)).unwrap();
        assert!((c.c_ge - 110.00127561864394).abs() < 1e-9);
        assert!((c.c_g.unwrap() - 319.68268027496373).abs() < 1e-9);
    }

    #[test]
    fn concentration_to_expectation_ratio() {
        // At delta = 2/e the ratio has the closed form
        // (2 e pi (p+1))^(2/(p+1)) (p-1)/(p+1).
        let delta = 2.0 / std::f64::consts::E;
        let c = gaussian_constants(128, 10, 20, Some(delta)).unwrap();
        let ratio = c.c_g.unwrap() / c.c_ge;
        assert!((ratio - 1.5843037963791111).abs() < 1e-10);
        assert!(ratio > 1.5 && ratio < 1.7);

        // The ratio approaches 1 as oversampling grows.
        let big = gaussian_constants(100_000, 10, 5000, Some(delta)).unwrap();
        let big_ratio = big.c_g.unwrap() / big.c_ge;
        assert!((big_ratio - 1.0).abs() < 0.01);
        assert!(big_ratio < ratio);
    }

    #[test]
    fn gaussian_constants_preconditions() {
        assert!(matches!(
            gaussian_constants(128, 10, 1, None),
            Err(Error::OversamplingTooSmall { min: 2, .. })
        ));
        assert!(matches!(
            gaussian_constants(128, 10, 3, Some(0.1)),
            Err(Error::OversamplingTooSmall { min: 4, .. })
        ));
        assert!(gaussian_constants(128, 10, 3, None).is_ok());
    }

    #[test]
    fn expectation_norm_bounds_frozen() {
        let b = gaussian_expectation_norms(128, 10, 20).unwrap();
        assert!((b.norm2_sq - 309.95411945845717).abs() < 1e-9);
        assert!((b.pinv_sq - 0.34897518439515196).abs() < 1e-12);
        assert!(matches!(
            gaussian_expectation_norms(128, 1, 20),
            Err(Error::ParameterTooSmall { name: "k", .. })
        ));
    }

    #[test]
    fn rademacher_formulas_frozen() {
        assert_eq!(rademacher_min_samples(1024, 10, 0.005, 8.0 / 9.0).unwrap(), 4208);
        let c = rademacher_constant(128, 10, 500, 0.01, 0.5).unwrap();
        assert!((c - 57.575915028416816).abs() < 1e-9);
        assert!(c > 0.0);
    }

    #[test]
    fn rademacher_constant_diverges_as_rho_to_one() {
        let c1 = rademacher_constant(128, 10, 500, 0.01, 0.9).unwrap();
        let c2 = rademacher_constant(128, 10, 500, 0.01, 0.999).unwrap();
        let c3 = rademacher_constant(128, 10, 500, 0.01, 0.999999).unwrap();
        assert!(c2 > 10.0 * c1 / 2.0 && c3 > c2 * 10.0);
    }

    #[test]
    fn probabilistic_upper_zero_tail() {
        let spec = SpectrumModel::new(vec![2.0, 1.0, 0.0, 0.0], 2).unwrap();
        let c = ProbabilisticConstant::GaussianConcentration { p: 20, delta: 0.1 };
        assert_eq!(probabilistic_trace_upper(&spec, 1, &c).unwrap(), 0.0);
        assert_eq!(probabilistic_logdet_upper(&spec, 1, &c).unwrap(), 0.0);
    }

    #[test]
    fn probabilistic_upper_matches_simplified_on_geometric() {
        let n = 128;
        let k = 30;
        let spec = SpectrumModel::geometric(n, 0.9, k).unwrap();
        let constant = ProbabilisticConstant::GaussianConcentration { p: 20, delta: 0.01 };
        let upper = probabilistic_trace_upper(&spec, 1, &constant).unwrap();
        let c = constant.resolve(n, k).unwrap();
        let simplified = simplified_rel_bound(0.9, n, k, 1, c) * spec.trace_total();
        assert!((upper - simplified).abs() <= 1e-12 * upper);
    }

    #[test]
    fn probabilistic_upper_monotone_in_q() {
        let spec = SpectrumModel::geometric(64, 0.8, 8).unwrap();
        let c = ProbabilisticConstant::GaussianExpectation { p: 10 };
        let tail = spec.trace_tail();
        let mut prev = f64::INFINITY;
        for q in 1..=8 {
            let u = probabilistic_trace_upper(&spec, q, &c).unwrap();
            assert!(u <= prev);
            assert!(u >= tail);
            prev = u;
        }
        // gamma^(2q-1) -> 0, so the bound approaches the tail mass.
        let far = probabilistic_trace_upper(&spec, 60, &c).unwrap();
        assert!((far - tail).abs() <= 1e-9 * tail);
    }

    #[test]
    fn delta_machinery() {
        // Exact-rank spectrum: Delta = 0.
        let rank_k = SpectrumModel::new(vec![3.0, 2.0, 0.0, 0.0], 2).unwrap();
        assert_eq!(delta_ratio(&rank_k).unwrap(), 0.0);

        assert!((delta_upper(0.9, 128, 10).unwrap() - 0.9139414802065404).abs() < 1e-12);

        let zero = SpectrumModel::new(vec![0.0, 0.0], 1).unwrap();
        assert!(matches!(delta_ratio(&zero), Err(Error::ZeroTrace)));
    }

    #[test]
    fn delta_ratio_below_upper_bound_on_random_spectra() {
        use crate::rng::CounterRng;
        let rng = CounterRng::new(515);
        for trial in 0..300 {
            let n = 4 + (rng.value(trial * 3) % 40) as usize;
            let mut eig: Vec<f64> = (0..n)
                .map(|i| rng.uniform(trial * 1000 + i as u64) + 1e-6)
                .collect();
            eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let k = 1 + (rng.value(trial * 3 + 1) % (n as u64 - 1)) as usize;
            let spec = SpectrumModel::new(eig, k).unwrap();
            let gamma = match gap_ratio(&spec) {
                Ok(g) => g,
                Err(_) => continue,
            };
            let d = delta_ratio(&spec).unwrap();
            let du = delta_upper(gamma, spec.n(), spec.k()).unwrap();
            assert!(d <= du * (1.0 + 1e-12), "trial {trial}: {d} > {du}");
        }
    }

    #[test]
    fn planner_hand_example() {
        let (q, predicted) = plan_q(0.9, 0.01, 0.02, 100.0).unwrap();
        assert_eq!(q, 23);
        assert!((predicted - 0.018727963568087726).abs() < 1e-12);
        assert!(predicted <= 0.02);
    }

    #[test]
    fn planner_edge_cases() {
        // Already converged.
        assert_eq!(plan_q(0.9, 0.0, 0.02, 100.0).unwrap(), (1, 0.0));
        // Floor above target.
        assert!(matches!(
            plan_q(0.9, 0.05, 0.02, 100.0),
            Err(Error::TargetUnreachable { .. })
        ));
        // Post-check holds across a parameter sweep.
        for &gamma in &[0.5, 0.8, 0.95] {
            for &c in &[1.0, 50.0, 1e4] {
                for &(d, e) in &[(0.001, 0.01), (0.009, 0.01), (0.3, 0.9)] {
                    let (q, predicted) = plan_q(gamma, d, e, c).unwrap();
                    assert!(q >= 1);
                    assert!(predicted <= e + 1e-12, "gamma={gamma} c={c} d={d} e={e}");
                }
            }
        }
    }

    #[test]
    fn oversampling_frozen_values() {
        assert_eq!(oversampling_for_delta(1e-16), 16);
        assert_eq!(oversampling_for_delta(0.2), 0);
        assert_eq!(oversampling_for_delta(0.01), 2);
    }

    #[test]
    fn simplified_bound_cases() {
        // k = n collapses the bound to zero.
        assert_eq!(simplified_rel_bound(0.9, 128, 128, 1, 1.0), 0.0);

        let v = simplified_rel_bound(0.9, 128, 30, 1, 1.0);
        assert!((v - 0.08054067152065669).abs() < 1e-12);

        // Equals (1 + gamma^(2q-1) C) * delta_ratio on the geometric spectrum.
        let spec = SpectrumModel::geometric(128, 0.9, 30).unwrap();
        let d = delta_ratio(&spec).unwrap();
        let direct = (1.0 + 0.9 * 1.0) * d;
        assert!((v - direct).abs() < 1e-12);
    }

    #[test]
    fn bound_evaluators_monotone_in_w() {
        let spec = SpectrumModel::geometric(32, 0.7, 6).unwrap();
        let mut prev_trace = 0.0;
        let mut prev_logdet = 0.0;
        for &w in &[0.0, 0.3, 1.0, 2.5, 10.0, 100.0] {
            let rt = trace_bounds_structural(&spec, 2, w, None).unwrap();
            let rl = logdet_bounds_structural(&spec, 2, w, None).unwrap();
            assert!(rt.chosen_upper >= prev_trace);
            assert!(rl.chosen_upper >= prev_logdet);
            assert!(rt.lower <= rt.chosen_upper);
            assert!(rl.lower <= rl.chosen_upper);
            prev_trace = rt.chosen_upper;
            prev_logdet = rl.chosen_upper;
        }
    }

    #[test]
    fn gaussian_plan_composes() {
        let plan = plan_gaussian(128, 10, 0.9, 0.01, 0.02, 0.01).unwrap();
        assert!(plan.q >= 1);
        assert_eq!(plan.l, 10 + 4.max(2));
        assert_eq!(plan.matvecs, (plan.l as u64) * (plan.q as u64 + 1));
        assert!(plan.predicted_rel_error <= 0.02);
    }
}
