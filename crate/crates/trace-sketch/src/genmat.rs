//! Deterministic generators for the synthetic test operators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{thin_qr, DenseMatrix};
use crate::operators::{SparseVector, SymmetricOperator};
use crate::rng::CounterRng;
use crate::sketch::{fill_matrix, Distribution};

/// Parameters of the outer-product-sum operator
/// `A = sum_{j<=split} (h/j^2) x_j x_j^T + sum_{split<j<=total_rank} (l/j^2) x_j x_j^T`
/// with sparse nonnegative random vectors `x_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterSumSpec {
    pub n: usize,
    pub h: f64,
    pub l: f64,
    pub density: f64,
    pub split: usize,
    pub total_rank: usize,
    pub seed: u64,
}

impl Default for OuterSumSpec {
    fn default() -> Self {
        OuterSumSpec {
            n: 5000,
            h: 1.0,
            l: 1.0,
            density: 0.025,
            split: 40,
            total_rank: 300,
            seed: 0,
        }
    }
}

/// A generator request, parseable from `kind:key=value,...` strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GenSpec {
    /// Geometrically decaying eigenvalues `lambda_j = gamma^(j-1)` in a
    /// random orthogonal eigenbasis.
    Geometric { n: usize, gamma: f64, seed: u64 },
    /// The sparse outer-product-sum operator.
    OuterSum(OuterSumSpec),
    /// Outer-product-sum with the low coefficient forced to zero, so the
    /// operator has rank at most `split`.
    ExactRank {
        n: usize,
        h: f64,
        density: f64,
        split: usize,
        seed: u64,
    },
}

impl GenSpec {
    /// Instantiate the operator.
    pub fn build(&self) -> Result<SymmetricOperator> {
        match *self {
            GenSpec::Geometric { n, gamma, seed } => geometric_matrix(n, gamma, seed),
            GenSpec::OuterSum(spec) => outer_sum_matrix(&spec),
            GenSpec::ExactRank {
                n,
                h,
                density,
                split,
                seed,
            } => outer_sum_matrix(&OuterSumSpec {
                n,
                h,
                l: 0.0,
                density,
                split,
                total_rank: split,
                seed,
            }),
        }
    }

    /// Exact spectrum when the generator knows it in closed form
    /// (geometric only; outer-sum spectra come from the Gram matrix).
    pub fn known_spectrum(&self) -> Option<Vec<f64>> {
        match *self {
            GenSpec::Geometric { n, gamma, .. } => {
                Some((0..n).map(|j| gamma.powi(j as i32)).collect())
            }
            _ => None,
        }
    }

    /// Parse a `kind:key=value,...` description, e.g.
    /// `geometric:n=128,gamma=0.9,seed=1`.
    pub fn parse(text: &str) -> Result<GenSpec> {
        let (kind, rest) = match text.split_once(':') {
            Some((k, r)) => (k, r),
            None => (text, ""),
        };
        let mut pairs = std::collections::BTreeMap::new();
        if !rest.is_empty() {
            for tok in rest.split(',') {
                let (key, value) = tok.split_once('=').ok_or_else(|| {
                    Error::BadParameter(format!("expected key=value in generator spec, got '{tok}'"))
                })?;
                pairs.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        let take_usize = |pairs: &std::collections::BTreeMap<String, String>, key: &str, default: Option<usize>| -> Result<usize> {
            match pairs.get(key) {
                Some(v) => v.parse().map_err(|_| Error::BadParameter(format!("bad value for {key}: '{v}'"))),
                None => default.ok_or_else(|| Error::BadParameter(format!("missing required key '{key}'"))),
            }
        };
        let take_f64 = |pairs: &std::collections::BTreeMap<String, String>, key: &str, default: Option<f64>| -> Result<f64> {
            match pairs.get(key) {
                Some(v) => v.parse().map_err(|_| Error::BadParameter(format!("bad value for {key}: '{v}'"))),
                None => default.ok_or_else(|| Error::BadParameter(format!("missing required key '{key}'"))),
            }
        };
        let take_u64 = |pairs: &std::collections::BTreeMap<String, String>, key: &str, default: Option<u64>| -> Result<u64> {
            match pairs.get(key) {
                Some(v) => v.parse().map_err(|_| Error::BadParameter(format!("bad value for {key}: '{v}'"))),
                None => default.ok_or_else(|| Error::BadParameter(format!("missing required key '{key}'"))),
            }
        };

        match kind {
            "geometric" => Ok(GenSpec::Geometric {
                n: take_usize(&pairs, "n", Some(128))?,
                gamma: take_f64(&pairs, "gamma", Some(0.9))?,
                seed: take_u64(&pairs, "seed", Some(0))?,
            }),
            "outersum" => {
                let d = OuterSumSpec::default();
                Ok(GenSpec::OuterSum(OuterSumSpec {
                    n: take_usize(&pairs, "n", Some(d.n))?,
                    h: take_f64(&pairs, "h", Some(d.h))?,
                    l: take_f64(&pairs, "l", Some(d.l))?,
                    density: take_f64(&pairs, "density", Some(d.density))?,
                    split: take_usize(&pairs, "split", Some(d.split))?,
                    total_rank: take_usize(&pairs, "rank", Some(d.total_rank))?,
                    seed: take_u64(&pairs, "seed", Some(d.seed))?,
                }))
            }
            "exactrank" => {
                let d = OuterSumSpec::default();
                Ok(GenSpec::ExactRank {
                    n: take_usize(&pairs, "n", Some(d.n))?,
                    h: take_f64(&pairs, "h", Some(2.0))?,
                    density: take_f64(&pairs, "density", Some(d.density))?,
                    split: take_usize(&pairs, "split", Some(d.split))?,
                    seed: take_u64(&pairs, "seed", Some(d.seed))?,
                })
            }
            other => Err(Error::BadParameter(format!(
                "unknown generator kind '{other}' (expected geometric, outersum, or exactrank)"
            ))),
        }
    }
}

/// Random matrix with orthonormal columns: thin QR of a seeded Gaussian draw.
pub fn random_orthogonal(n: usize, m: usize, seed: u64) -> Result<DenseMatrix> {
    if m < 1 || m > n {
        return Err(Error::BadShape(format!(
            "orthogonal factor needs 1 <= m <= n, got m = {m}, n = {n}"
        )));
    }
    let g = fill_matrix(n, m, Distribution::Gaussian, seed);
    let (q, _) = thin_qr(&g)?;
    Ok(q)
}

/// Operator with eigenvalues `lambda_j = gamma^(j-1)` (so `lambda_1 = 1`)
/// in a seeded random orthogonal eigenbasis.
pub fn geometric_matrix(n: usize, gamma: f64, seed: u64) -> Result<SymmetricOperator> {
    if n < 2 {
        return Err(Error::BadParameter(format!("geometric matrix needs n >= 2, got {n}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::BadParameter(format!("gamma must be in (0,1), got {gamma}")));
    }
    let basis = random_orthogonal(n, n, seed)?;
    let lambdas: Vec<f64> = (0..n).map(|j| gamma.powi(j as i32)).collect();
    SymmetricOperator::eigen_synthetic(basis, lambdas)
}

/// The outer-product-sum operator. Coefficients are `h/j^2` up to `split`
/// and `l/j^2` beyond; with `l = 0` the high-index terms are omitted
/// entirely, so the rank is at most `split`. Each vector entry is nonzero
/// independently with probability `density`, with values uniform on (0, 1).
pub fn outer_sum_matrix(spec: &OuterSumSpec) -> Result<SymmetricOperator> {
    if spec.n < 1 {
        return Err(Error::BadParameter("n must be positive".into()));
    }
    if !(spec.density > 0.0 && spec.density <= 1.0) {
        return Err(Error::BadParameter(format!(
            "density must be in (0,1], got {}",
            spec.density
        )));
    }
    if spec.split > spec.total_rank {
        return Err(Error::BadParameter(format!(
            "split = {} exceeds total rank = {}",
            spec.split, spec.total_rank
        )));
    }
    if spec.h < 0.0 || spec.l < 0.0 {
        return Err(Error::BadParameter("coefficients h and l must be nonnegative".into()));
    }

    let rng = CounterRng::new(spec.seed);
    let mut terms = Vec::new();
    for j in 1..=spec.total_rank {
        let coeff = if j <= spec.split {
            spec.h / (j * j) as f64
        } else {
            spec.l / (j * j) as f64
        };
        if coeff == 0.0 {
            continue;
        }
        // Two stream values per candidate entry: one decides sparsity, the
        // other the value. Vector j always consumes the same counters, so
        // the leading vectors are identical whether or not l = 0.
        let base = 2 * ((j - 1) as u64) * (spec.n as u64);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..spec.n {
            let u_gate = rng.uniform(base + 2 * i as u64);
            if u_gate < spec.density {
                indices.push(i);
                values.push(rng.uniform(base + 2 * i as u64 + 1));
            }
        }
        if indices.is_empty() {
            continue;
        }
        terms.push((coeff, SparseVector::new(spec.n, indices, values)?));
    }
    SymmetricOperator::outer_product_sum(spec.n, terms)
}
