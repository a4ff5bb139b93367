//! Command-line front end: matrix ingestion, estimation, bound evaluation,
//! planning, experiment reproduction, and probabilistic checks.
//!
//! Single-run reports are JSON; sweeps are CSV with the resolved run
//! configuration embedded in `#`-prefixed header lines. Exit codes:
//! 0 success, 2 usage error, 3 numerical failure (rank deficiency),
//! 4 I/O error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bounds::{
    self, delta_ratio, delta_upper, gap_ratio, gaussian_constants, logdet_bounds_structural,
    logdet_posdef_upper, mu, plan_gaussian, plan_rademacher, probabilistic_logdet_upper,
    probabilistic_trace_upper, rademacher_constant, rademacher_min_samples,
    trace_bounds_structural, ProbabilisticConstant, SpectrumModel,
};
use crate::error::Error;
use crate::estimators::{
    logdet_from_restriction, logdet_iplus_from_restriction, trace_from_restriction,
};
use crate::experiments;
use crate::genmat::{GenSpec, OuterSumSpec};
use crate::kernels::sym_eig;
use crate::operators::{read_matrix_market, SymmetricOperator};
use crate::probcheck::{
    error_distribution, pinv_norm_experiment, tail_bound_check, write_histogram_csv,
    write_values_csv, EstimatorConfig, TailBoundKind,
};
use crate::rng::derive_seed;
use crate::sketch::{draw_sketch, Distribution};
use crate::subspace::subspace_iterate;

const FORMAT_VERSION: u32 = 1;

/// Exit status carrying a diagnostic message.
#[derive(Debug)]
pub struct CliFailure {
    pub code: i32,
    pub message: String,
}

impl CliFailure {
    fn usage(message: impl Into<String>) -> Self {
        CliFailure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for CliFailure {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::RankDeficient { .. }
            | Error::RankDeficientProjection { .. }
            | Error::NotPositiveDefinite { .. } => 3,
            Error::Io { .. } | Error::Parse { .. } => 4,
            _ => 2,
        };
        CliFailure {
            code,
            message: err.to_string(),
        }
    }
}

impl From<std::io::Error> for CliFailure {
    fn from(err: std::io::Error) -> Self {
        CliFailure {
            code: 4,
            message: err.to_string(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "trace-sketch",
    version,
    about = "Matrix-free trace and log-determinant estimation via randomized subspace iteration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate tr(A) and logdet(I+A) for one matrix.
    Estimate(EstimateArgs),
    /// Evaluate error bounds and constants for a spectrum.
    Bounds(BoundsArgs),
    /// Plan (q, l) for a target relative error at a failure probability.
    Plan(PlanArgs),
    /// Reproduce a named experiment as CSV.
    Experiment(ExperimentArgs),
    /// Empirical checks of the probabilistic claims.
    Probcheck(ProbcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DistArg {
    Gaussian,
    Rademacher,
}

impl From<DistArg> for Distribution {
    fn from(d: DistArg) -> Distribution {
        match d {
            DistArg::Gaussian => Distribution::Gaussian,
            DistArg::Rademacher => Distribution::Rademacher,
        }
    }
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// Matrix source: `file:PATH.mtx` or a generator spec like
    /// `geometric:n=128,gamma=0.9,seed=1`.
    #[arg(long)]
    matrix: String,
    #[arg(long, value_enum, default_value_t = DistArg::Gaussian)]
    dist: DistArg,
    /// Target rank; sample count is k + p unless --l is given.
    #[arg(long)]
    k: Option<usize>,
    /// Oversampling on top of k.
    #[arg(long, default_value_t = 20)]
    p: usize,
    /// Sample count l, overriding k + p.
    #[arg(long)]
    l: Option<usize>,
    /// Subspace iterations.
    #[arg(long, default_value_t = 1)]
    q: usize,
    /// Re-orthogonalization period (0 = idealized single QR).
    #[arg(long, default_value_t = 1)]
    stabilize_period: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report file (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    /// JSON file holding {"eigenvalues": [...]}.
    #[arg(long, conflicts_with = "matrix")]
    spec_file: Option<PathBuf>,
    /// Matrix source whose spectrum to use (generator spec or file:PATH).
    #[arg(long)]
    matrix: Option<String>,
    /// Split index of the dominant eigenvalues.
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    q: usize,
    /// Realized interaction norm; structural bounds are reported when given.
    #[arg(long)]
    w: Option<f64>,
    /// Oversampling for the Gaussian constants.
    #[arg(long, default_value_t = 20)]
    p: usize,
    /// Failure probability for the concentration constants.
    #[arg(long)]
    delta: Option<f64>,
    /// Rademacher sample count for C_r.
    #[arg(long)]
    l: Option<usize>,
    /// Rademacher balance parameter for C_r.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlanArgs {
    #[arg(long)]
    gamma: f64,
    /// Residual mass ratio Delta; defaults to its spectrum-free upper bound.
    #[arg(long)]
    delta_ratio: Option<f64>,
    /// Target relative error.
    #[arg(long)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = DistArg::Gaussian)]
    dist: DistArg,
    /// Failure probability delta.
    #[arg(long)]
    fail_prob: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// One of: gap, mc-compare, subspace-q, bound-quality, concentration, medium.
    name: String,
    /// Directory for the CSV output.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trials per sweep point (experiment-specific default when omitted).
    #[arg(long)]
    trials: Option<usize>,
    /// High coefficient of the medium matrix.
    #[arg(long, default_value_t = 5.0)]
    h: f64,
    /// Low coefficient of the medium matrix.
    #[arg(long, default_value_t = 1.0)]
    l: f64,
    /// Matrix dimension override (geometric experiments).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    /// Full-scale trial counts (e.g. concentration uses 100000 instead of 10000).
    #[arg(long, default_value_t = false)]
    full_scale: bool,
}

#[derive(Args, Debug)]
struct ProbcheckArgs {
    #[command(subcommand)]
    what: ProbcheckCommand,
}

#[derive(Subcommand, Debug)]
enum ProbcheckCommand {
    /// Pseudo-inverse norm and rank-deficiency rates per oversampling.
    Pinv(PinvArgs),
    /// Sample one tail inequality.
    Tail(TailArgs),
    /// Distribution of estimator errors across starting guesses.
    Errdist(ErrdistArgs),
}

#[derive(Args, Debug)]
struct PinvArgs {
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, value_enum, default_value_t = DistArg::Rademacher)]
    dist: DistArg,
    #[arg(long, default_value_t = 500)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    p_min: usize,
    #[arg(long, default_value_t = 40)]
    p_max: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct TailArgs {
    /// gauss-pinv | rad-col-norm | gauss-interaction | rad-interaction
    #[arg(long)]
    kind: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ErrdistArgs {
    #[arg(long)]
    matrix: String,
    #[arg(long, value_enum, default_value_t = DistArg::Gaussian)]
    dist: DistArg,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 20)]
    p: usize,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long, default_value_t = 1)]
    q: usize,
    #[arg(long, default_value_t = 1)]
    stabilize_period: usize,
    #[arg(long, default_value_t = 10000)]
    trials: usize,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for per-trial and histogram CSVs (skipped when omitted).
    #[arg(long)]
    csv_dir: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Resolved configuration, embedded in every output for provenance.
#[derive(Debug, Clone, Serialize)]
struct RunConfig {
    command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    matrix: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spec_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dist: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    l: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stabilize_period: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    extra: Option<serde_json::Value>,
}

impl RunConfig {
    fn new(command: &str) -> Self {
        RunConfig {
            command: command.to_string(),
            matrix: None,
            spec_file: None,
            dist: None,
            k: None,
            p: None,
            l: None,
            q: None,
            stabilize_period: None,
            seed: None,
            delta: None,
            rho: None,
            eps: None,
            gamma: None,
            trials: None,
            extra: None,
        }
    }
}

#[derive(Serialize)]
struct Report<T: Serialize> {
    format_version: u32,
    config: RunConfig,
    results: T,
}

/// Parse and execute a full command line (excluding the binary name is fine;
/// clap handles both). Returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own help/version output.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliFailure> {
    match cli.command {
        Command::Estimate(args) => cmd_estimate(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Plan(args) => cmd_plan(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Probcheck(args) => match args.what {
            ProbcheckCommand::Pinv(a) => cmd_probcheck_pinv(a),
            ProbcheckCommand::Tail(a) => cmd_probcheck_tail(a),
            ProbcheckCommand::Errdist(a) => cmd_probcheck_errdist(a),
        },
    }
}

fn load_operator(spec: &str) -> Result<(SymmetricOperator, Option<Vec<f64>>), Error> {
    if let Some(path) = spec.strip_prefix("file:") {
        Ok((read_matrix_market(Path::new(path))?, None))
    } else {
        let gen = GenSpec::parse(spec)?;
        let spectrum = gen.known_spectrum();
        Ok((gen.build()?, spectrum))
    }
}

fn resolve_samples(n: usize, k: Option<usize>, p: usize, l: Option<usize>) -> Result<usize, CliFailure> {
    let ell = match (l, k) {
        (Some(l), _) => l,
        (None, Some(k)) => {
            if k > n {
                return Err(CliFailure::usage(format!("k = {k} exceeds the dimension n = {n}")));
            }
            k + p
        }
        (None, None) => {
            return Err(CliFailure::usage("either --l or --k must be given"));
        }
    };
    if ell < 1 || ell > n {
        return Err(CliFailure::usage(format!(
            "sample count l = {ell} must satisfy 1 <= l <= n = {n}"
        )));
    }
    Ok(ell)
}

#[derive(Serialize)]
struct EstimateReport {
    trace: crate::estimators::EstimateResult,
    logdet_iplus: crate::estimators::EstimateResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    logdet_posdef: Option<crate::estimators::EstimateResult>,
    exact_trace: Option<f64>,
    exact_logdet_iplus: Option<f64>,
    rel_error_trace: Option<f64>,
    rel_error_logdet_iplus: Option<f64>,
    matvecs: u64,
    min_r_ratio: f64,
    attempts: usize,
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), CliFailure> {
    let (op, _) = load_operator(&args.matrix)?;
    let n = op.dim();
    let ell = resolve_samples(n, args.k, args.p, args.l)?;
    if args.q < 1 {
        return Err(CliFailure::usage("q must be at least 1"));
    }
    let dist: Distribution = args.dist.into();

    // Retry with derived seeds when the sketch itself is rank deficient.
    let mut attempt = 0;
    let out = loop {
        let seed = if attempt == 0 {
            args.seed
        } else {
            derive_seed(args.seed, u64::MAX - attempt as u64)
        };
        let sketch = draw_sketch(n, ell, dist, seed).map_err(Error::from)?;
        match subspace_iterate(&op, &sketch, args.q, args.stabilize_period) {
            Ok(out) => break out,
            Err(Error::RankDeficient { .. }) if attempt + 1 < 3 => {
                attempt += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        }
    };

    let trace = trace_from_restriction(&out);
    let logdet_iplus = logdet_iplus_from_restriction(&out).map_err(CliFailure::from)?;
    let logdet_posdef = logdet_from_restriction(&out).ok();

    let exact_trace = Some(op.exact_trace());
    let exact_logdet = op.exact_logdet_iplus().ok();
    let rel = |exact: Option<f64>, est: f64| {
        exact.and_then(|x| if x != 0.0 { Some((x - est) / x) } else { None })
    };

    let mut config = RunConfig::new("estimate");
    config.matrix = Some(args.matrix.clone());
    config.dist = Some(dist.to_string());
    config.k = args.k;
    config.p = Some(args.p);
    config.l = Some(ell);
    config.q = Some(args.q);
    config.stabilize_period = Some(args.stabilize_period);
    config.seed = Some(args.seed);

    let report = Report {
        format_version: FORMAT_VERSION,
        config,
        results: EstimateReport {
            matvecs: out.matvecs,
            min_r_ratio: out.min_r_ratio,
            attempts: attempt + 1,
            rel_error_trace: rel(exact_trace, trace.value),
            rel_error_logdet_iplus: rel(exact_logdet, logdet_iplus.value),
            exact_trace,
            exact_logdet_iplus: exact_logdet,
            trace,
            logdet_iplus,
            logdet_posdef,
        },
    };
    write_json(args.output.as_deref(), &report)
}

#[derive(Serialize)]
struct BoundsReport {
    n: usize,
    k: usize,
    gamma: f64,
    trace_tail: f64,
    delta_ratio: f64,
    delta_upper: f64,
    mu: f64,
    c_ge: Option<f64>,
    c_g: Option<f64>,
    c_r: Option<f64>,
    rademacher_min_samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace_bounds: Option<bounds::BoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    logdet_bounds: Option<bounds::BoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    logdet_posdef_upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    probabilistic_trace_upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    probabilistic_logdet_upper: Option<f64>,
}

fn load_spectrum(args: &BoundsArgs) -> Result<Vec<f64>, CliFailure> {
    if let Some(path) = &args.spec_file {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        #[derive(serde::Deserialize)]
        struct SpecFile {
            eigenvalues: Vec<f64>,
        }
        let parsed: SpecFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        Ok(parsed.eigenvalues)
    } else if let Some(matrix) = &args.matrix {
        let (op, known) = load_operator(matrix)?;
        if let Some(spectrum) = known {
            return Ok(spectrum);
        }
        let dense = op.to_dense().map_err(Error::from)?;
        Ok(sym_eig(&dense).map_err(Error::from)?.eigenvalues)
    } else {
        Err(CliFailure::usage("either --spec-file or --matrix is required"))
    }
}

fn cmd_bounds(args: BoundsArgs) -> Result<(), CliFailure> {
    let eigenvalues = load_spectrum(&args)?;
    let spectrum = SpectrumModel::new(eigenvalues, args.k).map_err(CliFailure::from)?;
    let n = spectrum.n();
    let k = spectrum.k();
    let gamma = gap_ratio(&spectrum).map_err(CliFailure::from)?;

    let constants = gaussian_constants(n, k, args.p, args.delta).ok();
    let (c_ge, c_g) = constants.map_or((None, None), |c| (Some(c.c_ge), c.c_g));
    let c_r = match (args.l, args.delta) {
        (Some(l), Some(delta)) => Some(rademacher_constant(n, k, l, delta, args.rho)?),
        _ => None,
    };
    let min_samples = args
        .delta
        .map(|delta| rademacher_min_samples(n, k, delta, args.rho))
        .transpose()?;

    let (trace_b, logdet_b, posdef_upper) = match args.w {
        Some(w) => (
            Some(trace_bounds_structural(&spectrum, args.q, w, None)?),
            Some(logdet_bounds_structural(&spectrum, args.q, w, None)?),
            logdet_posdef_upper(&spectrum, args.q, w).ok(),
        ),
        None => (None, None, None),
    };

    let prob_constant = args.delta.map(|delta| ProbabilisticConstant::GaussianConcentration {
        p: args.p,
        delta,
    });
    let prob_trace = prob_constant
        .as_ref()
        .map(|c| probabilistic_trace_upper(&spectrum, args.q, c))
        .transpose()?;
    let prob_logdet = prob_constant
        .as_ref()
        .map(|c| probabilistic_logdet_upper(&spectrum, args.q, c))
        .transpose()?;

    let mut config = RunConfig::new("bounds");
    config.spec_file = args.spec_file.as_ref().map(|p| p.display().to_string());
    config.matrix = args.matrix.clone();
    config.k = Some(args.k);
    config.q = Some(args.q);
    config.p = Some(args.p);
    config.l = args.l;
    config.delta = args.delta;
    config.rho = Some(args.rho);
    config.extra = args.w.map(|w| serde_json::json!({ "w": w }));

    let report = Report {
        format_version: FORMAT_VERSION,
        config,
        results: BoundsReport {
            n,
            k,
            gamma,
            trace_tail: spectrum.trace_tail(),
            delta_ratio: delta_ratio(&spectrum).map_err(CliFailure::from)?,
            delta_upper: delta_upper(gamma, n, k).map_err(CliFailure::from)?,
            mu: mu(n, k, args.p),
            c_ge,
            c_g,
            c_r,
            rademacher_min_samples: min_samples,
            trace_bounds: trace_b,
            logdet_bounds: logdet_b,
            logdet_posdef_upper: posdef_upper,
            probabilistic_trace_upper: prob_trace,
            probabilistic_logdet_upper: prob_logdet,
        },
    };
    write_json(args.output.as_deref(), &report)
}

fn cmd_plan(args: PlanArgs) -> Result<(), CliFailure> {
    let delta_ratio = match args.delta_ratio {
        Some(d) => d,
        None => delta_upper(args.gamma, args.n, args.k)?,
    };
    let dist: Distribution = args.dist.into();
    let plan = match dist {
        Distribution::Gaussian => {
            plan_gaussian(args.n, args.k, args.gamma, delta_ratio, args.eps, args.fail_prob)?
        }
        Distribution::Rademacher => plan_rademacher(
            args.n,
            args.k,
            args.gamma,
            delta_ratio,
            args.eps,
            args.fail_prob,
            args.rho,
        )?,
    };

    let mut config = RunConfig::new("plan");
    config.gamma = Some(args.gamma);
    config.eps = Some(args.eps);
    config.delta = Some(args.fail_prob);
    config.dist = Some(dist.to_string());
    config.k = Some(args.k);
    config.rho = Some(args.rho);
    config.extra = Some(serde_json::json!({ "n": args.n, "delta_ratio": delta_ratio }));

    let report = Report {
        format_version: FORMAT_VERSION,
        config,
        results: plan,
    };
    write_json(args.output.as_deref(), &report)
}

fn cmd_experiment(args: ExperimentArgs) -> Result<(), CliFailure> {
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::Io {
        path: args.out_dir.display().to_string(),
        message: e.to_string(),
    })?;
    let n = args.n.unwrap_or(128);
    let seed = args.seed;

    let mut config = RunConfig::new("experiment");
    config.seed = Some(seed);
    config.gamma = Some(args.gamma);
    config.extra = Some(serde_json::json!({
        "name": args.name,
        "n": n,
        "h": args.h,
        "l_coeff": args.l,
        "full_scale": args.full_scale,
    }));

    match args.name.as_str() {
        "gap" => {
            let trials = args.trials.unwrap_or(20);
            config.trials = Some(trials);
            let gammas = [0.86, 0.90, 0.94, 0.98];
            let ks: Vec<usize> = (5..=n - 25).step_by(5).collect();
            let rows = experiments::gap_experiment(
                n,
                &gammas,
                &ks,
                20,
                1,
                Distribution::Gaussian,
                trials,
                0.1,
                seed,
            )?;
            write_csv(
                &args.out_dir.join("gap.csv"),
                &config,
                "gamma,k,ell,median_trace_err,median_logdet_err,simplified_bound",
                rows.iter().map(|r| {
                    format!(
                        "{},{},{},{:.10e},{:.10e},{:.10e}",
                        r.gamma, r.k, r.ell, r.median_trace_err, r.median_logdet_err, r.simplified_bound
                    )
                }),
            )
        }
        "mc-compare" => {
            let trials = args.trials.unwrap_or(100);
            config.trials = Some(trials);
            let ks: Vec<usize> = (5..=n - 25).step_by(5).collect();
            let rows =
                experiments::mc_compare_experiment(n, args.gamma, &ks, 20, 1, trials, seed)?;
            write_csv(
                &args.out_dir.join("mc_compare.csv"),
                &config,
                "k,ell,subspace_trace_err,subspace_logdet_err,hutchinson_trace_err,gaussian_trace_err,hutchinson_logdet_err,gaussian_logdet_err",
                rows.iter().map(|r| {
                    format!(
                        "{},{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
                        r.k,
                        r.ell,
                        r.subspace_trace_err,
                        r.subspace_logdet_err,
                        r.hutchinson_trace_err,
                        r.gaussian_trace_err,
                        r.hutchinson_logdet_err,
                        r.gaussian_logdet_err
                    )
                }),
            )
        }
        "subspace-q" => {
            let trials = args.trials.unwrap_or(20);
            config.trials = Some(trials);
            let ks: Vec<usize> = (10..=n.min(100)).step_by(10).collect();
            let qs = [1, 2, 3, 4, 5];
            let rows = experiments::subspace_q_experiment(
                n,
                args.gamma,
                &ks,
                &qs,
                Distribution::Gaussian,
                trials,
                seed,
            )?;
            write_csv(
                &args.out_dir.join("subspace_q.csv"),
                &config,
                "q,k,ell,median_trace_err,median_logdet_err",
                rows.iter().map(|r| {
                    format!(
                        "{},{},{},{:.10e},{:.10e}",
                        r.q, r.k, r.ell, r.median_trace_err, r.median_logdet_err
                    )
                }),
            )
        }
        "bound-quality" => {
            let trials = args.trials.unwrap_or(100);
            config.trials = Some(trials);
            let ks: Vec<usize> = (5..=n - 25).step_by(5).collect();
            let rows = experiments::bound_quality_experiment(
                n,
                args.gamma,
                &ks,
                20,
                1,
                &[Distribution::Gaussian, Distribution::Rademacher],
                trials,
                seed,
            )?;
            write_csv(
                &args.out_dir.join("bound_quality.csv"),
                &config,
                "dist,k,ell,median_rel_err,median_est1,median_est2,delta",
                rows.iter().map(|r| {
                    format!(
                        "{},{},{},{:.10e},{:.10e},{:.10e},{:.10e}",
                        r.dist, r.k, r.ell, r.median_rel_err, r.median_est1, r.median_est2, r.delta
                    )
                }),
            )
        }
        "concentration" => {
            let trials = args.trials.unwrap_or(if args.full_scale { 100_000 } else { 10_000 });
            config.trials = Some(trials);
            let ells = [30, 50, 70];
            let cells =
                experiments::concentration_experiment(n, args.gamma, &ells, 1, trials, 50, seed)?;
            write_csv(
                &args.out_dir.join("concentration_summary.csv"),
                &config,
                "dist,ell,trace_mean,trace_variance,trace_q05,trace_q50,trace_q95,logdet_mean,logdet_variance",
                cells.iter().map(|c| {
                    format!(
                        "{},{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
                        c.dist,
                        c.ell,
                        c.errors.trace.mean,
                        c.errors.trace.variance,
                        c.errors.trace.quantiles.0,
                        c.errors.trace.quantiles.1,
                        c.errors.trace.quantiles.2,
                        c.errors.logdet.mean,
                        c.errors.logdet.variance
                    )
                }),
            )?;
            for cell in &cells {
                let path = args
                    .out_dir
                    .join(format!("concentration_hist_{}_l{}.csv", cell.dist, cell.ell));
                let mut file = create_file(&path)?;
                write_config_header(&mut file, &config)?;
                write_histogram_csv(&mut file, &cell.errors.trace_histogram)?;
            }
            Ok(())
        }
        "medium" => {
            let trials = args.trials.unwrap_or(10);
            config.trials = Some(trials);
            let spec = OuterSumSpec {
                n: args.n.unwrap_or(5000),
                h: args.h,
                l: args.l,
                seed: derive_seed(seed, 424242),
                ..OuterSumSpec::default()
            };
            let ells: Vec<usize> = (10..=100).step_by(10).collect();
            let rows = experiments::medium_experiment(
                &spec,
                &ells,
                1,
                Distribution::Gaussian,
                trials,
                seed,
            )?;
            write_csv(
                &args.out_dir.join("medium.csv"),
                &config,
                "ell,median_trace_err,median_logdet_err",
                rows.iter().map(|r| {
                    format!("{},{:.10e},{:.10e}", r.ell, r.median_trace_err, r.median_logdet_err)
                }),
            )
        }
        other => Err(CliFailure::usage(format!(
            "unknown experiment '{other}' (expected gap, mc-compare, subspace-q, bound-quality, concentration, or medium)"
        ))),
    }
}

fn cmd_probcheck_pinv(args: PinvArgs) -> Result<(), CliFailure> {
    if args.p_min > args.p_max {
        return Err(CliFailure::usage("--p-min must not exceed --p-max"));
    }
    let p_values: Vec<usize> = (args.p_min..=args.p_max).collect();
    let dist: Distribution = args.dist.into();
    let rows = pinv_norm_experiment(args.k, &p_values, dist, args.trials, args.seed)?;

    let mut config = RunConfig::new("probcheck-pinv");
    config.k = Some(args.k);
    config.dist = Some(dist.to_string());
    config.trials = Some(args.trials);
    config.seed = Some(args.seed);

    let report = Report {
        format_version: FORMAT_VERSION,
        config,
        results: rows,
    };
    write_json(args.output.as_deref(), &report)
}

fn cmd_probcheck_tail(args: TailArgs) -> Result<(), CliFailure> {
    let need = |v: Option<usize>, name: &str| {
        v.ok_or_else(|| CliFailure::usage(format!("--{name} is required for this kind")))
    };
    let need_f = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| CliFailure::usage(format!("--{name} is required for this kind")))
    };
    let kind = match args.kind.as_str() {
        "gauss-pinv" => TailBoundKind::GaussianPinv {
            k: need(args.k, "k")?,
            p: need(args.p, "p")?,
            t: args.t.unwrap_or(2.0),
        },
        "rad-col-norm" => TailBoundKind::RademacherColumnNorm {
            n: need(args.n, "n")?,
            r: need(args.r, "r")?,
            delta: need_f(args.delta, "delta")?,
            basis_seed: derive_seed(args.seed, 0xBA515),
        },
        "gauss-interaction" => TailBoundKind::GaussianInteraction {
            n: need(args.n, "n")?,
            k: need(args.k, "k")?,
            p: need(args.p, "p")?,
            delta: need_f(args.delta, "delta")?,
        },
        "rad-interaction" => TailBoundKind::RademacherInteraction {
            n: need(args.n, "n")?,
            k: need(args.k, "k")?,
            l: need(args.l, "l")?,
            delta: need_f(args.delta, "delta")?,
            rho: args.rho,
        },
        other => {
            return Err(CliFailure::usage(format!(
                "unknown tail kind '{other}' (expected gauss-pinv, rad-col-norm, gauss-interaction, or rad-interaction)"
            )))
        }
    };
    let check = tail_bound_check(kind, args.trials, args.seed)?;

    let mut config = RunConfig::new("probcheck-tail");
    config.trials = Some(args.trials);
    config.seed = Some(args.seed);
    config.rho = Some(args.rho);
    config.extra = Some(serde_json::json!({
        "kind": args.kind,
        "n": args.n, "k": args.k, "p": args.p, "r": args.r, "l": args.l,
        "t": args.t, "delta": args.delta,
    }));

    let report = Report {
        format_version: FORMAT_VERSION,
        config,
        results: check,
    };
    write_json(args.output.as_deref(), &report)
}

fn cmd_probcheck_errdist(args: ErrdistArgs) -> Result<(), CliFailure> {
    let gen = if args.matrix.starts_with("file:") {
        return Err(CliFailure::usage(
            "errdist needs a generator spec so exact references are available",
        ));
    } else {
        GenSpec::parse(&args.matrix)?
    };
    let n = match &gen {
        GenSpec::Geometric { n, .. } | GenSpec::ExactRank { n, .. } => *n,
        GenSpec::OuterSum(s) => s.n,
    };
    let ell = resolve_samples(n, args.k, args.p, args.l)?;
    let dist: Distribution = args.dist.into();
    let est_config = EstimatorConfig {
        distribution: dist,
        samples: ell,
        iterations: args.q,
        stabilize_period: args.stabilize_period,
    };
    let result = error_distribution(&gen, &est_config, args.trials, args.bins, args.seed)?;

    if let Some(dir) = &args.csv_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
        let mut f = create_file(&dir.join("errdist_trace_values.csv"))?;
        write_values_csv(&mut f, "delta_t", &result.trace_values)?;
        let mut f = create_file(&dir.join("errdist_logdet_values.csv"))?;
        write_values_csv(&mut f, "delta_l", &result.logdet_values)?;
        let mut f = create_file(&dir.join("errdist_trace_hist.csv"))?;
        write_histogram_csv(&mut f, &result.trace_histogram)?;
        let mut f = create_file(&dir.join("errdist_logdet_hist.csv"))?;
        write_histogram_csv(&mut f, &result.logdet_histogram)?;
    }

    let mut config = RunConfig::new("probcheck-errdist");
    config.matrix = Some(args.matrix.clone());
    config.dist = Some(dist.to_string());
    config.l = Some(ell);
    config.q = Some(args.q);
    config.stabilize_period = Some(args.stabilize_period);
    config.trials = Some(args.trials);
    config.seed = Some(args.seed);

    #[derive(Serialize)]
    struct ErrdistReport {
        trace: crate::probcheck::TrialSummary,
        logdet: crate::probcheck::TrialSummary,
    }
    let report = Report {
        format_version: FORMAT_VERSION,
        config,
        results: ErrdistReport {
            trace: result.trace,
            logdet: result.logdet,
        },
    };
    write_json(args.output.as_deref(), &report)
}

fn write_json<T: Serialize>(path: Option<&Path>, report: &Report<T>) -> Result<(), CliFailure> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| CliFailure { code: 4, message: e.to_string() })?;
    match path {
        Some(path) => {
            std::fs::write(path, text + "\n").map_err(|e| Error::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn create_file(path: &Path) -> Result<std::fs::File, CliFailure> {
    std::fs::File::create(path)
        .map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
        .map_err(CliFailure::from)
}

fn write_config_header<W: Write>(w: &mut W, config: &RunConfig) -> Result<(), CliFailure> {
    writeln!(w, "# format_version: {FORMAT_VERSION}")?;
    writeln!(
        w,
        "# config: {}",
        serde_json::to_string(config).map_err(|e| CliFailure { code: 4, message: e.to_string() })?
    )?;
    Ok(())
}

fn write_csv(
    path: &Path,
    config: &RunConfig,
    header: &str,
    rows: impl Iterator<Item = String>,
) -> Result<(), CliFailure> {
    let mut file = create_file(path)?;
    write_config_header(&mut file, config)?;
    writeln!(file, "{header}")?;
    for row in rows {
        writeln!(file, "{row}")?;
    }
    Ok(())
}
