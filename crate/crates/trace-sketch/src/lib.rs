//! Matrix-free estimation of the trace and log-determinant of symmetric
//! positive semi-definite operators.
//!
//! The estimators run randomized subspace iteration: a random starting
//! guess is powered through the operator, orthonormalized, and the
//! operator's restriction to the captured subspace yields `tr(T) <= tr(A)`
//! and `logdet(I + T) <= logdet(I + A)`. Both estimates improve rapidly
//! when the spectrum decays or has a gap, and every error is controlled by
//! closed-form structural bounds (for a realized starting guess) and
//! probabilistic bounds (for Gaussian and Rademacher guesses).
//!
//! Modules:
//! - [`kernels`]: dense QR / eigendecomposition / Cholesky / singular values
//! - [`operators`]: matrix-free operator variants with matvec accounting
//! - [`rng`]: counter-based reproducible random stream
//! - [`sketch`]: starting guesses, eigenspace projections, interaction norm
//! - [`subspace`]: the subspace iteration itself
//! - [`estimators`]: subspace estimators and Monte Carlo baselines
//! - [`bounds`]: bound formulas, constants, and the (eps, delta) planner
//! - [`genmat`]: synthetic test-matrix generators
//! - [`probcheck`]: empirical verification of the probabilistic claims
//! - [`experiments`]: sweep drivers behind the CLI
//!
//! The `examples/` directory demonstrates each capability end to end; the
//! `trace-sketch` binary exposes everything as subcommands.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod genmat;
pub mod kernels;
pub mod operators;
mod parallel;
pub mod probcheck;
pub mod rng;
pub mod sketch;
pub mod subspace;

pub use error::{Error, Result};
pub use kernels::DenseMatrix;
pub use operators::{MatvecContext, SymmetricOperator};
pub use sketch::{draw_sketch, Distribution, SketchMatrix};
pub use subspace::{subspace_iterate, SubspaceOutput};

pub use parallel::THREADS_ENV_VAR;
