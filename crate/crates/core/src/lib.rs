//! Progressive-batching stochastic L-BFGS.
//!
//! The crate is organized around a finite-sum objective `F(x) = (1/N) Σ F_i(x)`
//! and an optimizer that samples a batch of components per iteration, grows the
//! batch when an inner-product test on the quasi-Newton direction fails, picks
//! the first trial step from the observed gradient variance, backtracks on the
//! sampled objective, and updates a limited-memory inverse Hessian with either
//! full-overlap or multi-batch curvature pairs.
//!
//! Modules:
//! - [`problems`]: the [`FiniteSumProblem`] trait plus logistic, quadratic and
//!   sigmoid objectives.
//! - [`lbfgs`]: curvature memory and the two-loop recursion.
//! - [`batching`]: sample management and the batch-size controller.
//! - [`linesearch`]: variance-based initial step and stochastic Armijo backtracking.
//! - [`optimizer`]: the PBQN driver and the SG / SVRG baselines.
//! - [`theory`]: Monte Carlo checks of the convergence bounds on small problems.
//! - [`data`]: LIBSVM-format parsing, splitting and the dataset registry.
//! - [`bench`]: metrics, reference optimum, performance model and experiment runner.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batching;
pub mod bench;
pub mod data;
pub mod error;
pub mod lbfgs;
pub mod linalg;
pub mod linesearch;
pub mod optimizer;
pub mod problems;
pub mod theory;

pub use error::{Error, Result};
pub use lbfgs::CurvatureMemory;
pub use optimizer::{run_pbqn, CurvatureMode, IterationRecord, PbqnConfig};
pub use problems::{EvalCounter, FiniteSumProblem, LogisticProblem, QuadraticProblem};

/// Seeded generator used for every sampling decision in a run.
pub type RunRng = rand_chacha::ChaCha8Rng;

/// Builds the run generator from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> RunRng {
    use rand::SeedableRng;
    RunRng::seed_from_u64(seed)
}
