//! Optimizer drivers: progressive-batching L-BFGS and the first-order baselines.

mod baselines;
mod pbqn;

pub use baselines::{
    power_of_two_grid, run_sg, run_sg_with, run_svrg, run_svrg_with, tune_baseline, SgConfig, SvrgConfig, TuneResult,
};
pub use pbqn::{pbqn_step, run_pbqn, run_pbqn_with, PbqnState};

use serde::{Deserialize, Serialize};

use crate::batching::BatchControllerConfig;
use crate::error::{Error, Result};
use crate::lbfgs::Admission;
use crate::linesearch::LineSearchConfig;

/// How the gradient difference `y_k` of a curvature pair is formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CurvatureMode {
    /// `y = g^{S_k}(x_{k+1}) − g^{S_k}(x_k)`: a second gradient pass on the same sample.
    FullOverlap,
    /// `y = g^{O_k}(x_{k+1}) − g^{O_k}(x_k)` on the overlap with the next sample.
    MultiBatch { overlap_fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopCriteria {
    /// Budget in full-gradient equivalents (component gradient evaluations / N).
    pub max_fge: f64,
    /// Stop once `‖∇F(x)‖∞` is at most this. Costs one monitoring pass per iteration.
    pub gradient_tolerance: Option<f64>,
    pub max_iterations: usize,
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self {
            max_fge: 100.0,
            gradient_tolerance: None,
            max_iterations: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PbqnConfig {
    pub controller: BatchControllerConfig,
    pub linesearch: LineSearchConfig,
    pub memory_size: usize,
    /// Cautious-update threshold `ε` in `yᵀs > ε‖s‖²`.
    pub curvature_eps: f64,
    pub curvature_mode: CurvatureMode,
    /// Scale the sample variance in the initial steplength by `1 − |S|/N`,
    /// the without-replacement factor, so a full-population batch starts at `α = 1`.
    pub finite_population_correction: bool,
    pub stop: StopCriteria,
    /// Record the full training objective after every step. Not charged to the budget.
    pub monitor_train_loss: bool,
}

impl Default for PbqnConfig {
    fn default() -> Self {
        Self {
            controller: BatchControllerConfig::default(),
            linesearch: LineSearchConfig::default(),
            memory_size: 10,
            curvature_eps: 1e-2,
            curvature_mode: CurvatureMode::MultiBatch { overlap_fraction: 0.25 },
            finite_population_correction: true,
            stop: StopCriteria::default(),
            monitor_train_loss: true,
        }
    }
}

impl PbqnConfig {
    pub fn validate(&self) -> Result<()> {
        self.controller.validate()?;
        self.linesearch.validate()?;
        if self.memory_size == 0 {
            return Err(Error::usage("memory size must be at least 1"));
        }
        if !(self.curvature_eps > 0.0) {
            return Err(Error::usage("curvature eps must be positive"));
        }
        if let CurvatureMode::MultiBatch { overlap_fraction } = self.curvature_mode {
            if !(overlap_fraction > 0.0 && overlap_fraction < 1.0) {
                return Err(Error::usage("overlap fraction must lie in (0, 1)"));
            }
        }
        Ok(())
    }
}

/// Telemetry for one iteration. Counters are cumulative over the run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    /// Iterations completed; `0` is the starting point.
    pub k: usize,
    pub batch_size: usize,
    /// Accepted steplength (0 for the starting record).
    pub alpha: f64,
    /// First trial steplength.
    pub alpha0: f64,
    pub halvings: u32,
    pub line_search_satisfied: bool,
    pub batch_grew: bool,
    pub pair_admitted: bool,
    pub admission: Option<Admission>,
    pub component_grad_evals: u64,
    pub component_value_evals: u64,
    pub fge: f64,
    /// Full objective at the new iterate, NaN when monitoring is off.
    pub train_loss: f64,
    /// Norm of the gradient that produced the step.
    pub grad_norm: f64,
    pub converged: bool,
}

impl IterationRecord {
    pub(crate) fn start(batch_size: usize, train_loss: f64) -> Self {
        Self {
            k: 0,
            batch_size,
            alpha: 0.0,
            alpha0: 0.0,
            halvings: 0,
            line_search_satisfied: true,
            batch_grew: false,
            pair_admitted: false,
            admission: None,
            component_grad_evals: 0,
            component_value_evals: 0,
            fge: 0.0,
            train_loss,
            grad_norm: f64::NAN,
            converged: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    Budget,
    GradientTolerance,
    /// The sampled gradient vanished.
    Converged,
    MaxIterations,
    /// The iterate became non-finite (baselines only).
    Diverged,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<IterationRecord>,
    pub x: Vec<f64>,
    pub stop: StopReason,
    pub counter: crate::problems::EvalCounter,
}

impl Trajectory {
    pub fn last(&self) -> &IterationRecord {
        self.records
            .last()
            .expect("trajectory always holds the starting record")
    }
}
