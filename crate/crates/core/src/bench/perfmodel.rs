//! Analytic training-time comparison between PBQN and SG on `N` nodes.
//!
//! PBQN wins when `I_L·C_L·B̂_L/N < I_S·C_S·B_S/(N·P_e(N))`, i.e. when the
//! iteration ratio `I_L/I_S` is below `(C_S/C_L)·(B_S/B̂_L)/P_e(N)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfModelInput {
    /// PBQN iterations to the target accuracy.
    pub iters_large: f64,
    /// SG iterations to the target accuracy.
    pub iters_small: f64,
    /// PBQN cost per iteration.
    pub cost_large: f64,
    /// SG cost per iteration.
    pub cost_small: f64,
    /// SG batch size.
    pub batch_small: f64,
    /// Effective PBQN batch size.
    pub batch_large: f64,
    /// SG parallel efficiency on `nodes` nodes, in `(0, 1]`.
    pub parallel_efficiency: f64,
    pub nodes: f64,
}

impl Default for PerfModelInput {
    /// Cost ratio 4/3 (one extra forward pass per iteration), 4× larger
    /// effective batch, and SG parallel efficiency 0.2.
    fn default() -> Self {
        Self {
            iters_large: 1.0,
            iters_small: 1.0,
            cost_large: 4.0,
            cost_small: 3.0,
            batch_small: 1.0,
            batch_large: 4.0,
            parallel_efficiency: 0.2,
            nodes: 1.0,
        }
    }
}

impl PerfModelInput {
    fn validate(&self) -> Result<()> {
        let fields = [
            self.iters_large,
            self.iters_small,
            self.cost_large,
            self.cost_small,
            self.batch_small,
            self.batch_large,
            self.nodes,
        ];
        if fields.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::usage("performance model inputs must be positive and finite"));
        }
        if !(self.parallel_efficiency > 0.0 && self.parallel_efficiency <= 1.0) {
            return Err(Error::usage("parallel efficiency must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// `(C_S/C_L)·(B_S/B̂_L)·(1/P_e)`.
pub fn perf_model_threshold(input: &PerfModelInput) -> Result<f64> {
    input.validate()?;
    Ok((input.cost_small / input.cost_large) * (input.batch_small / input.batch_large) / input.parallel_efficiency)
}

/// `true` when `I_L/I_S` is below the threshold.
pub fn predicts_speedup(input: &PerfModelInput) -> Result<bool> {
    Ok(input.iters_large / input.iters_small < perf_model_threshold(input)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_constants() {
        assert_eq!(perf_model_threshold(&PerfModelInput::default()).unwrap(), 0.9375);
    }

    #[test]
    fn neutral_and_linear() {
        let neutral = PerfModelInput {
            cost_large: 2.0,
            cost_small: 2.0,
            batch_small: 8.0,
            batch_large: 8.0,
            parallel_efficiency: 1.0,
            ..Default::default()
        };
        assert_eq!(perf_model_threshold(&neutral).unwrap(), 1.0);
        let base = perf_model_threshold(&PerfModelInput::default()).unwrap();
        let doubled = PerfModelInput {
            batch_large: 8.0,
            ..Default::default()
        };
        assert_eq!(perf_model_threshold(&doubled).unwrap(), base / 2.0);
        assert!(perf_model_threshold(&PerfModelInput {
            parallel_efficiency: 0.0,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn speedup_prediction() {
        let fast = PerfModelInput {
            iters_large: 90.0,
            iters_small: 100.0,
            ..Default::default()
        };
        assert!(predicts_speedup(&fast).unwrap());
        let slow = PerfModelInput {
            iters_large: 95.0,
            iters_small: 100.0,
            ..Default::default()
        };
        assert!(!predicts_speedup(&slow).unwrap());
    }
}
