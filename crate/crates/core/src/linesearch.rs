//! Variance-informed initial steplength and backtracking on the sampled objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::{EvalCounter, FiniteSumProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearchConfig {
    /// Sufficient-decrease constant, `0 < c1 < 1`.
    pub c1: f64,
    pub max_halvings: u32,
    /// Largest admissible first trial.
    pub alpha_cap: f64,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            max_halvings: 30,
            alpha_cap: 1.0,
        }
    }
}

impl LineSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c1 < 1.0) {
            return Err(Error::usage("c1 must lie in (0, 1)"));
        }
        if self.max_halvings == 0 {
            return Err(Error::usage("max_halvings must be at least 1"));
        }
        if !(self.alpha_cap > 0.0) {
            return Err(Error::usage("alpha_cap must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineSearchOutcome {
    /// `alpha0 · 2^(−halvings)`.
    pub alpha: f64,
    pub halvings: u32,
    /// Sampled-objective evaluations, the one at `x` included.
    pub value_evals: u32,
    pub satisfied: bool,
}

/// `(1 + variance / (|S|·‖g^S‖²))⁻¹ ∈ (0, 1]`.
pub fn initial_steplength(grad_variance: f64, batch_size: usize, grad_norm_sq: f64) -> Result<f64> {
    if !(grad_norm_sq > 0.0) {
        return Err(Error::usage("initial steplength needs a nonzero gradient"));
    }
    if batch_size == 0 || !(grad_variance >= 0.0) {
        return Err(Error::usage(
            "initial steplength needs batch_size >= 1 and variance >= 0",
        ));
    }
    Ok(1.0 / (1.0 + grad_variance / (batch_size as f64 * grad_norm_sq)))
}

/// `(1/(|S^v| − 1)) Σ ‖g_i − g^S‖²`.
pub fn gradient_variance<'a, I>(per_sample: I, batch_gradient: &[f64]) -> Result<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut count = 0usize;
    let mut ss = 0.0;
    for g in per_sample {
        ss += g
            .iter()
            .zip(batch_gradient)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        count += 1;
    }
    if count < 2 {
        return Err(Error::usage("gradient variance needs at least two samples"));
    }
    Ok(ss / (count - 1) as f64)
}

/// Halves `alpha0` until `F_S(x + αp) ≤ F_S(x) − c1·α·gᵀHg`, where `gᵀHg = −gᵀp`.
///
/// Trials with a non-finite value count as failures. When `max_halvings` is
/// exhausted the last trial is returned with `satisfied = false`.
pub fn armijo_backtrack<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    sample: &[usize],
    x: &[f64],
    direction: &[f64],
    batch_gradient: &[f64],
    alpha0: f64,
    config: &LineSearchConfig,
    counter: &mut EvalCounter,
) -> Result<LineSearchOutcome> {
    if !(alpha0 > 0.0 && alpha0 <= config.alpha_cap) {
        return Err(Error::usage(format!(
            "initial trial {alpha0} outside (0, {}]",
            config.alpha_cap
        )));
    }
    let f0 = problem.batch_value(sample, x, counter)?;
    let decrease = -linalg::dot(batch_gradient, direction);
    let mut alpha = alpha0;
    let mut halvings = 0;
    let mut value_evals = 1;
    loop {
        let trial = linalg::step(x, alpha, direction);
        let f = problem.batch_value(sample, &trial, counter)?;
        value_evals += 1;
        if f.is_finite() && f <= f0 - config.c1 * alpha * decrease {
            return Ok(LineSearchOutcome {
                alpha,
                halvings,
                value_evals,
                satisfied: true,
            });
        }
        if halvings == config.max_halvings {
            return Ok(LineSearchOutcome {
                alpha,
                halvings,
                value_evals,
                satisfied: false,
            });
        }
        alpha *= 0.5;
        halvings += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::QuadraticProblem;

    /// `F(x) = (a/2) x²` as a one-component quadratic.
    fn scalar_quadratic(a: f64) -> QuadraticProblem {
        QuadraticProblem::new(&[vec![a]], &[vec![0.0]]).unwrap()
    }

    #[test]
    fn initial_step_examples() {
        assert_eq!(initial_steplength(0.0, 10, 3.0).unwrap(), 1.0);
        assert_eq!(initial_steplength(8.0, 4, 2.0).unwrap(), 0.5);
        assert!((initial_steplength(1.0, 2, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(initial_steplength(1.0, 2, 0.0).is_err());
    }

    #[test]
    fn gradient_variance_examples() {
        let g1 = [0.0, 0.0];
        let g2 = [2.0, 0.0];
        let v = gradient_variance([&g1[..], &g2[..]], &[1.0, 0.0]).unwrap();
        assert_eq!(v, 2.0);
        let same = [1.0, 1.0];
        assert_eq!(gradient_variance([&same[..], &same[..]], &same).unwrap(), 0.0);
        assert!(gradient_variance([&same[..]], &same).is_err());
    }

    #[test]
    fn accepts_unit_step_on_half_square() {
        let p = scalar_quadratic(1.0);
        let mut c = EvalCounter::default();
        let out = armijo_backtrack(
            &p,
            &[0],
            &[1.0],
            &[-1.0],
            &[1.0],
            1.0,
            &LineSearchConfig::default(),
            &mut c,
        )
        .unwrap();
        assert_eq!(
            out,
            LineSearchOutcome {
                alpha: 1.0,
                halvings: 0,
                value_evals: 2,
                satisfied: true
            }
        );
        assert_eq!(c.value_evals, 2);
    }

    #[test]
    fn halves_once_on_square() {
        let p = scalar_quadratic(2.0);
        let mut c = EvalCounter::default();
        let out = armijo_backtrack(
            &p,
            &[0],
            &[1.0],
            &[-2.0],
            &[2.0],
            1.0,
            &LineSearchConfig::default(),
            &mut c,
        )
        .unwrap();
        assert_eq!(out.alpha, 0.5);
        assert_eq!(out.halvings, 1);
        assert_eq!(out.value_evals, 3);
        assert!(out.satisfied);
    }

    #[test]
    fn floor_reports_unsatisfied() {
        // ascent direction: never satisfiable
        let p = scalar_quadratic(1.0);
        let cfg = LineSearchConfig {
            max_halvings: 3,
            ..Default::default()
        };
        let mut c = EvalCounter::default();
        let out = armijo_backtrack(&p, &[0], &[1.0], &[1.0], &[-1.0], 1.0, &cfg, &mut c).unwrap();
        assert!(!out.satisfied);
        assert_eq!(out.halvings, 3);
        assert_eq!(out.alpha, 0.125);
        assert_eq!(out.value_evals, 5);
    }
}
