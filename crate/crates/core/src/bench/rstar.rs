//! Reference optimum `R*` from deterministic full-batch L-BFGS.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lbfgs::CurvatureMemory;
use crate::linalg;
use crate::linesearch::{armijo_backtrack, LineSearchConfig};
use crate::problems::{EvalCounter, FiniteSumProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RstarOptions {
    /// Stop once `‖∇R(x)‖∞` is at most this.
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    pub memory_size: usize,
}

impl Default for RstarOptions {
    fn default() -> Self {
        Self {
            gradient_tolerance: 1e-8,
            max_iterations: 10_000,
            memory_size: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rstar {
    pub value: f64,
    pub iterations: usize,
    pub grad_inf: f64,
    pub x: Vec<f64>,
}

/// Full-batch L-BFGS from the origin with unit first trials and Armijo backtracking.
///
/// A failed line search restarts from steepest descent with an empty memory;
/// a second consecutive failure, or the iteration cap, is an error.
pub fn compute_rstar<P: FiniteSumProblem + ?Sized>(problem: &P, opts: &RstarOptions) -> Result<Rstar> {
    let n = problem.num_components();
    let all: Vec<usize> = (0..n).collect();
    let ls = LineSearchConfig {
        c1: 1e-4,
        max_halvings: 60,
        alpha_cap: 1.0,
    };
    let mut counter = EvalCounter::default();
    let mut memory = CurvatureMemory::new(opts.memory_size);
    let mut x = vec![0.0; problem.dim()];
    let mut g = problem.batch_gradient(&all, &x, &mut counter)?;
    let mut failures = 0;
    for it in 0..opts.max_iterations {
        let grad_inf = linalg::norm_inf(&g);
        if grad_inf <= opts.gradient_tolerance {
            let value = problem.full_value(&x);
            return Ok(Rstar {
                value,
                iterations: it,
                grad_inf,
                x,
            });
        }
        let p: Vec<f64> = memory.apply(&g).iter().map(|v| -v).collect();
        let out = armijo_backtrack(problem, &all, &x, &p, &g, 1.0, &ls, &mut counter)?;
        if !out.satisfied {
            failures += 1;
            if failures > 1 || memory.is_empty() {
                return Err(Error::NotConverged {
                    iterations: it,
                    best_value: problem.full_value(&x),
                    grad_inf,
                });
            }
            memory = CurvatureMemory::new(opts.memory_size);
            continue;
        }
        failures = 0;
        let x_next = linalg::step(&x, out.alpha, &p);
        let g_next = problem.batch_gradient(&all, &x_next, &mut counter)?;
        let s = linalg::sub(&x_next, &x);
        let y = linalg::sub(&g_next, &g);
        memory.try_admit(&s, &y, 1e-12);
        x = x_next;
        g = g_next;
    }
    Err(Error::NotConverged {
        iterations: opts.max_iterations,
        best_value: problem.full_value(&x),
        grad_inf: linalg::norm_inf(&g),
    })
}

/// `R*` values keyed by [`FiniteSumProblem::content_hash`], optionally persisted
/// as a JSON map in a file beside the dataset.
#[derive(Debug, Default)]
pub struct RstarCache {
    file: Option<PathBuf>,
    values: Mutex<HashMap<String, f64>>,
}

impl RstarCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Cache stored at `<dataset>.rstar.json`; an unreadable file starts empty.
    pub fn beside(dataset: &Path) -> Self {
        let mut name = dataset.as_os_str().to_owned();
        name.push(".rstar.json");
        let file = PathBuf::from(name);
        let values = std::fs::read_to_string(&file)
            .ok()
            .and_then(|s| serde_json::from_str(&s).ok())
            .unwrap_or_default();
        Self {
            file: Some(file),
            values: Mutex::new(values),
        }
    }

    pub fn get_or_compute<P: FiniteSumProblem + ?Sized>(&self, problem: &P, opts: &RstarOptions) -> Result<f64> {
        let key = problem.content_hash();
        if let Some(&v) = self.values.lock().expect("cache lock").get(&key) {
            return Ok(v);
        }
        let value = compute_rstar(problem, opts)?.value;
        let mut values = self.values.lock().expect("cache lock");
        values.insert(key, value);
        if let Some(path) = &self.file {
            std::fs::write(path, serde_json::to_string_pretty(&*values)?)?;
        }
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::QuadraticProblem;
    use crate::seeded_rng;

    #[test]
    fn quadratic_optimum() {
        let q = QuadraticProblem::synthetic(6, 0.1, 1.0, 20, &mut seeded_rng(3)).unwrap();
        let r = compute_rstar(&q, &RstarOptions::default()).unwrap();
        assert!((r.value - q.optimal_value()).abs() <= 1e-12);
        assert!(r.grad_inf <= 1e-8);
    }

    #[test]
    fn cache_returns_identical_value() {
        let q = QuadraticProblem::synthetic(3, 0.5, 1.0, 5, &mut seeded_rng(1)).unwrap();
        let cache = RstarCache::in_memory();
        let a = cache.get_or_compute(&q, &RstarOptions::default()).unwrap();
        let b = cache
            .get_or_compute(
                &q,
                &RstarOptions {
                    max_iterations: 0,
                    ..Default::default()
                },
            )
            .unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn iteration_cap_is_an_error() {
        let q = QuadraticProblem::synthetic(6, 0.01, 1.0, 20, &mut seeded_rng(3)).unwrap();
        let opts = RstarOptions {
            max_iterations: 1,
            ..Default::default()
        };
        assert!(matches!(compute_rstar(&q, &opts), Err(Error::NotConverged { .. })));
    }
}
