//! Constant-step SG and SVRG, plus the steplength sweep used to tune them.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{IterationRecord, StopReason, Trajectory};
use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::{EvalCounter, FiniteSumProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgConfig {
    pub batch_size: usize,
    pub alpha: f64,
    pub max_fge: f64,
    /// Spacing of recorded points in full-gradient equivalents.
    pub record_every_fge: f64,
    pub monitor_train_loss: bool,
}

impl Default for SgConfig {
    fn default() -> Self {
        Self {
            batch_size: 1,
            alpha: 1.0,
            max_fge: 100.0,
            record_every_fge: 0.1,
            monitor_train_loss: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrgConfig {
    /// Inner steps per anchor; `None` means `N`.
    pub inner_len: Option<usize>,
    pub alpha: f64,
    pub max_fge: f64,
    pub record_every_fge: f64,
    pub monitor_train_loss: bool,
}

impl Default for SvrgConfig {
    fn default() -> Self {
        Self {
            inner_len: None,
            alpha: 1.0,
            max_fge: 100.0,
            record_every_fge: 0.1,
            monitor_train_loss: true,
        }
    }
}

/// Emits a record whenever the run crosses the next multiple of the recording interval.
struct Recorder<'a, P: ?Sized> {
    problem: &'a P,
    observe: &'a mut dyn FnMut(&IterationRecord, &[f64]),
    every: f64,
    next_mark: f64,
    monitor: bool,
    records: Vec<IterationRecord>,
}

impl<'a, P: FiniteSumProblem + ?Sized> Recorder<'a, P> {
    fn new(
        problem: &'a P,
        observe: &'a mut dyn FnMut(&IterationRecord, &[f64]),
        every: f64,
        monitor: bool,
        batch_size: usize,
        x0: &[f64],
    ) -> Self {
        let loss = if monitor { problem.full_value(x0) } else { f64::NAN };
        let first = IterationRecord::start(batch_size, loss);
        observe(&first, x0);
        Self {
            problem,
            observe,
            every,
            next_mark: every,
            monitor,
            records: vec![first],
        }
    }

    fn offer(&mut self, force: bool, k: usize, batch: usize, alpha: f64, grad_norm: f64, c: &EvalCounter, x: &[f64]) {
        let fge = c.full_gradient_equivalents(self.problem.num_components());
        if !force && fge + 1e-12 < self.next_mark {
            return;
        }
        if force && self.records.last().is_some_and(|r| r.k == k) {
            return;
        }
        while self.next_mark <= fge + 1e-12 {
            self.next_mark += self.every;
        }
        let train_loss = if self.monitor {
            self.problem.full_value(x)
        } else {
            f64::NAN
        };
        let record = IterationRecord {
            k,
            batch_size: batch,
            alpha,
            alpha0: alpha,
            component_grad_evals: c.gradient_evals,
            component_value_evals: c.value_evals,
            fge,
            train_loss,
            grad_norm,
            ..IterationRecord::start(batch, train_loss)
        };
        (self.observe)(&record, x);
        self.records.push(record);
    }
}

fn check_common<P: FiniteSumProblem + ?Sized>(problem: &P, x0: &[f64], alpha: f64, every: f64) -> Result<()> {
    if x0.len() != problem.dim() || !linalg::is_finite(x0) {
        return Err(Error::usage("x0 must be finite with the problem's dimension"));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::usage("steplength must be finite and nonnegative"));
    }
    if !(every > 0.0) {
        return Err(Error::usage("recording interval must be positive"));
    }
    Ok(())
}

/// `x ← x − α·g^B(x)` with a fresh uniform batch `B` each step.
pub fn run_sg<P: FiniteSumProblem + ?Sized, R: Rng>(
    problem: &P,
    config: &SgConfig,
    x0: &[f64],
    rng: &mut R,
) -> Result<Trajectory> {
    run_sg_with(problem, config, x0, rng, |_, _| {})
}

/// [`run_sg`] calling `observe` with every recorded point and its iterate.
pub fn run_sg_with<P, R, O>(
    problem: &P,
    config: &SgConfig,
    x0: &[f64],
    rng: &mut R,
    mut observe: O,
) -> Result<Trajectory>
where
    P: FiniteSumProblem + ?Sized,
    R: Rng,
    O: FnMut(&IterationRecord, &[f64]),
{
    check_common(problem, x0, config.alpha, config.record_every_fge)?;
    let n = problem.num_components();
    if config.batch_size == 0 || config.batch_size > n {
        return Err(Error::usage("SG batch size must lie in 1..=N"));
    }
    let mut x = x0.to_vec();
    let mut counter = EvalCounter::default();
    let mut rec = Recorder::new(
        problem,
        &mut observe,
        config.record_every_fge,
        config.monitor_train_loss,
        config.batch_size,
        x0,
    );
    let mut k = 0;
    let mut last_norm = f64::NAN;
    let stop = loop {
        if counter.full_gradient_equivalents(n) >= config.max_fge {
            break StopReason::Budget;
        }
        let batch = if config.batch_size == 1 {
            vec![rng.gen_range(0..n)]
        } else {
            let mut b = rand::seq::index::sample(rng, n, config.batch_size).into_vec();
            b.sort_unstable();
            b
        };
        let g = problem.batch_gradient(&batch, &x, &mut counter)?;
        linalg::axpy(-config.alpha, &g, &mut x);
        last_norm = linalg::norm(&g);
        k += 1;
        if !linalg::is_finite(&x) {
            rec.offer(true, k, config.batch_size, config.alpha, last_norm, &counter, &x);
            break StopReason::Diverged;
        }
        rec.offer(false, k, config.batch_size, config.alpha, last_norm, &counter, &x);
    };
    rec.offer(true, k, config.batch_size, config.alpha, last_norm, &counter, &x);
    Ok(Trajectory {
        records: rec.records,
        x,
        stop,
        counter,
    })
}

/// SVRG with the last inner iterate as the next anchor. Each anchor costs `N`
/// gradient evaluations and each inner step two.
pub fn run_svrg<P: FiniteSumProblem + ?Sized, R: Rng>(
    problem: &P,
    config: &SvrgConfig,
    x0: &[f64],
    rng: &mut R,
) -> Result<Trajectory> {
    run_svrg_with(problem, config, x0, rng, |_, _| {})
}

/// [`run_svrg`] calling `observe` with every recorded point and its iterate.
pub fn run_svrg_with<P, R, O>(
    problem: &P,
    config: &SvrgConfig,
    x0: &[f64],
    rng: &mut R,
    mut observe: O,
) -> Result<Trajectory>
where
    P: FiniteSumProblem + ?Sized,
    R: Rng,
    O: FnMut(&IterationRecord, &[f64]),
{
    check_common(problem, x0, config.alpha, config.record_every_fge)?;
    let n = problem.num_components();
    let inner = config.inner_len.unwrap_or(n);
    if inner == 0 {
        return Err(Error::usage("SVRG inner loop length must be positive"));
    }
    let all: Vec<usize> = (0..n).collect();
    let d = problem.dim();
    let mut x = x0.to_vec();
    let mut counter = EvalCounter::default();
    let mut rec = Recorder::new(
        problem,
        &mut observe,
        config.record_every_fge,
        config.monitor_train_loss,
        1,
        x0,
    );
    let mut k = 0;
    let mut last_norm = f64::NAN;
    let stop = 'outer: loop {
        if counter.full_gradient_equivalents(n) >= config.max_fge {
            break StopReason::Budget;
        }
        let anchor = x.clone();
        let mu = problem.batch_gradient(&all, &anchor, &mut counter)?;
        for _ in 0..inner {
            if counter.full_gradient_equivalents(n) >= config.max_fge {
                break 'outer StopReason::Budget;
            }
            let i = rng.gen_range(0..n);
            let mut v = mu.clone();
            problem.add_gradient_at(i, &x, 1.0, &mut v);
            problem.add_gradient_at(i, &anchor, -1.0, &mut v);
            counter.gradient_evals += 2;
            linalg::axpy(-config.alpha, &v, &mut x);
            last_norm = linalg::norm(&v);
            k += 1;
            if !linalg::is_finite(&x) {
                rec.offer(true, k, 1, config.alpha, last_norm, &counter, &x);
                break 'outer StopReason::Diverged;
            }
            rec.offer(false, k, 1, config.alpha, last_norm, &counter, &x);
        }
        debug_assert_eq!(x.len(), d);
    };
    rec.offer(true, k, 1, config.alpha, last_norm, &counter, &x);
    Ok(Trajectory {
        records: rec.records,
        x,
        stop,
        counter,
    })
}

/// `α = 2^j` for `j = −10..=10`.
pub fn power_of_two_grid() -> Vec<f64> {
    (-10..=10).map(|j| 2f64.powi(j)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneResult {
    pub best_alpha: f64,
    /// `(alpha, mean final objective)`; infinite for diverged runs.
    pub scores: Vec<(f64, f64)>,
}

/// Runs `runner(alpha, seed)` for every grid point and seed (grid points in
/// parallel) and returns the steplength with the lowest mean final objective.
/// Ties go to the smaller steplength; a non-finite result marks a grid point as diverged.
pub fn tune_baseline<F>(grid: &[f64], seeds: &[u64], runner: F) -> Result<TuneResult>
where
    F: Fn(f64, u64) -> Result<f64> + Sync,
{
    if grid.is_empty() || seeds.is_empty() {
        return Err(Error::usage("tuning needs a nonempty grid and seed set"));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let scores: Vec<(f64, f64)> = sorted
        .par_iter()
        .map(|&alpha| {
            let mut total = 0.0;
            for &seed in seeds {
                match runner(alpha, seed) {
                    Ok(v) if v.is_finite() => total += v,
                    _ => return Ok((alpha, f64::INFINITY)),
                }
            }
            Ok((alpha, total / seeds.len() as f64))
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(f64, f64)> = None;
    for &(alpha, score) in &scores {
        if score.is_finite() && best.is_none_or(|(_, s)| score < s) {
            best = Some((alpha, score));
        }
    }
    let (best_alpha, _) = best.ok_or_else(|| Error::Numerical("every grid point diverged".into()))?;
    Ok(TuneResult { best_alpha, scores })
}
