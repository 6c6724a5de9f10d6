use rand::Rng;

use super::{CurvatureMode, IterationRecord, PbqnConfig, StopReason, Trajectory};
use crate::batching::{
    augment_sample, ipqn_test, ipqn_variance, make_overlap_sample, next_batch_size, BatchSample, GradientWindow,
    IpqnOutcome,
};
use crate::error::{Error, Result};
use crate::lbfgs::CurvatureMemory;
use crate::linalg;
use crate::linesearch::{armijo_backtrack, gradient_variance, initial_steplength};
use crate::problems::{EvalCounter, FiniteSumProblem};

/// Component gradients of one sample at one point, stored densely in index order.
#[derive(Debug, Clone)]
struct SampleGradients {
    indices: Vec<usize>,
    flat: Vec<f64>,
    dim: usize,
}

impl SampleGradients {
    fn compute<P: FiniteSumProblem + ?Sized>(
        problem: &P,
        indices: &[usize],
        x: &[f64],
        counter: &mut EvalCounter,
    ) -> Self {
        let dim = problem.dim();
        let mut flat = vec![0.0; indices.len() * dim];
        for (row, &i) in flat.chunks_exact_mut(dim).zip(indices) {
            problem.add_gradient_at(i, x, 1.0, row);
        }
        counter.gradient_evals += indices.len() as u64;
        Self {
            indices: indices.to_vec(),
            flat,
            dim,
        }
    }

    fn row(&self, pos: usize) -> &[f64] {
        &self.flat[pos * self.dim..(pos + 1) * self.dim]
    }

    fn get(&self, i: usize) -> Option<&[f64]> {
        self.indices.binary_search(&i).ok().map(|p| self.row(p))
    }

    /// Mean over `subset ⊆ indices`, summed in `subset` order.
    fn mean_over(&self, subset: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &i in subset {
            linalg::axpy(1.0, self.get(i).expect("subset of stored sample"), &mut out);
        }
        if !subset.is_empty() {
            linalg::scale(1.0 / subset.len() as f64, &mut out);
        }
        out
    }

    fn mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for row in self.flat.chunks_exact(self.dim) {
            linalg::axpy(1.0, row, &mut out);
        }
        linalg::scale(1.0 / self.indices.len() as f64, &mut out);
        out
    }

    /// Adds gradients for the indices of `grown` not yet stored.
    fn extend_to<P: FiniteSumProblem + ?Sized>(
        &mut self,
        problem: &P,
        grown: &[usize],
        x: &[f64],
        counter: &mut EvalCounter,
    ) {
        let fresh: Vec<usize> = grown.iter().copied().filter(|&i| self.get(i).is_none()).collect();
        let added = Self::compute(problem, &fresh, x, counter);
        let mut flat = Vec::with_capacity(grown.len() * self.dim);
        for &i in grown {
            let row = self.get(i).or_else(|| added.get(i)).expect("grown sample covered");
            flat.extend_from_slice(row);
        }
        self.indices = grown.to_vec();
        self.flat = flat;
    }
}

/// Mutable state of one progressive-batching run.
#[derive(Debug, Clone)]
pub struct PbqnState {
    pub x: Vec<f64>,
    pub memory: CurvatureMemory,
    /// `S_k`, the sample for the next step.
    pub sample: BatchSample,
    pub counter: EvalCounter,
    pub k: usize,
    window: GradientWindow,
    /// Gradients of `sample` at `x`, computed by the previous multi-batch step.
    pending: Option<SampleGradients>,
}

impl PbqnState {
    /// Draws `S_0` uniformly; its size is `min(initial_size, N)`.
    pub fn new<P: FiniteSumProblem + ?Sized, R: Rng>(
        problem: &P,
        config: &PbqnConfig,
        x0: &[f64],
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        if x0.len() != problem.dim() {
            return Err(Error::usage(format!(
                "x0 has length {}, problem dimension is {}",
                x0.len(),
                problem.dim()
            )));
        }
        if !linalg::is_finite(x0) {
            return Err(Error::usage("x0 must be finite"));
        }
        let n = problem.num_components();
        let size = config.controller.initial_size.min(n);
        Ok(Self {
            x: x0.to_vec(),
            memory: CurvatureMemory::new(config.memory_size),
            sample: BatchSample::draw(n, size, rng)?,
            counter: EvalCounter::default(),
            k: 0,
            window: GradientWindow::new(config.controller.window_length),
            pending: None,
        })
    }
}

/// One iteration: batch test and growth, two-loop direction, variance-based
/// initial step, Armijo backtracking, curvature pair, cautious update.
pub fn pbqn_step<P: FiniteSumProblem + ?Sized, R: Rng>(
    state: &mut PbqnState,
    problem: &P,
    config: &PbqnConfig,
    rng: &mut R,
) -> Result<IterationRecord> {
    let n = problem.num_components();
    let ctrl = &config.controller;
    let mut grads = match state.pending.take() {
        Some(g) => g,
        None => SampleGradients::compute(problem, &state.sample.indices, &state.x, &mut state.counter),
    };
    let mut g = grads.mean();
    let mut hg = state.memory.apply(&g);
    if linalg::norm_sq(&g) == 0.0 {
        state.pending = Some(grads);
        return Ok(converged_record(state, &g, problem, config));
    }

    // Batch-size test on the current sample.
    let windowed = (state.sample.len() as f64) < ctrl.window_trigger * n as f64;
    let g_window = state.window.push_and_mean(&g);
    let test_norm = if windowed {
        linalg::norm(&state.memory.apply(&g_window))
    } else {
        linalg::norm(&hg)
    };
    state.sample.choose_variance_subset(ctrl.variance_subset_cap, rng);
    let variance = ipqn_sample_variance(&state.memory, &grads, &state.sample.variance_subset, &hg)?;
    let mut grew = false;
    if ipqn_test(variance, state.sample.len(), test_norm, ctrl.theta) == IpqnOutcome::Fail {
        let target = next_batch_size(variance, test_norm, ctrl.theta, state.sample.len(), n)?;
        let grown = augment_sample(&state.sample, target, n, rng);
        if grown.len() > state.sample.len() {
            grads.extend_to(problem, &grown.indices, &state.x, &mut state.counter);
            state.sample = grown;
            state.sample.choose_variance_subset(ctrl.variance_subset_cap, rng);
            g = grads.mean();
            hg = state.memory.apply(&g);
            grew = true;
        }
    }

    let direction: Vec<f64> = hg.iter().map(|v| -v).collect();
    let g_norm_sq = linalg::norm_sq(&g);
    let mut grad_var = gradient_variance(
        state
            .sample
            .variance_subset
            .iter()
            .map(|&i| grads.get(i).expect("S^v ⊆ S")),
        &g,
    )?;
    if config.finite_population_correction {
        grad_var *= 1.0 - state.sample.len() as f64 / n as f64;
    }
    let alpha0 = initial_steplength(grad_var, state.sample.len(), g_norm_sq)?.min(config.linesearch.alpha_cap);
    let ls = armijo_backtrack(
        problem,
        &state.sample.indices,
        &state.x,
        &direction,
        &g,
        alpha0,
        &config.linesearch,
        &mut state.counter,
    )?;
    let x_next = linalg::step(&state.x, ls.alpha, &direction);
    if !linalg::is_finite(&x_next) {
        return Err(Error::Numerical(format!("non-finite iterate at k = {}", state.k)));
    }

    let batch_size = state.sample.len();
    let (y, next_sample) = match config.curvature_mode {
        CurvatureMode::FullOverlap => {
            let g_next = problem.batch_gradient(&state.sample.indices, &x_next, &mut state.counter)?;
            let next = BatchSample::draw(n, batch_size, rng)?;
            (linalg::sub(&g_next, &g), next)
        }
        CurvatureMode::MultiBatch { overlap_fraction } => {
            let next = make_overlap_sample(&mut state.sample, batch_size, overlap_fraction, n, rng)?;
            let next_grads = SampleGradients::compute(problem, &next.indices, &x_next, &mut state.counter);
            let y = linalg::sub(
                &next_grads.mean_over(&next.overlap_prev),
                &grads.mean_over(&next.overlap_prev),
            );
            state.pending = Some(next_grads);
            (y, next)
        }
    };
    let s = linalg::sub(&x_next, &state.x);
    let admission = state.memory.try_admit(&s, &y, config.curvature_eps);

    state.x = x_next;
    state.sample = next_sample;
    state.k += 1;
    let train_loss = if config.monitor_train_loss {
        problem.full_value(&state.x)
    } else {
        f64::NAN
    };
    Ok(IterationRecord {
        k: state.k,
        batch_size,
        alpha: ls.alpha,
        alpha0,
        halvings: ls.halvings,
        line_search_satisfied: ls.satisfied,
        batch_grew: grew,
        pair_admitted: admission.is_accepted(),
        admission: Some(admission),
        component_grad_evals: state.counter.gradient_evals,
        component_value_evals: state.counter.value_evals,
        fge: state.counter.full_gradient_equivalents(n),
        train_loss,
        grad_norm: g_norm_sq.sqrt(),
        converged: false,
    })
}

/// Variance of `(g^i)ᵀH²g` over `S^v`, centered at `‖Hg‖²`, with one extra two-loop pass.
fn ipqn_sample_variance(
    memory: &CurvatureMemory,
    grads: &SampleGradients,
    subset: &[usize],
    hg: &[f64],
) -> Result<f64> {
    let u = memory.apply(hg);
    let scalars: Vec<f64> = subset
        .iter()
        .map(|&i| linalg::dot(grads.get(i).expect("S^v ⊆ S"), &u))
        .collect();
    ipqn_variance(&scalars, linalg::norm_sq(hg))
}

fn converged_record<P: FiniteSumProblem + ?Sized>(
    state: &PbqnState,
    g: &[f64],
    problem: &P,
    config: &PbqnConfig,
) -> IterationRecord {
    let n = problem.num_components();
    let train_loss = if config.monitor_train_loss {
        problem.full_value(&state.x)
    } else {
        f64::NAN
    };
    IterationRecord {
        k: state.k,
        batch_size: state.sample.len(),
        component_grad_evals: state.counter.gradient_evals,
        component_value_evals: state.counter.value_evals,
        fge: state.counter.full_gradient_equivalents(n),
        grad_norm: linalg::norm(g),
        converged: true,
        ..IterationRecord::start(state.sample.len(), train_loss)
    }
}

pub fn run_pbqn<P: FiniteSumProblem + ?Sized, R: Rng>(
    problem: &P,
    config: &PbqnConfig,
    x0: &[f64],
    rng: &mut R,
) -> Result<Trajectory> {
    run_pbqn_with(problem, config, x0, rng, |_, _| {})
}

/// Runs until the budget, the gradient tolerance or convergence; `observe` sees
/// every record together with the iterate it describes.
pub fn run_pbqn_with<P, R, O>(
    problem: &P,
    config: &PbqnConfig,
    x0: &[f64],
    rng: &mut R,
    mut observe: O,
) -> Result<Trajectory>
where
    P: FiniteSumProblem + ?Sized,
    R: Rng,
    O: FnMut(&IterationRecord, &[f64]),
{
    let mut state = PbqnState::new(problem, config, x0, rng)?;
    let start_loss = if config.monitor_train_loss {
        problem.full_value(x0)
    } else {
        f64::NAN
    };
    let first = IterationRecord::start(state.sample.len(), start_loss);
    observe(&first, &state.x);
    let mut records = vec![first];
    let stop = loop {
        if let Some(tol) = config.stop.gradient_tolerance {
            if linalg::norm_inf(&problem.full_gradient(&state.x)) <= tol {
                break StopReason::GradientTolerance;
            }
        }
        if state.counter.full_gradient_equivalents(problem.num_components()) >= config.stop.max_fge {
            break StopReason::Budget;
        }
        if state.k >= config.stop.max_iterations {
            break StopReason::MaxIterations;
        }
        let rec = pbqn_step(&mut state, problem, config, rng)?;
        let converged = rec.converged;
        observe(&rec, &state.x);
        records.push(rec);
        if converged {
            break StopReason::Converged;
        }
    };
    Ok(Trajectory {
        records,
        x: state.x,
        stop,
        counter: state.counter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::QuadraticProblem;
    use crate::seeded_rng;

    #[test]
    fn first_direction_is_negative_batch_gradient() {
        let mut rng = seeded_rng(4);
        let q = QuadraticProblem::synthetic(3, 0.5, 2.0, 20, &mut rng).unwrap();
        let cfg = PbqnConfig {
            controller: crate::batching::BatchControllerConfig {
                initial_size: 20,
                ..Default::default()
            },
            curvature_mode: CurvatureMode::FullOverlap,
            ..Default::default()
        };
        let x0 = [1.0, -2.0, 3.0];
        let mut state = PbqnState::new(&q, &cfg, &x0, &mut rng).unwrap();
        let g = q.full_gradient(&x0);
        let rec = pbqn_step(&mut state, &q, &cfg, &mut rng).unwrap();
        let expected = linalg::step(&x0, -rec.alpha, &g);
        assert!(linalg::rel_err(&state.x, &expected) < 1e-14);
    }

    #[test]
    fn starts_at_minimizer_with_tolerance() {
        let mut rng = seeded_rng(5);
        let q = QuadraticProblem::synthetic(4, 0.5, 2.0, 16, &mut rng).unwrap();
        let mut cfg = PbqnConfig::default();
        cfg.stop.gradient_tolerance = Some(1e-10);
        let t = run_pbqn(&q, &cfg, q.minimizer(), &mut rng).unwrap();
        assert_eq!(t.stop, StopReason::GradientTolerance);
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.last().k, 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut rng = seeded_rng(5);
        let q = QuadraticProblem::synthetic(2, 0.5, 2.0, 8, &mut rng).unwrap();
        let cfg = PbqnConfig::default();
        assert!(run_pbqn(&q, &cfg, &[0.0], &mut rng).is_err());
        assert!(run_pbqn(&q, &cfg, &[f64::NAN, 0.0], &mut rng).is_err());
        let bad = PbqnConfig {
            memory_size: 0,
            ..Default::default()
        };
        assert!(run_pbqn(&q, &bad, &[0.0, 0.0], &mut rng).is_err());
    }
}
