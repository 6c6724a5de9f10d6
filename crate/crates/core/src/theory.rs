//! Brute-force checks of the convergence theory on small finite sums.
//!
//! Everything here enumerates all `N` components, so the true gradient and the
//! population variances are exact. The quasi-Newton matrix `H` is a fixed
//! [`CurvatureMemory`]; the iteration studied is `x ← x − α·H·g^S(x)` with a
//! constant `α` and batches drawn uniformly without replacement. Sampling
//! without replacement only shrinks the variance of `g^S` relative to the
//! with-replacement model the bounds are stated for, so every bound still applies.
//!
//! Monte Carlo trials run in parallel; trial `t` uses the master seed with
//! ChaCha stream `t`, so reports do not depend on the thread count.

use std::fmt::Write as _;

use rand::seq::index;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lbfgs::CurvatureMemory;
use crate::linalg;
use crate::problems::{FiniteSumProblem, QuadraticProblem, SigmoidSumProblem};
use crate::RunRng;

/// Largest population the enumerating routines accept.
pub const MAX_ENUMERATED: usize = 64;

/// Fewer stochastic trials than this yields [`CheckStatus::Inconclusive`].
pub const MIN_TRIALS: usize = 30;

#[derive(Debug, Clone)]
pub struct TheoryConfig {
    pub theta: f64,
    /// Orthogonality tolerance the batch sizes are made to satisfy.
    pub nu: f64,
    /// Lipschitz constant of `∇F`.
    pub lipschitz: f64,
    /// Strong-convexity modulus; zero for the nonconvex check.
    pub mu: f64,
    pub memory: CurvatureMemory,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Constant steplength `1/((1+θ²+ν²)·L·Λ₂)` unless overridden with a smaller value.
    pub alpha: f64,
    pub trials: usize,
    pub seed: u64,
}

impl TheoryConfig {
    /// Takes `Λ₁, Λ₂` from the spectrum of `memory` in dimension `dim` and sets
    /// `α` to the largest value the step condition allows.
    pub fn new(
        theta: f64,
        nu: f64,
        lipschitz: f64,
        mu: f64,
        memory: CurvatureMemory,
        dim: usize,
        trials: usize,
        seed: u64,
    ) -> Result<Self> {
        let (lambda1, lambda2) = memory.eigenvalue_bounds(dim);
        let alpha = max_steplength(theta, nu, lipschitz, lambda2);
        let cfg = Self {
            theta,
            nu,
            lipschitz,
            mu,
            memory,
            lambda1,
            lambda2,
            alpha,
            trials,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.nu >= 0.0 && self.lipschitz > 0.0 && self.mu >= 0.0) {
            return Err(Error::usage("theory config needs θ > 0, ν ≥ 0, L > 0, μ ≥ 0"));
        }
        if !(self.lambda1 > 0.0 && self.lambda1 <= self.lambda2) {
            return Err(Error::usage("eigenvalue bounds must satisfy 0 < Λ₁ ≤ Λ₂"));
        }
        let cap = max_steplength(self.theta, self.nu, self.lipschitz, self.lambda2);
        if !(self.alpha > 0.0 && self.alpha <= cap) {
            return Err(Error::usage(format!("α = {} outside (0, {cap}]", self.alpha)));
        }
        if self.trials == 0 {
            return Err(Error::usage("at least one trial is required"));
        }
        Ok(())
    }

    /// Certified contraction factor `1 − μΛ₁α`.
    pub fn rho(&self) -> f64 {
        1.0 - self.mu * self.lambda1 * self.alpha
    }
}

/// `1/((1+θ²+ν²)·L·Λ₂)`.
pub fn max_steplength(theta: f64, nu: f64, lipschitz: f64, lambda2: f64) -> f64 {
    1.0 / ((1.0 + theta * theta + nu * nu) * lipschitz * lambda2)
}

/// Exact population quantities at one point for a fixed `H`.
#[derive(Debug, Clone)]
pub struct PopulationState {
    pub grad: Vec<f64>,
    /// `H∇F`.
    pub direction: Vec<f64>,
    /// `H g_i` for every component.
    pub mapped: Vec<Vec<f64>>,
    pub component_grads: Vec<Vec<f64>>,
}

impl PopulationState {
    pub fn new<P: FiniteSumProblem + ?Sized>(problem: &P, memory: &CurvatureMemory, x: &[f64]) -> Result<Self> {
        let n = problem.num_components();
        if n > MAX_ENUMERATED {
            return Err(Error::usage(format!("population of {n} exceeds {MAX_ENUMERATED}")));
        }
        let component_grads = (0..n)
            .map(|i| problem.component_gradient(i, x))
            .collect::<Result<Vec<_>>>()?;
        let mut grad = vec![0.0; problem.dim()];
        for g in &component_grads {
            linalg::axpy(1.0 / n as f64, g, &mut grad);
        }
        let direction = memory.apply(&grad);
        let mapped = component_grads.iter().map(|g| memory.apply(g)).collect();
        Ok(Self {
            grad,
            direction,
            mapped,
            component_grads,
        })
    }

    fn n(&self) -> f64 {
        self.mapped.len() as f64
    }

    /// `(1/N)·Σ((H∇F)ᵀ(Hg_i) − ‖H∇F‖²)²`.
    pub fn inner_product_variance(&self) -> f64 {
        let u2 = linalg::norm_sq(&self.direction);
        self.mapped
            .iter()
            .map(|hg| {
                let dev = linalg::dot(hg, &self.direction) - u2;
                dev * dev
            })
            .sum::<f64>()
            / self.n()
    }

    /// `(1/N)·Σ‖Hg_i − proj_{H∇F}(Hg_i)‖²`; with `H∇F = 0` the whole `‖Hg_i‖²` counts.
    pub fn orthogonal_second_moment(&self) -> f64 {
        let u2 = linalg::norm_sq(&self.direction);
        self.mapped
            .iter()
            .map(|hg| {
                if u2 == 0.0 {
                    return linalg::norm_sq(hg);
                }
                let c = linalg::dot(hg, &self.direction) / u2;
                hg.iter()
                    .zip(&self.direction)
                    .map(|(a, b)| (a - c * b).powi(2))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / self.n()
    }

    /// `(1/N)·Σ‖Hg_i − H∇F‖²`.
    pub fn mapped_variance(&self) -> f64 {
        self.mapped
            .iter()
            .map(|hg| linalg::norm_sq(&linalg::sub(hg, &self.direction)))
            .sum::<f64>()
            / self.n()
    }

    /// `(1/N)·Σ‖g_i − ∇F‖²`.
    pub fn gradient_variance(&self) -> f64 {
        self.component_grads
            .iter()
            .map(|g| linalg::norm_sq(&linalg::sub(g, &self.grad)))
            .sum::<f64>()
            / self.n()
    }

    /// Smallest batch size meeting the exact test for `θ` and the orthogonality
    /// condition for `ν`, clamped to `N`. Returns `N` when `H∇F = 0`.
    pub fn exact_batch_size(&self, theta: f64, nu: f64) -> usize {
        let n = self.mapped.len();
        let u2 = linalg::norm_sq(&self.direction);
        if u2 == 0.0 {
            return n;
        }
        let ip = (self.inner_product_variance() / (theta * theta * u2 * u2)).ceil();
        let orth = if nu > 0.0 {
            (self.orthogonal_second_moment() / (nu * nu * u2)).ceil()
        } else {
            f64::INFINITY
        };
        let b = ip.max(orth).max(1.0);
        if b >= n as f64 {
            n
        } else {
            b as usize
        }
    }

    /// Smallest ν the orthogonality condition holds with at batch size `b`.
    pub fn measured_nu(&self, b: usize) -> f64 {
        let u2 = linalg::norm_sq(&self.direction);
        if u2 == 0.0 {
            return 0.0;
        }
        (self.orthogonal_second_moment() / (b as f64 * u2)).sqrt()
    }
}

/// Left side of the exact-variance inner-product test at batch size `b`.
pub fn exact_ipqn_lhs<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    memory: &CurvatureMemory,
    x: &[f64],
    batch_size: usize,
) -> Result<f64> {
    check_batch(batch_size)?;
    Ok(PopulationState::new(problem, memory, x)?.inner_product_variance() / batch_size as f64)
}

/// Orthogonal-component second moment of `Hg^S` at batch size `b`.
pub fn orthogonality_lhs<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    memory: &CurvatureMemory,
    x: &[f64],
    batch_size: usize,
) -> Result<f64> {
    check_batch(batch_size)?;
    Ok(PopulationState::new(problem, memory, x)?.orthogonal_second_moment() / batch_size as f64)
}

/// `(1 + Var{Hg_i}/(b·‖H∇F‖²))⁻¹` with population statistics; 1 at zero variance.
pub fn exact_initial_steplength<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    memory: &CurvatureMemory,
    x: &[f64],
    batch_size: usize,
) -> Result<f64> {
    check_batch(batch_size)?;
    let st = PopulationState::new(problem, memory, x)?;
    let var = st.mapped_variance();
    if var == 0.0 {
        return Ok(1.0);
    }
    let u2 = linalg::norm_sq(&st.direction);
    if u2 == 0.0 {
        return Err(Error::usage("initial steplength undefined at a stationary point"));
    }
    Ok(1.0 / (1.0 + var / (batch_size as f64 * u2)))
}

fn check_batch(b: usize) -> Result<()> {
    if b == 0 {
        return Err(Error::usage("batch size must be positive"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Too few trials for the standard errors to mean anything.
    Inconclusive,
}

/// One compared inequality: `observed ≤ bound` up to `slack`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckPoint {
    pub k: usize,
    pub observed: f64,
    pub standard_error: f64,
    pub bound: f64,
    /// Allowance added to `bound` before comparing.
    pub slack: f64,
    pub holds: bool,
}

impl CheckPoint {
    fn new(k: usize, observed: f64, standard_error: f64, bound: f64, slack: f64) -> Self {
        let holds = observed <= bound + slack;
        Self {
            k,
            observed,
            standard_error,
            bound,
            slack,
            holds,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoryReport {
    pub name: String,
    pub status: CheckStatus,
    pub trials: usize,
    pub alpha: f64,
    pub rho: f64,
    /// Largest ν realized by the chosen batch sizes over all visited states.
    pub measured_nu: f64,
    pub points: Vec<CheckPoint>,
}

impl TheoryReport {
    fn finish(name: &str, cfg: &TheoryConfig, measured_nu: f64, points: Vec<CheckPoint>) -> Self {
        let stochastic = points.iter().any(|p| p.standard_error > 0.0);
        let status = if points.iter().any(|p| !p.holds) {
            CheckStatus::Fail
        } else if stochastic && cfg.trials < MIN_TRIALS {
            CheckStatus::Inconclusive
        } else {
            CheckStatus::Pass
        };
        Self {
            name: name.to_string(),
            status,
            trials: cfg.trials,
            alpha: cfg.alpha,
            rho: cfg.rho(),
            measured_nu,
            points,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    /// Smallest `bound + slack − observed` over all points.
    pub fn worst_margin(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.bound + p.slack - p.observed)
            .fold(f64::INFINITY, f64::min)
    }

    /// `key=value` lines: a summary, then one line per point.
    pub fn to_kv_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "check={} status={:?} trials={} alpha={:e} rho={:.12} measured_nu={:.6} worst_margin={:e}",
            self.name,
            self.status,
            self.trials,
            self.alpha,
            self.rho,
            self.measured_nu,
            self.worst_margin()
        );
        for p in &self.points {
            let _ = writeln!(
                s,
                "check={} k={} observed={:e} se={:e} bound={:e} slack={:e} holds={}",
                self.name, p.k, p.observed, p.standard_error, p.bound, p.slack, p.holds
            );
        }
        s
    }
}

/// Mean and standard error of the mean.
pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    if samples.windows(2).all(|w| w[0] == w[1]) {
        return (samples.first().copied().unwrap_or(f64::NAN), 0.0);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn trial_rng(seed: u64, trial: usize) -> RunRng {
    let mut rng = RunRng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// `x − α·H·g^S(x)` for a uniformly drawn `S` of size `b`.
fn sampled_step(st: &PopulationState, x: &[f64], alpha: f64, b: usize, rng: &mut RunRng) -> (Vec<f64>, f64) {
    let n = st.mapped.len();
    let mut dir = vec![0.0; x.len()];
    for i in index::sample(rng, n, b) {
        linalg::axpy(1.0 / b as f64, &st.mapped[i], &mut dir);
    }
    (linalg::step(x, -alpha, &dir), linalg::norm_sq(&dir))
}

/// Runs the exact-batch iteration for `steps` steps, returning every iterate
/// and the largest realized ν.
pub fn exact_batch_trajectory<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    cfg: &TheoryConfig,
    x0: &[f64],
    steps: usize,
    rng: &mut RunRng,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let mut xs = vec![x0.to_vec()];
    let mut nu = 0.0f64;
    for _ in 0..steps {
        let x = xs.last().expect("nonempty");
        let st = PopulationState::new(problem, &cfg.memory, x)?;
        let b = st.exact_batch_size(cfg.theta, cfg.nu);
        nu = nu.max(st.measured_nu(b));
        let (next, _) = sampled_step(&st, x, cfg.alpha, b, rng);
        xs.push(next);
    }
    Ok((xs, nu))
}

/// Expected one-step decrease and direction length at the states of one
/// reference trajectory, `k = 0..=steps`.
///
/// Checks `E F(x⁺) ≤ F(x) − (α/2)·∇Fᵀ H ∇F` and
/// `E‖Hg^S‖² ≤ (1+θ²+ν²)·‖H∇F‖²` at each state with a 3-SE allowance. Points
/// alternate: descent at even positions, direction length at odd ones.
pub fn check_descent_lemma<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    cfg: &TheoryConfig,
    x0: &[f64],
    steps: usize,
) -> Result<TheoryReport> {
    cfg.validate()?;
    let mut rng = trial_rng(cfg.seed, usize::MAX);
    let (xs, _) = exact_batch_trajectory(problem, cfg, x0, steps, &mut rng)?;
    let mut points = Vec::with_capacity(2 * xs.len());
    let mut nu = 0.0f64;
    for (k, x) in xs.iter().enumerate() {
        let st = PopulationState::new(problem, &cfg.memory, x)?;
        let b = st.exact_batch_size(cfg.theta, cfg.nu);
        nu = nu.max(st.measured_nu(b));
        let samples: Vec<(f64, f64)> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let mut r = trial_rng(cfg.seed, t);
                let (next, dir_sq) = sampled_step(&st, x, cfg.alpha, b, &mut r);
                (problem.full_value(&next), dir_sq)
            })
            .collect();
        let values: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let norms: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let (fv, fse) = mean_and_se(&values);
        let (nv, nse) = mean_and_se(&norms);
        let f = problem.full_value(x);
        let decrease = cfg.alpha / 2.0 * linalg::dot(&st.grad, &st.direction);
        points.push(CheckPoint::new(k, fv, fse, f - decrease, 3.0 * fse));
        let cap = (1.0 + cfg.theta * cfg.theta + cfg.nu * cfg.nu) * linalg::norm_sq(&st.direction);
        points.push(CheckPoint::new(k, nv, nse, cap, 3.0 * nse));
    }
    Ok(TheoryReport::finish("descent_lemma", cfg, nu, points))
}

/// Mean optimality gap over `trials` independent runs against `ρᵏ·gap₀`.
///
/// The allowance at step `k` is `3·SE_k/mean_k` relative to the bound, i.e.
/// the check is `mean_k ≤ ρᵏ·gap₀·(1 + 3·SE_k/mean_k)`.
pub fn check_linear_rate<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    optimal_value: f64,
    cfg: &TheoryConfig,
    x0: &[f64],
    steps: usize,
) -> Result<TheoryReport> {
    cfg.validate()?;
    let runs: Vec<(Vec<f64>, f64)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut r = trial_rng(cfg.seed, t);
            let (xs, nu) = exact_batch_trajectory(problem, cfg, x0, steps, &mut r)?;
            Ok((xs.iter().map(|x| problem.full_value(x) - optimal_value).collect(), nu))
        })
        .collect::<Result<_>>()?;
    let nu = runs.iter().map(|r| r.1).fold(0.0, f64::max);
    let gap0 = problem.full_value(x0) - optimal_value;
    let rho = cfg.rho();
    let points = (0..=steps)
        .map(|k| {
            let gaps: Vec<f64> = runs.iter().map(|r| r.0[k]).collect();
            let (mean, se) = mean_and_se(&gaps);
            let bound = rho.powi(k as i32) * gap0;
            let rel = if mean > 0.0 { se / mean } else { 0.0 };
            CheckPoint::new(k, mean, se, bound, 3.0 * rel * bound)
        })
        .collect();
    Ok(TheoryReport::finish("linear_rate", cfg, nu, points))
}

/// `min_{k<T} E‖∇F(x_k)‖² ≤ 2(F(x₀) − F_min)/(αTΛ₁)` for each horizon `T`.
///
/// `F_min` is the smallest objective value seen in any run, floored at
/// `lower_bound`. Since the expected final value is at least this minimum, the
/// comparison is no looser than the one with the true infimum.
pub fn check_sublinear_rate<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    lower_bound: f64,
    cfg: &TheoryConfig,
    x0: &[f64],
    horizons: &[usize],
) -> Result<TheoryReport> {
    cfg.validate()?;
    let steps = horizons.iter().copied().max().unwrap_or(0);
    let runs: Vec<(Vec<f64>, f64, f64)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut r = trial_rng(cfg.seed, t);
            let (xs, nu) = exact_batch_trajectory(problem, cfg, x0, steps, &mut r)?;
            let grads = xs.iter().map(|x| linalg::norm_sq(&problem.full_gradient(x))).collect();
            let fmin = xs.iter().map(|x| problem.full_value(x)).fold(f64::INFINITY, f64::min);
            Ok((grads, fmin, nu))
        })
        .collect::<Result<_>>()?;
    let nu = runs.iter().map(|r| r.2).fold(0.0, f64::max);
    let fmin = runs.iter().map(|r| r.1).fold(f64::INFINITY, f64::min).max(lower_bound);
    let f0 = problem.full_value(x0);
    let stats: Vec<(f64, f64)> = (0..steps)
        .map(|k| mean_and_se(&runs.iter().map(|r| r.0[k]).collect::<Vec<_>>()))
        .collect();
    let points = horizons
        .iter()
        .map(|&t| {
            let bound = 2.0 * (f0 - fmin) / (cfg.alpha * t as f64 * cfg.lambda1);
            let (mean, se) = stats[..t]
                .iter()
                .copied()
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .unwrap_or((0.0, 0.0));
            CheckPoint::new(t, mean, se, bound, 3.0 * se)
        })
        .collect();
    Ok(TheoryReport::finish("sublinear_rate", cfg, nu, points))
}

/// Diagonal quadratic testbed: `d = 10`, `N = 32`, `μ = 0.1`, `L = 1`.
pub fn reference_quadratic(seed: u64) -> Result<QuadraticProblem> {
    QuadraticProblem::synthetic(10, 0.1, 1.0, 32, &mut crate::seeded_rng(seed))
}

/// Nonconvex testbed: 64 sigmoid-loss components in three dimensions.
pub fn reference_sigmoid(seed: u64) -> Result<SigmoidSumProblem> {
    SigmoidSumProblem::synthetic(64, 3, 0.01, &mut crate::seeded_rng(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifySettings {
    pub theta: f64,
    pub nu: f64,
    pub linear_trials: usize,
    pub linear_steps: usize,
    pub descent_trials: usize,
    pub descent_steps: usize,
    pub sublinear_trials: usize,
    pub seed: u64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            theta: 0.9,
            nu: 5.0,
            linear_trials: 500,
            linear_steps: 50,
            descent_trials: 1000,
            descent_steps: 20,
            sublinear_trials: 200,
            seed: 0,
        }
    }
}

/// Linear rate, descent lemma and min-gradient bound on the reference testbeds
/// with an empty memory (`H = I`).
pub fn run_verification(settings: &VerifySettings) -> Result<Vec<TheoryReport>> {
    let s = settings;
    let q = reference_quadratic(s.seed)?;
    let d = q.dim();
    let base = |trials, lipschitz, mu, dim| {
        TheoryConfig::new(
            s.theta,
            s.nu,
            lipschitz,
            mu,
            CurvatureMemory::new(10),
            dim,
            trials,
            s.seed,
        )
    };
    let x0 = vec![0.0; d];
    let linear = check_linear_rate(
        &q,
        q.optimal_value(),
        &base(s.linear_trials, q.lipschitz(), q.mu(), d)?,
        &x0,
        s.linear_steps,
    )?;
    let descent = check_descent_lemma(
        &q,
        &base(s.descent_trials, q.lipschitz(), q.mu(), d)?,
        &x0,
        s.descent_steps,
    )?;
    let sg = reference_sigmoid(s.seed)?;
    let cfg = base(s.sublinear_trials, sg.lipschitz_bound(), 0.0, sg.dim())?;
    let sublinear = check_sublinear_rate(&sg, sg.lower_bound(), &cfg, &[1.0, -1.0, 0.5], &[10, 50])?;
    Ok(vec![linear, descent, sublinear])
}
