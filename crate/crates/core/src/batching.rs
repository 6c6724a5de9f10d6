//! Sample management and the progressive batch-size controller.
//!
//! Every draw goes through the run's single generator. Within one optimizer
//! iteration the order is: variance subset for the batch test, growth sample,
//! variance subset for the initial step, next iteration's sample.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Indices are kept sorted so batch reductions run in a fixed order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BatchSample {
    pub indices: Vec<usize>,
    /// `S^v ⊆ S`, the rows used for variance estimates.
    pub variance_subset: Vec<usize>,
    /// Indices shared with the previous sample.
    pub overlap_prev: Vec<usize>,
    /// Indices shared with the next sample.
    pub overlap_next: Vec<usize>,
}

impl BatchSample {
    pub fn from_indices(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self {
            indices,
            ..Default::default()
        }
    }

    /// Uniform draw of `size` distinct indices from `0..n`.
    pub fn draw<R: Rng>(n: usize, size: usize, rng: &mut R) -> Result<Self> {
        if size == 0 || size > n {
            return Err(Error::usage(format!("cannot draw {size} of {n} components")));
        }
        Ok(Self::from_indices(rand::seq::index::sample(rng, n, size).into_vec()))
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Sets `S^v = S` when `|S| ≤ cap`, otherwise a uniform subset of size `cap`.
    pub fn choose_variance_subset<R: Rng>(&mut self, cap: usize, rng: &mut R) {
        self.variance_subset = if self.len() <= cap {
            self.indices.clone()
        } else {
            let mut picked: Vec<usize> = rand::seq::index::sample(rng, self.len(), cap)
                .into_iter()
                .map(|p| self.indices[p])
                .collect();
            picked.sort_unstable();
            picked
        };
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchControllerConfig {
    /// Tolerance of the inner-product quasi-Newton test.
    pub theta: f64,
    /// `|S_0|`, clamped to `N` at run time.
    pub initial_size: usize,
    pub variance_subset_cap: usize,
    /// Number of recent batch gradients averaged by the moving window.
    pub window_length: usize,
    /// The window replaces the batch gradient in the test when `|S|/N` is
    /// below this. The default 1.0 applies it to every strict subsample.
    pub window_trigger: f64,
    pub rng_seed: u64,
}

impl Default for BatchControllerConfig {
    fn default() -> Self {
        Self {
            theta: 0.9,
            initial_size: 512,
            variance_subset_cap: 1024,
            window_length: 10,
            window_trigger: 1.0,
            rng_seed: 0,
        }
    }
}

impl BatchControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0) {
            return Err(Error::usage("theta must be positive"));
        }
        if self.initial_size < 2 {
            return Err(Error::usage("initial sample size must be at least 2"));
        }
        if self.variance_subset_cap < 2 {
            return Err(Error::usage("variance subset cap must be at least 2"));
        }
        if self.window_length == 0 {
            return Err(Error::usage("window length must be at least 1"));
        }
        if !(self.window_trigger >= 0.0 && self.window_trigger.is_finite()) {
            return Err(Error::usage("window trigger must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Sample variance of `t_i = (g^i)ᵀH²g^S` about the fixed center `‖Hg^S‖²`,
/// with the `|S^v| − 1` divisor.
pub fn ipqn_variance(scalars: &[f64], batch_norm_sq: f64) -> Result<f64> {
    if scalars.len() < 2 {
        return Err(Error::usage("variance needs at least two samples"));
    }
    let ss: f64 = scalars
        .iter()
        .map(|t| {
            let dev = t - batch_norm_sq;
            dev * dev
        })
        .sum();
    Ok(ss / (scalars.len() - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IpqnOutcome {
    Pass,
    Fail,
    /// `‖Hg^S‖ = 0`: the sampled direction vanished.
    Converged,
}

/// Practical inner-product quasi-Newton test: `variance / |S| ≤ θ²‖Hg^S‖⁴`.
pub fn ipqn_test(variance: f64, batch_size: usize, hg_norm: f64, theta: f64) -> IpqnOutcome {
    if hg_norm == 0.0 {
        return IpqnOutcome::Converged;
    }
    let h2 = hg_norm * hg_norm;
    if variance / batch_size as f64 <= theta * theta * h2 * h2 {
        IpqnOutcome::Pass
    } else {
        IpqnOutcome::Fail
    }
}

/// Smallest `b ≥ ⌈variance / (θ²‖Hg^S‖⁴)⌉` that passes [`ipqn_test`], before clamping.
pub fn required_batch_size(variance: f64, hg_norm: f64, theta: f64) -> Result<usize> {
    if !(hg_norm > 0.0) {
        return Err(Error::usage("batch size bound needs a nonzero direction"));
    }
    let h2 = hg_norm * hg_norm;
    let bound = (variance / (theta * theta * h2 * h2)).ceil();
    if !bound.is_finite() || bound >= usize::MAX as f64 / 2.0 {
        return Ok(usize::MAX);
    }
    let mut b = (bound as usize).max(1);
    while ipqn_test(variance, b, hg_norm, theta) == IpqnOutcome::Fail {
        b += 1;
    }
    Ok(b)
}

/// Growth target after a failed test, clamped to `[current + 1, n]`.
pub fn next_batch_size(variance: f64, hg_norm: f64, theta: f64, current: usize, n: usize) -> Result<usize> {
    let b = required_batch_size(variance, hg_norm, theta)?;
    Ok(b.max(current + 1).min(n))
}

/// `S ∪ S⁺` with `S⁺` drawn uniformly without replacement from the complement.
pub fn augment_sample<R: Rng>(sample: &BatchSample, target_size: usize, n: usize, rng: &mut R) -> BatchSample {
    let target = target_size.min(n);
    if target <= sample.len() {
        return sample.clone();
    }
    let complement = complement_of(&sample.indices, n);
    let extra = rand::seq::index::sample(rng, complement.len(), target - sample.len());
    let mut indices = sample.indices.clone();
    indices.extend(extra.into_iter().map(|p| complement[p]));
    indices.sort_unstable();
    BatchSample {
        indices,
        overlap_prev: sample.overlap_prev.clone(),
        ..Default::default()
    }
}

/// Next sample for multi-batch curvature pairs: `round(fraction·new_size)` indices
/// drawn from `prev` form `O = prev ∩ next`, the rest come from outside `prev`.
/// The overlap grows when the complement of `prev` is too small to fill the rest.
pub fn make_overlap_sample<R: Rng>(
    prev: &mut BatchSample,
    new_size: usize,
    overlap_fraction: f64,
    n: usize,
    rng: &mut R,
) -> Result<BatchSample> {
    if !(overlap_fraction > 0.0 && overlap_fraction < 1.0) {
        return Err(Error::usage("overlap fraction must lie in (0, 1)"));
    }
    let new_size = new_size.min(n);
    if new_size == 0 {
        return Err(Error::usage("new sample size must be positive"));
    }
    let outside = n - prev.len();
    let mut n_overlap = ((overlap_fraction * new_size as f64).round() as usize).min(prev.len());
    n_overlap = n_overlap.max(new_size.saturating_sub(outside));
    let mut overlap: Vec<usize> = rand::seq::index::sample(rng, prev.len(), n_overlap)
        .into_iter()
        .map(|p| prev.indices[p])
        .collect();
    overlap.sort_unstable();
    let complement = complement_of(&prev.indices, n);
    let fresh = rand::seq::index::sample(rng, complement.len(), new_size - n_overlap);
    let mut indices = overlap.clone();
    indices.extend(fresh.into_iter().map(|p| complement[p]));
    indices.sort_unstable();
    prev.overlap_next = overlap.clone();
    Ok(BatchSample {
        indices,
        overlap_prev: overlap,
        ..Default::default()
    })
}

fn complement_of(sorted: &[usize], n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n - sorted.len());
    let mut it = sorted.iter().peekable();
    for i in 0..n {
        if it.peek() == Some(&&i) {
            it.next();
        } else {
            out.push(i);
        }
    }
    out
}

/// Moving average of the most recent batch gradients.
#[derive(Debug, Clone)]
pub struct GradientWindow {
    length: usize,
    history: VecDeque<Vec<f64>>,
}

impl GradientWindow {
    pub fn new(length: usize) -> Self {
        assert!(length >= 1, "window length must be at least 1");
        Self {
            length,
            history: VecDeque::with_capacity(length),
        }
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    /// Records `current` and returns the mean of the last `length` gradients, `current` included.
    pub fn push_and_mean(&mut self, current: &[f64]) -> Vec<f64> {
        if self.history.len() == self.length {
            self.history.pop_front();
        }
        self.history.push_back(current.to_vec());
        let mut mean = vec![0.0; current.len()];
        for g in &self.history {
            crate::linalg::axpy(1.0, g, &mut mean);
        }
        crate::linalg::scale(1.0 / self.history.len() as f64, &mut mean);
        mean
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn variance_examples() {
        assert_eq!(ipqn_variance(&[3.0, 3.0, 3.0], 3.0).unwrap(), 0.0);
        assert_eq!(ipqn_variance(&[0.0, 2.0], 1.0).unwrap(), 2.0);
        assert!(ipqn_variance(&[1.0], 1.0).is_err());
    }

    #[test]
    fn test_examples() {
        assert_eq!(ipqn_test(0.0, 3, 0.5, 1e-3), IpqnOutcome::Pass);
        assert_eq!(ipqn_test(4.0, 4, 1.0, 0.9), IpqnOutcome::Fail);
        assert_eq!(ipqn_test(4.0, 4, 0.0, 0.9), IpqnOutcome::Converged);
    }

    #[test]
    fn growth_examples() {
        assert_eq!(next_batch_size(4.0, 1.0, 0.9, 4, 100).unwrap(), 5);
        assert_eq!(next_batch_size(0.0, 1.0, 0.9, 7, 100).unwrap(), 8);
        assert_eq!(next_batch_size(1e9, 1.0, 0.9, 7, 100).unwrap(), 100);
        assert!(next_batch_size(1.0, 0.0, 0.9, 7, 100).is_err());
    }

    #[test]
    fn augment_keeps_and_extends() {
        let mut rng = seeded_rng(0);
        let s = BatchSample::from_indices(vec![0]);
        let t = augment_sample(&s, 3, 4, &mut rng);
        assert_eq!(t.len(), 3);
        assert!(t.contains(0));
        assert!(t.indices.windows(2).all(|w| w[0] < w[1]));
        assert!(t.indices.iter().all(|&i| i < 4));

        let full = BatchSample::from_indices((0..4).collect());
        assert_eq!(augment_sample(&full, 10, 4, &mut rng).indices, full.indices);
    }

    #[test]
    fn overlap_sizes() {
        let mut rng = seeded_rng(1);
        let mut prev = BatchSample::draw(100, 8, &mut rng).unwrap();
        let next = make_overlap_sample(&mut prev, 8, 0.25, 100, &mut rng).unwrap();
        assert_eq!(next.overlap_prev.len(), 2);
        assert_eq!(prev.overlap_next, next.overlap_prev);
        assert!(next.overlap_prev.iter().all(|&i| prev.contains(i)));
        assert_eq!(next.indices.iter().filter(|&&i| prev.contains(i)).count(), 2);

        let mut prev = BatchSample::draw(10, 6, &mut rng).unwrap();
        let next = make_overlap_sample(&mut prev, 10, 0.25, 10, &mut rng).unwrap();
        assert_eq!(next.overlap_prev, prev.indices);
        assert_eq!(next.len(), 10);
    }

    #[test]
    fn window_mean() {
        let mut w = GradientWindow::new(2);
        assert_eq!(w.push_and_mean(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(w.push_and_mean(&[2.0, 2.0]), vec![1.0, 1.0]);
        assert_eq!(w.push_and_mean(&[4.0, 0.0]), vec![3.0, 1.0]);
        let mut w = GradientWindow::new(3);
        for _ in 0..5 {
            assert_eq!(w.push_and_mean(&[1.5, -2.0]), vec![1.5, -2.0]);
        }
    }

    #[test]
    fn variance_subset_cap() {
        let mut rng = seeded_rng(2);
        let mut s = BatchSample::draw(50, 20, &mut rng).unwrap();
        s.choose_variance_subset(30, &mut rng);
        assert_eq!(s.variance_subset, s.indices);
        s.choose_variance_subset(5, &mut rng);
        assert_eq!(s.variance_subset.len(), 5);
        assert!(s.variance_subset.iter().all(|&i| s.contains(i)));
    }
}
