//! Finite-sum objectives `F(x) = (1/N) Σ_i F_i(x)`.

use rand::Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::data::SparseDataset;
use crate::error::{Error, Result};
use crate::linalg;

/// Per-run evaluation accounting. Passed explicitly so parallel runs never share it.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EvalCounter {
    /// Number of component gradients `∇F_i` evaluated.
    pub gradient_evals: u64,
    /// Number of component values `F_i` evaluated.
    pub value_evals: u64,
}

impl EvalCounter {
    /// Component gradient evaluations divided by `n`.
    pub fn full_gradient_equivalents(&self, n: usize) -> f64 {
        self.gradient_evals as f64 / n as f64
    }
}

pub trait FiniteSumProblem: Sync {
    /// Number of components `N`.
    fn num_components(&self) -> usize;

    /// Dimension `d` of the parameter vector.
    fn dim(&self) -> usize;

    /// `F_i(x)` without bounds checking on `i`.
    fn value_at(&self, i: usize, x: &[f64]) -> f64;

    /// `out += weight * ∇F_i(x)` without bounds checking on `i`.
    fn add_gradient_at(&self, i: usize, x: &[f64], weight: f64, out: &mut [f64]);

    /// Stable digest of the problem data, used as a cache key.
    fn content_hash(&self) -> String;

    /// `out = Σ_{i ∈ indices} ∇F_i(x)`, summed in the order given.
    fn sum_gradients(&self, indices: &[usize], x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &i in indices {
            self.add_gradient_at(i, x, 1.0, out);
        }
    }

    fn component_value(&self, i: usize, x: &[f64]) -> Result<f64> {
        self.check_index(i)?;
        Ok(self.value_at(i, x))
    }

    fn component_gradient(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_index(i)?;
        let mut out = vec![0.0; self.dim()];
        self.add_gradient_at(i, x, 1.0, &mut out);
        Ok(out)
    }

    /// Mean of the component gradients over `indices`; charges `|indices|` gradient evaluations.
    fn batch_gradient(&self, indices: &[usize], x: &[f64], counter: &mut EvalCounter) -> Result<Vec<f64>> {
        self.check_batch(indices)?;
        let mut out = vec![0.0; self.dim()];
        self.sum_gradients(indices, x, &mut out);
        linalg::scale(1.0 / indices.len() as f64, &mut out);
        counter.gradient_evals += indices.len() as u64;
        Ok(out)
    }

    /// Mean of the component values over `indices`; charges `|indices|` value evaluations.
    fn batch_value(&self, indices: &[usize], x: &[f64], counter: &mut EvalCounter) -> Result<f64> {
        self.check_batch(indices)?;
        let sum: f64 = indices.iter().map(|&i| self.value_at(i, x)).sum();
        counter.value_evals += indices.len() as u64;
        Ok(sum / indices.len() as f64)
    }

    /// `∇F(x)`. Monitoring only: never charged to a counter.
    fn full_gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.num_components();
        let all: Vec<usize> = (0..n).collect();
        let mut out = vec![0.0; self.dim()];
        self.sum_gradients(&all, x, &mut out);
        linalg::scale(1.0 / n as f64, &mut out);
        out
    }

    /// `F(x)`. Monitoring only: never charged to a counter.
    fn full_value(&self, x: &[f64]) -> f64 {
        let n = self.num_components();
        (0..n).map(|i| self.value_at(i, x)).sum::<f64>() / n as f64
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.num_components() {
            return Err(Error::usage(format!(
                "component index {i} out of range for N = {}",
                self.num_components()
            )));
        }
        Ok(())
    }

    fn check_batch(&self, indices: &[usize]) -> Result<()> {
        if indices.is_empty() {
            return Err(Error::usage("empty sample"));
        }
        let n = self.num_components();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::usage(format!("component index {bad} out of range for N = {n}")));
        }
        Ok(())
    }
}

/// `σ(t) = 1 / (1 + e^{−t})`, evaluated without overflow.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^t)`, evaluated without overflow.
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// ℓ2-regularized binary logistic regression on sparse rows:
/// `F_i(x) = log(1 + exp(−z_i xᵀy_i)) + (λ/2)‖x‖²` with `z_i ∈ {−1, +1}`.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    row_ptr: Vec<usize>,
    col: Vec<u32>,
    val: Vec<f64>,
    labels: Vec<f64>,
    dim: usize,
    lambda: f64,
}

impl LogisticProblem {
    /// Builds the problem with the default regularization `λ = 1/N`.
    pub fn from_dataset(data: &SparseDataset) -> Self {
        let lambda = 1.0 / data.len() as f64;
        Self::with_lambda(data, lambda)
    }

    pub fn with_lambda(data: &SparseDataset, lambda: f64) -> Self {
        let mut row_ptr = Vec::with_capacity(data.len() + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_ptr.push(0);
        for row in &data.rows {
            col.extend_from_slice(&row.indices);
            val.extend_from_slice(&row.values);
            row_ptr.push(col.len());
        }
        Self {
            row_ptr,
            col,
            val,
            labels: data.labels.iter().map(|&z| f64::from(z)).collect(),
            dim: data.dim,
            lambda,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    /// `xᵀy_i`
    pub fn margin(&self, i: usize, x: &[f64]) -> f64 {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col[lo..hi]
            .iter()
            .zip(&self.val[lo..hi])
            .map(|(&j, &v)| v * x[j as usize])
            .sum()
    }

    fn add_row(&self, i: usize, weight: f64, out: &mut [f64]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        for (&j, &v) in self.col[lo..hi].iter().zip(&self.val[lo..hi]) {
            out[j as usize] += weight * v;
        }
    }

    /// Mean logistic loss without the ℓ2 term.
    pub fn unregularized_loss(&self, x: &[f64]) -> f64 {
        let n = self.labels.len();
        (0..n)
            .map(|i| softplus(-self.labels[i] * self.margin(i, x)))
            .sum::<f64>()
            / n as f64
    }

    /// Fraction of rows with `sign(xᵀy_i) = z_i`; a zero margin counts as wrong.
    pub fn accuracy(&self, x: &[f64]) -> f64 {
        let n = self.labels.len();
        let correct = (0..n).filter(|&i| self.labels[i] * self.margin(i, x) > 0.0).count();
        correct as f64 / n as f64
    }
}

impl FiniteSumProblem for LogisticProblem {
    fn num_components(&self) -> usize {
        self.labels.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value_at(&self, i: usize, x: &[f64]) -> f64 {
        let reg = if self.lambda == 0.0 {
            0.0
        } else {
            0.5 * self.lambda * linalg::norm_sq(x)
        };
        softplus(-self.labels[i] * self.margin(i, x)) + reg
    }

    fn add_gradient_at(&self, i: usize, x: &[f64], weight: f64, out: &mut [f64]) {
        let z = self.labels[i];
        let coef = -sigmoid(-z * self.margin(i, x)) * z;
        self.add_row(i, weight * coef, out);
        if self.lambda != 0.0 {
            linalg::axpy(weight * self.lambda, x, out);
        }
    }

    // The ℓ2 part is identical across components, so it is added once.
    fn sum_gradients(&self, indices: &[usize], x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &i in indices {
            let z = self.labels[i];
            let coef = -sigmoid(-z * self.margin(i, x)) * z;
            self.add_row(i, coef, out);
        }
        if self.lambda != 0.0 {
            linalg::axpy(self.lambda * indices.len() as f64, x, out);
        }
    }

    fn full_value(&self, x: &[f64]) -> f64 {
        let reg = 0.5 * self.lambda * linalg::norm_sq(x);
        self.unregularized_loss(x) + reg
    }

    fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"logistic");
        h.update((self.dim as u64).to_le_bytes());
        h.update(self.lambda.to_le_bytes());
        for p in &self.row_ptr {
            h.update((*p as u64).to_le_bytes());
        }
        for c in &self.col {
            h.update(c.to_le_bytes());
        }
        for v in self.val.iter().chain(&self.labels) {
            h.update(v.to_le_bytes());
        }
        hex(&h.finalize())
    }
}

/// Separable quadratic finite sum with diagonal component Hessians:
/// `F_i(x) = ½ Σ_j a_ij x_j² − Σ_j b_ij x_j`.
///
/// The mean Hessian `diag(ā)` fixes `μ = min ā`, `L = max ā` and `x* = b̄ / ā`.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    n: usize,
    d: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    mean_a: Vec<f64>,
    minimizer: Vec<f64>,
    optimal_value: f64,
}

impl QuadraticProblem {
    /// `curvatures[i]` and `linear[i]` are the diagonal of `A_i` and `b_i`.
    pub fn new(curvatures: &[Vec<f64>], linear: &[Vec<f64>]) -> Result<Self> {
        let n = curvatures.len();
        if n == 0 || linear.len() != n {
            return Err(Error::usage(
                "quadratic needs matching, nonempty curvature and linear terms",
            ));
        }
        let d = curvatures[0].len();
        if d == 0 || curvatures.iter().chain(linear).any(|r| r.len() != d) {
            return Err(Error::usage("inconsistent quadratic dimensions"));
        }
        if curvatures.iter().flatten().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::usage("component curvatures must be finite and nonnegative"));
        }
        let a: Vec<f64> = curvatures.concat();
        let b: Vec<f64> = linear.concat();
        let mut mean_a = vec![0.0; d];
        let mut mean_b = vec![0.0; d];
        for i in 0..n {
            linalg::axpy(1.0, &a[i * d..(i + 1) * d], &mut mean_a);
            linalg::axpy(1.0, &b[i * d..(i + 1) * d], &mut mean_b);
        }
        linalg::scale(1.0 / n as f64, &mut mean_a);
        linalg::scale(1.0 / n as f64, &mut mean_b);
        if mean_a.iter().any(|&v| v <= 0.0) {
            return Err(Error::usage("mean curvature must be positive in every coordinate"));
        }
        let minimizer: Vec<f64> = mean_b.iter().zip(&mean_a).map(|(b, a)| b / a).collect();
        let optimal_value = -0.5 * linalg::dot(&mean_b, &minimizer);
        Ok(Self {
            n,
            d,
            a,
            b,
            mean_a,
            minimizer,
            optimal_value,
        })
    }

    /// Random instance whose mean spectrum is spread evenly over `[mu, l]`.
    ///
    /// Component curvatures are positive perturbations of the mean, and the
    /// linear terms scatter around a common center so component gradients
    /// disagree everywhere, including at `x*`.
    pub fn synthetic<R: Rng>(d: usize, mu: f64, l: f64, n: usize, rng: &mut R) -> Result<Self> {
        if d == 0 || n == 0 || !(mu > 0.0) || !(l >= mu) {
            return Err(Error::usage(format!(
                "invalid quadratic spec d={d} mu={mu} L={l} N={n}"
            )));
        }
        let target: Vec<f64> = (0..d)
            .map(|j| {
                if d == 1 {
                    mu
                } else {
                    mu + (l - mu) * j as f64 / (d - 1) as f64
                }
            })
            .collect();
        let raw: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(0.5..1.5)).collect())
            .collect();
        let mut col_mean = vec![0.0; d];
        for r in &raw {
            linalg::axpy(1.0 / n as f64, r, &mut col_mean);
        }
        let curv: Vec<Vec<f64>> = raw
            .iter()
            .map(|r| (0..d).map(|j| target[j] * r[j] / col_mean[j]).collect())
            .collect();
        let center: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let linear: Vec<Vec<f64>> = (0..n)
            .map(|_| center.iter().map(|c| c + rng.gen_range(-1.0..1.0)).collect())
            .collect();
        Self::new(&curv, &linear)
    }

    pub fn minimizer(&self) -> &[f64] {
        &self.minimizer
    }

    pub fn optimal_value(&self) -> f64 {
        self.optimal_value
    }

    /// Mean Hessian diagonal.
    pub fn hessian_diagonal(&self) -> &[f64] {
        &self.mean_a
    }

    /// Strong convexity constant `μ`.
    pub fn mu(&self) -> f64 {
        self.mean_a.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Smoothness constant `L`.
    pub fn lipschitz(&self) -> f64 {
        self.mean_a.iter().cloned().fold(0.0, f64::max)
    }

    pub fn curvature_row(&self, i: usize) -> &[f64] {
        &self.a[i * self.d..(i + 1) * self.d]
    }

    pub fn linear_row(&self, i: usize) -> &[f64] {
        &self.b[i * self.d..(i + 1) * self.d]
    }
}

impl FiniteSumProblem for QuadraticProblem {
    fn num_components(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn value_at(&self, i: usize, x: &[f64]) -> f64 {
        let a = self.curvature_row(i);
        let b = self.linear_row(i);
        (0..self.d).map(|j| 0.5 * a[j] * x[j] * x[j] - b[j] * x[j]).sum()
    }

    fn add_gradient_at(&self, i: usize, x: &[f64], weight: f64, out: &mut [f64]) {
        let a = self.curvature_row(i);
        let b = self.linear_row(i);
        for j in 0..self.d {
            out[j] += weight * (a[j] * x[j] - b[j]);
        }
    }

    fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"quadratic");
        h.update((self.n as u64).to_le_bytes());
        h.update((self.d as u64).to_le_bytes());
        for v in self.a.iter().chain(&self.b) {
            h.update(v.to_le_bytes());
        }
        hex(&h.finalize())
    }
}

/// Smooth nonconvex finite sum bounded below by zero:
/// `F_i(x) = 1 / (1 + exp(z_i a_iᵀx)) + (λ/2)‖x‖²`.
#[derive(Debug, Clone)]
pub struct SigmoidSumProblem {
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    lambda: f64,
}

/// `max_t |d²/dt² σ(t)| = √3 / 18`.
const SIGMOID_CURVATURE_BOUND: f64 = 0.096_225_044_864_937_63;

impl SigmoidSumProblem {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<f64>, lambda: f64) -> Result<Self> {
        if features.is_empty() || features.len() != labels.len() {
            return Err(Error::usage("sigmoid problem needs one label per feature row"));
        }
        let d = features[0].len();
        if d == 0 || features.iter().any(|r| r.len() != d) {
            return Err(Error::usage("inconsistent feature dimensions"));
        }
        if !(lambda >= 0.0) {
            return Err(Error::usage("lambda must be nonnegative"));
        }
        Ok(Self {
            features,
            labels,
            lambda,
        })
    }

    /// Gaussian-ish features in `[-1, 1]^d` with random ±1 labels.
    pub fn synthetic<R: Rng>(n: usize, d: usize, lambda: f64, rng: &mut R) -> Result<Self> {
        let features = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let labels = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        Self::new(features, labels, lambda)
    }

    /// Every component lies in `(0, 1)` before regularization, so zero bounds `F` below.
    pub fn lower_bound(&self) -> f64 {
        0.0
    }

    /// Upper bound on the Hessian spectrum of `F`: `c·λ_max((1/N) Σ a aᵀ) + λ`.
    pub fn lipschitz_bound(&self) -> f64 {
        let d = self.features[0].len();
        let n = self.features.len() as f64;
        let mut m = nalgebra::DMatrix::<f64>::zeros(d, d);
        for a in &self.features {
            let v = nalgebra::DVector::from_column_slice(a);
            m += &v * v.transpose() / n;
        }
        let top = m.symmetric_eigen().eigenvalues.max();
        SIGMOID_CURVATURE_BOUND * top + self.lambda
    }
}

impl FiniteSumProblem for SigmoidSumProblem {
    fn num_components(&self) -> usize {
        self.labels.len()
    }

    fn dim(&self) -> usize {
        self.features[0].len()
    }

    fn value_at(&self, i: usize, x: &[f64]) -> f64 {
        let t = self.labels[i] * linalg::dot(&self.features[i], x);
        sigmoid(-t) + 0.5 * self.lambda * linalg::norm_sq(x)
    }

    fn add_gradient_at(&self, i: usize, x: &[f64], weight: f64, out: &mut [f64]) {
        let z = self.labels[i];
        let t = z * linalg::dot(&self.features[i], x);
        // d/dt σ(−t) = −σ(t)σ(−t)
        let coef = -sigmoid(t) * sigmoid(-t) * z;
        linalg::axpy(weight * coef, &self.features[i], out);
        if self.lambda != 0.0 {
            linalg::axpy(weight * self.lambda, x, out);
        }
    }

    fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"sigmoid");
        h.update(self.lambda.to_le_bytes());
        for (row, z) in self.features.iter().zip(&self.labels) {
            for v in row {
                h.update(v.to_le_bytes());
            }
            h.update(z.to_le_bytes());
        }
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{SparseDataset, SparseRow};
    use crate::seeded_rng;

    fn five_point() -> SparseDataset {
        SparseDataset::new(
            "five",
            vec![
                SparseRow::new(vec![0, 2], vec![0.5, -1.0]),
                SparseRow::new(vec![1], vec![2.0]),
                SparseRow::new(vec![0, 1, 2], vec![1.0, 1.0, 1.0]),
                SparseRow::new(vec![2], vec![-0.3]),
                SparseRow::new(vec![0, 1], vec![-1.5, 0.25]),
            ],
            vec![1, -1, 1, -1, 1],
        )
        .unwrap()
    }

    fn central_diff<P: FiniteSumProblem>(p: &P, i: usize, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|j| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[j] += h;
                xm[j] -= h;
                (p.value_at(i, &xp) - p.value_at(i, &xm)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn logistic_at_origin() {
        let p = LogisticProblem::from_dataset(&five_point());
        let x = vec![0.0; 3];
        assert_eq!(p.component_value(0, &x).unwrap(), std::f64::consts::LN_2);
        let g = p.component_gradient(0, &x).unwrap();
        // −z y / 2
        assert_eq!(g, vec![-0.25, 0.0, 0.5]);
        let mut c = EvalCounter::default();
        let v = p.batch_value(&[1, 3], &x, &mut c).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-7);
        assert_eq!(c.value_evals, 2);
        assert_eq!(c.gradient_evals, 0);
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let p = LogisticProblem::from_dataset(&five_point());
        let mut rng = seeded_rng(3);
        for _ in 0..5 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            for i in 0..5 {
                let g = p.component_gradient(i, &x).unwrap();
                let fd = central_diff(&p, i, &x, 1e-6);
                assert!(linalg::rel_err(&g, &fd) <= 1e-6, "i={i} g={g:?} fd={fd:?}");
            }
        }
    }

    #[test]
    fn quadratic_gradient_at_origin_is_minus_b() {
        let mut rng = seeded_rng(9);
        let q = QuadraticProblem::synthetic(4, 0.5, 2.0, 6, &mut rng).unwrap();
        let g = q.component_gradient(2, &[0.0; 4]).unwrap();
        let minus_b: Vec<f64> = q.linear_row(2).iter().map(|v| -v).collect();
        assert_eq!(g, minus_b);
        assert!((q.mu() - 0.5).abs() < 1e-12);
        assert!((q.lipschitz() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn batch_of_three_is_explicit_average() {
        let mut rng = seeded_rng(11);
        let q = QuadraticProblem::synthetic(3, 0.1, 1.0, 8, &mut rng).unwrap();
        let x = [0.3, -1.2, 2.0];
        let mut c = EvalCounter::default();
        let g = q.batch_gradient(&[1, 4, 6], &x, &mut c).unwrap();
        let expect: Vec<f64> = (0..3)
            .map(|j| {
                [1usize, 4, 6]
                    .iter()
                    .map(|&i| q.curvature_row(i)[j] * x[j] - q.linear_row(i)[j])
                    .sum::<f64>()
                    / 3.0
            })
            .collect();
        assert!(linalg::rel_err(&g, &expect) < 1e-14);
        assert_eq!(c.gradient_evals, 3);

        let single = q.batch_gradient(&[5], &x, &mut c).unwrap();
        assert_eq!(single, q.component_gradient(5, &x).unwrap());
        let all: Vec<usize> = (0..8).collect();
        assert_eq!(q.batch_gradient(&all, &x, &mut c).unwrap(), q.full_gradient(&x));
    }

    #[test]
    fn quadratic_value_at_minimizer() {
        let mut rng = seeded_rng(5);
        let q = QuadraticProblem::synthetic(5, 0.2, 3.0, 10, &mut rng).unwrap();
        let xs = q.minimizer().to_vec();
        assert!((q.full_value(&xs) - q.optimal_value()).abs() < 1e-12);
        let g = q.full_gradient(&xs);
        assert!(linalg::norm(&g) <= 1e-12 * q.lipschitz() * linalg::norm(&xs));
    }

    #[test]
    fn usage_errors() {
        let p = LogisticProblem::from_dataset(&five_point());
        let mut c = EvalCounter::default();
        assert!(matches!(p.component_gradient(5, &[0.0; 3]), Err(Error::Usage(_))));
        assert!(matches!(p.batch_gradient(&[], &[0.0; 3], &mut c), Err(Error::Usage(_))));
        assert!(matches!(p.batch_value(&[7], &[0.0; 3], &mut c), Err(Error::Usage(_))));
    }

    #[test]
    fn sigmoid_gradient_matches_finite_differences() {
        let mut rng = seeded_rng(2);
        let p = SigmoidSumProblem::synthetic(6, 3, 0.01, &mut rng).unwrap();
        let x = [0.4, -0.7, 1.1];
        for i in 0..6 {
            let g = p.component_gradient(i, &x).unwrap();
            let fd = central_diff(&p, i, &x, 1e-6);
            assert!(linalg::rel_err(&g, &fd) <= 1e-6);
        }
        assert!(p.lipschitz_bound() > 0.01);
    }
}
