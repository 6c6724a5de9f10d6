//! Limited-memory inverse Hessian.
//!
//! `H_k` is never formed. It is defined by up to `m` curvature pairs `(s, y)`
//! and the initial scaling `H⁰ = γI`, and applied with the two-loop recursion
//! in `O(m·d)`.

use std::collections::VecDeque;

use crate::linalg::{axpy, dot, norm_sq};

#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePair {
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    /// `1 / yᵀs`, positive for every stored pair.
    pub rho: f64,
}

/// Result of offering a pair to [`CurvatureMemory::try_admit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Admission {
    Accepted,
    /// `yᵀs ≤ ε‖s‖²`.
    InsufficientCurvature,
    /// `s = 0`, e.g. after the line search bottomed out.
    ZeroStep,
}

impl Admission {
    pub fn is_accepted(self) -> bool {
        self == Admission::Accepted
    }
}

#[derive(Debug, Clone)]
pub struct CurvatureMemory {
    capacity: usize,
    pairs: VecDeque<CurvaturePair>,
    gamma: f64,
}

impl CurvatureMemory {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "L-BFGS memory needs capacity >= 1");
        Self {
            capacity,
            pairs: VecDeque::with_capacity(capacity),
            gamma: 1.0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Overrides the initial scaling until the next admission.
    pub fn set_gamma(&mut self, gamma: f64) {
        assert!(gamma > 0.0, "gamma must be positive");
        self.gamma = gamma;
    }

    /// Oldest first.
    pub fn pairs(&self) -> impl Iterator<Item = &CurvaturePair> {
        self.pairs.iter()
    }

    /// Cautious update: stores `(s, y)` only when `yᵀs > eps·‖s‖²`, evicting the
    /// oldest pair when full, and resets `γ = yᵀs / yᵀy`.
    pub fn try_admit(&mut self, s: &[f64], y: &[f64], eps: f64) -> Admission {
        let ss = norm_sq(s);
        if ss == 0.0 {
            return Admission::ZeroStep;
        }
        let ys = dot(y, s);
        // NaN compares false and is rejected here as well.
        if !(ys > eps * ss) {
            return Admission::InsufficientCurvature;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.gamma = ys / norm_sq(y);
        self.pairs.push_back(CurvaturePair {
            s: s.to_vec(),
            y: y.to_vec(),
            rho: 1.0 / ys,
        });
        Admission::Accepted
    }

    /// `H_k g` by the two-loop recursion.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alphas = vec![0.0; self.pairs.len()];
        for (a, pair) in alphas.iter_mut().zip(&self.pairs).rev() {
            *a = pair.rho * dot(&pair.s, &q);
            axpy(-*a, &pair.y, &mut q);
        }
        q.iter_mut().for_each(|v| *v *= self.gamma);
        for (a, pair) in alphas.iter().zip(&self.pairs) {
            let beta = pair.rho * dot(&pair.y, &q);
            axpy(a - beta, &pair.s, &mut q);
        }
        q
    }

    /// `H_k (H_k g)`.
    pub fn apply_squared(&self, g: &[f64]) -> Vec<f64> {
        self.apply(&self.apply(g))
    }

    /// Dense `d × d` matrix of `H_k`, column `j` being `H_k e_j`. For small `d` only.
    pub fn to_dense(&self, d: usize) -> nalgebra::DMatrix<f64> {
        let mut h = nalgebra::DMatrix::zeros(d, d);
        let mut e = vec![0.0; d];
        for j in 0..d {
            e[j] = 1.0;
            let col = self.apply(&e);
            e[j] = 0.0;
            for (i, v) in col.into_iter().enumerate() {
                h[(i, j)] = v;
            }
        }
        h
    }

    /// `(λ_min, λ_max)` of the symmetrized dense `H_k`.
    pub fn eigenvalue_bounds(&self, d: usize) -> (f64, f64) {
        let h = self.to_dense(d);
        let sym = (&h + h.transpose()) * 0.5;
        let eig = sym.symmetric_eigen().eigenvalues;
        (eig.min(), eig.max())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_memory_is_identity() {
        let m = CurvatureMemory::new(10);
        assert_eq!(m.apply(&[1.0, 2.0]), vec![1.0, 2.0]);
        assert_eq!(m.apply_squared(&[1.0, 2.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn scaled_empty_memory() {
        let mut m = CurvatureMemory::new(3);
        m.set_gamma(0.5);
        assert_eq!(m.apply_squared(&[4.0, -8.0]), vec![1.0, -2.0]);
    }

    #[test]
    fn single_unit_pair() {
        let mut m = CurvatureMemory::new(5);
        assert_eq!(m.try_admit(&[1.0, 0.0], &[1.0, 0.0], 0.01), Admission::Accepted);
        assert_eq!(m.gamma(), 1.0);
        assert_eq!(m.apply(&[1.0, 0.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn cautious_rejections() {
        let mut m = CurvatureMemory::new(5);
        assert_eq!(
            m.try_admit(&[1.0, 0.0], &[-1.0, 0.0], 0.01),
            Admission::InsufficientCurvature
        );
        assert_eq!(
            m.try_admit(&[1.0, 0.0], &[0.005, 0.0], 0.01),
            Admission::InsufficientCurvature
        );
        // ties are rejected
        assert_eq!(
            m.try_admit(&[1.0, 0.0], &[0.01, 0.0], 0.01),
            Admission::InsufficientCurvature
        );
        assert_eq!(m.try_admit(&[0.0, 0.0], &[1.0, 0.0], 0.01), Admission::ZeroStep);
        assert!(m.is_empty());
        assert_eq!(m.gamma(), 1.0);
    }

    #[test]
    fn fifo_eviction_and_gamma() {
        let mut m = CurvatureMemory::new(2);
        m.try_admit(&[1.0, 0.0], &[2.0, 0.0], 0.01);
        m.try_admit(&[0.0, 1.0], &[0.0, 3.0], 0.01);
        m.try_admit(&[1.0, 1.0], &[1.0, 4.0], 0.01);
        assert_eq!(m.len(), 2);
        let first = m.pairs().next().unwrap();
        assert_eq!(first.s, vec![0.0, 1.0]);
        assert_eq!(m.gamma(), 5.0 / 17.0);
    }

    #[test]
    fn secant_condition_with_one_pair() {
        let mut m = CurvatureMemory::new(1);
        let s = [0.3, -1.0, 2.0];
        let y = [0.5, -0.7, 1.9];
        assert!(m.try_admit(&s, &y, 0.01).is_accepted());
        let hy = m.apply(&y);
        assert!(crate::linalg::rel_err(&hy, &s) <= 1e-12);
    }
}
