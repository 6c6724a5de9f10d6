//! Oracles written independently of the library code paths they check.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use pbqn::FiniteSumProblem;
use rand::Rng;

/// Dense BFGS inverse update from `γI`, oldest pair first, with `γ = sᵀy/yᵀy`
/// of the newest pair (1 with no pairs).
pub fn dense_bfgs_inverse(pairs: &[(Vec<f64>, Vec<f64>)], d: usize) -> DMatrix<f64> {
    let gamma = pairs.last().map_or(1.0, |(s, y)| {
        let s = DVector::from_column_slice(s);
        let y = DVector::from_column_slice(y);
        s.dot(&y) / y.dot(&y)
    });
    let mut h = DMatrix::identity(d, d) * gamma;
    let eye = DMatrix::<f64>::identity(d, d);
    for (s, y) in pairs {
        let s = DVector::from_column_slice(s);
        let y = DVector::from_column_slice(y);
        let rho = 1.0 / y.dot(&s);
        let left = &eye - (&s * y.transpose()) * rho;
        let right = &eye - (&y * s.transpose()) * rho;
        h = &left * h * &right + (&s * s.transpose()) * rho;
    }
    h
}

/// Central differences of `f` with step `h`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            (f(&xp) - f(&xm)) / (2.0 * h)
        })
        .collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

pub fn random_vec<R: Rng>(d: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn full_gradient<P: FiniteSumProblem + ?Sized>(p: &P, x: &[f64]) -> Vec<f64> {
    let n = p.num_components();
    let mut g = vec![0.0; p.dim()];
    for i in 0..n {
        let gi = p.component_gradient(i, x).unwrap();
        for (a, b) in g.iter_mut().zip(gi) {
            *a += b;
        }
    }
    g.iter().map(|v| v / n as f64).collect()
}

fn full_value<P: FiniteSumProblem + ?Sized>(p: &P, x: &[f64]) -> f64 {
    let n = p.num_components();
    (0..n).map(|i| p.component_value(i, x).unwrap()).sum::<f64>() / n as f64
}

/// Textbook two-loop recursion over `(s, y)` pairs, oldest first.
fn two_loop(pairs: &[(Vec<f64>, Vec<f64>)], g: &[f64]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = vec![0.0; pairs.len()];
    for (j, (s, y)) in pairs.iter().enumerate().rev() {
        let a = dot(s, &q) / dot(y, s);
        alphas[j] = a;
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
    }
    let gamma = pairs.last().map_or(1.0, |(s, y)| dot(s, y) / dot(y, y));
    let mut r: Vec<f64> = q.iter().map(|v| v * gamma).collect();
    for (j, (s, y)) in pairs.iter().enumerate() {
        let b = dot(y, &r) / dot(y, s);
        for (ri, si) in r.iter_mut().zip(s) {
            *ri += (alphas[j] - b) * si;
        }
    }
    r
}

/// Deterministic L-BFGS: unit first trial, Armijo halving, cautious pairs.
/// Returns `x_0, ..., x_iters`.
pub fn reference_lbfgs<P: FiniteSumProblem + ?Sized>(
    p: &P,
    x0: &[f64],
    iters: usize,
    memory: usize,
    eps: f64,
    c1: f64,
) -> Vec<Vec<f64>> {
    let mut xs = vec![x0.to_vec()];
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut x = x0.to_vec();
    for _ in 0..iters {
        let g = full_gradient(p, &x);
        let hg = two_loop(&pairs, &g);
        let f = full_value(p, &x);
        let decrease = dot(&g, &hg);
        let mut alpha = 1.0;
        let mut next;
        let mut tries = 0;
        loop {
            next = x.iter().zip(&hg).map(|(xi, d)| xi - alpha * d).collect::<Vec<_>>();
            if full_value(p, &next) <= f - c1 * alpha * decrease || tries == 30 {
                break;
            }
            alpha /= 2.0;
            tries += 1;
        }
        let g_next = full_gradient(p, &next);
        let s: Vec<f64> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_next.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&y, &s) > eps * dot(&s, &s) {
            pairs.push((s, y));
            if pairs.len() > memory {
                pairs.remove(0);
            }
        }
        x = next;
        xs.push(x.clone());
    }
    xs
}
