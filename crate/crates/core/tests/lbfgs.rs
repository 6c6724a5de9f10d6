mod common;

use nalgebra::{DVector, SymmetricEigen};
use pbqn::lbfgs::Admission;
use pbqn::CurvatureMemory;
use proptest::prelude::*;

use common::{dense_bfgs_inverse, rel_err};

/// `(s, y)` with `y = (BᵀB + I/2)s`, so every pair has positive curvature.
fn pair_strategy(d: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(-1.0..1.0f64, d),
        prop::collection::vec(-1.0..1.0f64, d * d),
    )
        .prop_filter_map("nonzero step", move |(s, b)| {
            if s.iter().map(|v| v * v).sum::<f64>() < 1e-6 {
                return None;
            }
            let bs: Vec<f64> = (0..d).map(|k| (0..d).map(|j| b[k * d + j] * s[j]).sum()).collect();
            let y = (0..d)
                .map(|i| (0..d).map(|k| b[k * d + i] * bs[k]).sum::<f64>() + 0.5 * s[i])
                .collect();
            Some((s, y))
        })
}

type Pairs = Vec<(Vec<f64>, Vec<f64>)>;

/// `(dim, capacity, pairs, g)`.
fn memory_strategy() -> impl Strategy<Value = (usize, usize, Pairs, Vec<f64>)> {
    (2usize..=8, 1usize..=6).prop_flat_map(|(d, cap)| {
        (
            Just(d),
            Just(cap),
            prop::collection::vec(pair_strategy(d), 0..=12),
            prop::collection::vec(-1.0..1.0f64, d),
        )
    })
}

proptest! {
    #[test]
    fn two_loop_matches_dense_update((d, cap, pairs, g) in memory_strategy()) {
        let mut mem = CurvatureMemory::new(cap);
        for (s, y) in &pairs {
            prop_assert_eq!(mem.try_admit(s, y, 1e-10), Admission::Accepted);
        }
        prop_assert_eq!(mem.len(), pairs.len().min(cap));
        let kept = &pairs[pairs.len().saturating_sub(cap)..];
        let h = dense_bfgs_inverse(kept, d);
        let dense: Vec<f64> = (&h * DVector::from_column_slice(&g)).iter().copied().collect();
        prop_assert!(rel_err(&mem.apply(&g), &dense) <= 1e-10);
    }

    #[test]
    fn inverse_is_symmetric_positive_definite((d, cap, pairs, _g) in memory_strategy()) {
        let mut mem = CurvatureMemory::new(cap);
        for (s, y) in &pairs {
            mem.try_admit(s, y, 1e-10);
        }
        let h = mem.to_dense(d);
        let asym = (&h - h.transpose()).amax();
        prop_assert!(asym <= 1e-9 * h.amax().max(1.0));
        let eig = SymmetricEigen::new((&h + h.transpose()) * 0.5);
        prop_assert!(eig.eigenvalues.min() > 0.0);
    }

    #[test]
    fn newest_pair_satisfies_secant((d, cap, pairs, _g) in memory_strategy()) {
        prop_assume!(!pairs.is_empty());
        let mut mem = CurvatureMemory::new(cap);
        for (s, y) in &pairs {
            mem.try_admit(s, y, 1e-10);
        }
        let (s, y) = pairs.last().unwrap();
        prop_assert_eq!(s.len(), d);
        prop_assert!(rel_err(&mem.apply(y), s) <= 1e-9);
    }
}

#[test]
fn cautious_rule_rejects_weak_and_zero_steps() {
    let mut mem = CurvatureMemory::new(3);
    assert_eq!(
        mem.try_admit(&[1.0, 0.0], &[0.005, 0.0], 1e-2),
        Admission::InsufficientCurvature
    );
    assert_eq!(mem.try_admit(&[0.0, 0.0], &[1.0, 0.0], 1e-2), Admission::ZeroStep);
    assert_eq!(
        mem.try_admit(&[1.0, 0.0], &[f64::NAN, 0.0], 1e-2),
        Admission::InsufficientCurvature
    );
    assert!(mem.is_empty());
    assert_eq!(mem.apply(&[3.0, -1.0]), vec![3.0, -1.0]);
}

#[test]
fn eviction_keeps_newest_pairs() {
    let mut mem = CurvatureMemory::new(2);
    for k in 1..=4 {
        let s = vec![k as f64, 1.0];
        mem.try_admit(&s, &s, 1e-2);
    }
    let firsts: Vec<f64> = mem.pairs().map(|p| p.s[0]).collect();
    assert_eq!(firsts, vec![3.0, 4.0]);
    assert_eq!(mem.gamma(), 1.0);
}
