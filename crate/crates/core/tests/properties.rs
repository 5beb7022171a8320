//! Property tests for the numerics and grid-assignment invariants.

use biaslens_core::gridlayout::{exact_assign, greedy_assign};
use biaslens_core::numerics::{svd, Matrix};
use proptest::prelude::*;

fn matrix_strategy(max_dim: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(rows, cols)| {
        proptest::collection::vec(-10.0..10.0f64, rows * cols)
            .prop_map(move |data| Matrix::new(rows, cols, data).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn singular_values_shared_with_transpose(m in matrix_strategy(8)) {
        let a = svd(&m).unwrap();
        let b = svd(&m.transpose()).unwrap();
        let scale = a.sigma.first().copied().unwrap_or(0.0).max(1.0);
        for (x, y) in a.sigma.iter().zip(&b.sigma) {
            prop_assert!((x - y).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn frobenius_norm_equals_sigma_energy(m in matrix_strategy(8)) {
        let out = svd(&m).unwrap();
        let energy: f64 = out.sigma.iter().map(|s| s * s).sum();
        let norm = m.frobenius_norm();
        prop_assert!((energy.sqrt() - norm).abs() <= 1e-8 * norm.max(1.0));
    }

    #[test]
    fn svd_reconstructs_input(m in matrix_strategy(8)) {
        let out = svd(&m).unwrap();
        let rebuilt = out.reconstruct();
        let mut diff = 0.0;
        for (a, b) in m.data().iter().zip(rebuilt.data()) {
            diff += (a - b) * (a - b);
        }
        let rel = diff.sqrt() / m.frobenius_norm().max(1e-12);
        prop_assert!(rel <= 1e-8, "residual {rel}");
    }

    #[test]
    fn sigma_nonincreasing_and_nonnegative(m in matrix_strategy(8)) {
        let out = svd(&m).unwrap();
        for s in &out.sigma {
            prop_assert!(*s >= 0.0);
        }
        for w in out.sigma.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
    }
}

fn coords_strategy() -> impl Strategy<Value = Matrix> {
    (4..=16usize).prop_flat_map(|n| {
        proptest::collection::vec(-100.0..100.0f64, n * 2)
            .prop_map(move |data| Matrix::new(n, 2, data).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn greedy_is_injective_and_fills_grid(coords in coords_strategy()) {
        let n = coords.rows();
        let side = (1..).take_while(|s| s * s <= n).last().unwrap();
        let layout = greedy_assign(&coords, side, side).unwrap();
        let mut seen = std::collections::HashSet::new();
        for cell in &layout.assignment {
            let idx = cell.expect("rows*cols <= n fills every cell");
            prop_assert!(idx < n);
            prop_assert!(seen.insert(idx));
        }
    }

    #[test]
    fn exact_never_beats_itself_and_never_loses_to_greedy(coords in coords_strategy()) {
        let n = coords.rows();
        let side = (1..).take_while(|s| s * s <= n).last().unwrap();
        let greedy = greedy_assign(&coords, side, side).unwrap();
        let exact = exact_assign(&coords, side, side).unwrap();
        prop_assert!(exact.total_cost(&coords) <= greedy.total_cost(&coords) + 1e-9);
    }

    #[test]
    fn translation_invariance(coords in coords_strategy(), dx in -50.0..50.0f64, dy in -50.0..50.0f64) {
        let n = coords.rows();
        let side = (1..).take_while(|s| s * s <= n).last().unwrap();
        let mut shifted = coords.clone();
        for i in 0..n {
            shifted.set(i, 0, coords.get(i, 0) + dx);
            shifted.set(i, 1, coords.get(i, 1) + dy);
        }
        let a = greedy_assign(&coords, side, side).unwrap();
        let b = greedy_assign(&shifted, side, side).unwrap();
        prop_assert_eq!(&a.assignment, &b.assignment);
    }
}
