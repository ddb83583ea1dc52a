use abcpart::transport::{
    build_cost, hungarian, is_permutation, sinkhorn, sinkhorn_traced, wasserstein_1d, CostMatrix,
    SinkhornOptions,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimum of `sum_j C[perm[j], j]` over all permutations (Heap's algorithm).
fn brute_force_min(c: &CostMatrix) -> f64 {
    let n = c.n();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = c.assignment_cost(&perm);
    let mut stack = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if stack[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(stack[i], i);
            }
            best = best.min(c.assignment_cost(&perm));
            stack[i] += 1;
            i = 1;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
    best
}

fn random_cost(n: usize, rng: &mut ChaCha8Rng) -> CostMatrix {
    let values = (0..n * n).map(|_| rng.random::<f64>() * 10.0).collect();
    CostMatrix::new(n, values, 1.0).unwrap()
}

#[test]
fn hungarian_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..200 {
        let n = 1 + trial % 7;
        let c = random_cost(n, &mut rng);
        let r = hungarian(&c).unwrap();
        assert!(is_permutation(&r.permutation));
        let exact = brute_force_min(&c);
        assert!((r.raw_cost - exact).abs() < 1e-10, "n={n}: {} vs {exact}", r.raw_cost);
    }
}

#[test]
fn hungarian_handles_integer_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in 2..=7 {
        let values = (0..n * n).map(|_| rng.random_range(0..3) as f64).collect();
        let c = CostMatrix::new(n, values, 1.0).unwrap();
        let r = hungarian(&c).unwrap();
        assert!((r.raw_cost - brute_force_min(&c)).abs() < 1e-12);
    }
}

#[test]
fn sorted_matches_hungarian_in_one_dimension() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for n in [1usize, 2, 3, 5, 8, 16, 33, 64] {
        for q in [1.0, 2.0, 1.5] {
            let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
            let s: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
            let sorted = wasserstein_1d(&y, &s, q).unwrap();
            let c = build_cost(&y, &s, |a, b| (a - b).abs(), q).unwrap();
            let exact = hungarian(&c).unwrap();
            assert!(
                (sorted.distance - exact.distance).abs() < 1e-10,
                "n={n} q={q}: {} vs {}",
                sorted.distance,
                exact.distance
            );
            assert!(is_permutation(&sorted.permutation));
            // the sorted coupling is itself optimal
            assert!((c.assignment_cost(&sorted.permutation) - exact.raw_cost).abs() < 1e-9);
        }
    }
}

#[test]
fn sinkhorn_sweep_approaches_exact_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let c = random_cost(10, &mut rng);
    let exact = hungarian(&c).unwrap().distance;
    let med = c.median();
    let mut previous = f64::INFINITY;
    for factor in [1.0, 0.1, 0.01, 0.001] {
        let opts = SinkhornOptions {
            reg: Some(factor * med),
            max_iters: 200_000,
            tol: 1e-6,
        };
        let r = sinkhorn(&c, opts).unwrap();
        assert!(r.converged, "factor {factor}");
        assert!(r.distance <= previous + 1e-12);
        assert!(r.distance >= exact - 1e-12);
        previous = r.distance;
    }
    assert!((previous - exact) / exact < 0.01);
}

#[test]
fn sinkhorn_dual_objective_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for trial in 0..20 {
        let n = 3 + trial % 8;
        let c = random_cost(n, &mut rng);
        for factor in [0.5, 0.05, 0.01] {
            let opts = SinkhornOptions {
                reg: Some(factor * c.median()),
                max_iters: 2_000,
                tol: 1e-12,
            };
            let (_, trace) = sinkhorn_traced(&c, opts, true).unwrap();
            for w in trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-12, "trial {trial} factor {factor}: {trace:?}");
            }
        }
    }
}

fn euclid(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distances_are_symmetric(
        pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 1..12),
    ) {
        let y: Vec<[f64; 2]> = pts.iter().map(|p| [p.0, p.1]).collect();
        let s: Vec<[f64; 2]> = pts.iter().map(|p| [p.2, p.3]).collect();
        let ys = build_cost(&y, &s, euclid, 2.0).unwrap();
        let sy = build_cost(&s, &y, euclid, 2.0).unwrap();
        let a = hungarian(&ys).unwrap();
        let b = hungarian(&sy).unwrap();
        prop_assert!((a.distance - b.distance).abs() < 1e-10);
        prop_assert!(is_permutation(&a.permutation));

        let opts = SinkhornOptions { reg: None, max_iters: 200_000, tol: 1e-6 };
        let sa = sinkhorn(&ys, opts).unwrap();
        let sb = sinkhorn(&sy, opts).unwrap();
        prop_assert!(sa.converged && sb.converged);
        // both runs stop at marginal error `tol`, so agreement is bounded by tol * max cost
        let max_cost = ys.values().iter().cloned().fold(0.0, f64::max);
        prop_assert!((sa.distance.powi(2) - sb.distance.powi(2)).abs() <= 4.0 * opts.tol * max_cost + 1e-14);
        prop_assert!(is_permutation(&sa.permutation));

        let y1: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let s1: Vec<f64> = pts.iter().map(|p| p.2).collect();
        let f = wasserstein_1d(&y1, &s1, 1.0).unwrap();
        let g = wasserstein_1d(&s1, &y1, 1.0).unwrap();
        prop_assert!((f.distance - g.distance).abs() < 1e-10);
    }
}
