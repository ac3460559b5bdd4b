use matfreedman::bounds::{bennett_tail_bound, TailQuery};
use matfreedman::martingale::{
    rademacher2d, simulate_stream, statewalk, stopping_time, walk1d, StreamSeed,
};
use matfreedman::verify::{
    bound_vs_empirical_sweep, estimate_tail_probability, scalar_walk_oracle,
};

/// Counts ±1 paths of length `k` that reach `y ≥ t` at some step `j ≤ k`
/// with `j ≤ σ²`, by listing all `2^k` sign patterns.
fn enumerate_hits(k: usize, t: f64, sigma2: f64) -> u64 {
    (0u64..1 << k)
        .filter(|&bits| {
            let mut y = 0i64;
            if 0.0 >= t && 0.0 <= sigma2 {
                return true;
            }
            for j in 1..=k {
                y += if bits >> (j - 1) & 1 == 1 { 1 } else { -1 };
                if y as f64 >= t && j as f64 <= sigma2 {
                    return true;
                }
            }
            false
        })
        .count() as u64
}

#[test]
fn oracle_matches_exhaustive_enumeration() {
    let levels = [
        -1.0, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 7.0, 12.0, 13.0,
    ];
    let budgets = [-0.5, 0.0, 0.5, 1.0, 2.0, 3.0, 4.5, 6.0, 9.0, 12.0, 100.0];
    for k in 0..=12 {
        for &t in &levels {
            for &sigma2 in &budgets {
                let exact = scalar_walk_oracle(k, t, sigma2).unwrap();
                assert_eq!(exact.paths, 1 << k);
                assert_eq!(
                    exact.hits,
                    enumerate_hits(k, t, sigma2),
                    "K={k} t={t} σ²={sigma2}"
                );
            }
        }
    }
}

#[test]
fn estimate_counts_match_stopping_records() {
    let kernel = statewalk(6);
    let (t, sigma2, trials, seed) = (1.5, 2.5, 3000, 42);
    let est = estimate_tail_probability(&kernel, 6, t, sigma2, trials, seed).unwrap();
    let hits = (0..trials)
        .filter(|&i| {
            let traj = simulate_stream(&kernel, 6, &[1.0], StreamSeed::new(seed, i)).unwrap();
            stopping_time(&traj, t, sigma2).unwrap().hit
        })
        .count() as u64;
    assert_eq!(est.hits, hits);
    assert!(est.ci_low <= est.p_hat && est.p_hat <= est.ci_high);
}

#[test]
fn estimates_cover_the_exact_probability() {
    // With a 99% interval, the expected number of misses in 100 seeds is 1.
    let exact = scalar_walk_oracle(4, 2.0, 4.0).unwrap().value();
    assert_eq!(exact, 0.375);
    let kernel = walk1d(4);
    let covered = (0..100)
        .filter(|&seed| {
            let e = estimate_tail_probability(&kernel, 4, 2.0, 4.0, 100_000, seed).unwrap();
            e.ci_low <= exact && exact <= e.ci_high
        })
        .count();
    assert!(covered >= 99, "covered {covered}/100");
}

#[test]
fn estimates_track_oracle_at_larger_horizon() {
    let kernel = walk1d(12);
    for (t, sigma2) in [(3.0, 12.0), (4.0, 6.0), (2.0, 1.0), (5.5, 9.0)] {
        let exact = scalar_walk_oracle(12, t, sigma2).unwrap().value();
        let e = estimate_tail_probability(&kernel, 12, t, sigma2, 50_000, 9).unwrap();
        assert!(
            e.ci_low <= exact && exact <= e.ci_high,
            "t={t} σ²={sigma2}: {exact} vs {e:?}"
        );
    }
}

#[test]
fn builtin_kernels_never_contradict_bennett() {
    let t_grid = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0];
    for k in [1, 2, 4, 8, 12, 16, 20] {
        let kernels = [walk1d(k), rademacher2d(k), statewalk(k)];
        for kernel in &kernels {
            for sigma2 in [0.5, 1.0, 2.0, 4.0, 8.0, 20.0] {
                let rows = bound_vs_empirical_sweep(kernel, k, &t_grid, sigma2, 2000, 17).unwrap();
                for row in rows {
                    let q = TailQuery::new(
                        row.estimate.t,
                        sigma2,
                        kernel.difference_bound(),
                        kernel.dim(),
                    )
                    .unwrap();
                    let bennett = bennett_tail_bound(&q).value;
                    assert_eq!(row.bennett, bennett);
                    assert!(
                        row.estimate.ci_low <= bennett.min(1.0),
                        "{} K={k} σ²={sigma2}: {row:?}",
                        kernel.description()
                    );
                    assert!(row.ok);
                }
            }
        }
    }
}
