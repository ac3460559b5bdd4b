use rayon::prelude::*;
use statrs::function::beta::beta_reg;

use crate::bounds::{bennett_tail_bound, freedman_tail_bound, TailQuery};
use crate::martingale::{first_hit, spectral_path, FiniteKernel, StreamSeed};

use super::VerifyError;

/// Two-sided confidence level of every reported interval.
pub const CONFIDENCE: f64 = 0.99;

/// Monte Carlo estimate of a first-passage probability.
#[derive(Debug, Clone, PartialEq)]
pub struct TailEstimate {
    pub trials: u64,
    pub hits: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    pub t: f64,
    pub sigma2: f64,
    pub steps: usize,
    pub seed: u64,
}

/// Exact binomial (Clopper–Pearson) interval for `hits` successes in
/// `trials` at two-sided level `confidence`.
pub fn clopper_pearson(hits: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(
        trials > 0 && hits <= trials,
        "need 0 <= hits <= trials, trials > 0"
    );
    assert!(confidence > 0.0 && confidence < 1.0);
    let alpha = 1.0 - confidence;
    let (x, n) = (hits as f64, trials as f64);
    // P(Bin(n, p) >= x) = I_p(x, n - x + 1), increasing in p
    let low = if hits == 0 {
        0.0
    } else {
        solve_increasing(|p| beta_reg(x, n - x + 1.0, p), alpha / 2.0)
    };
    // P(Bin(n, p) <= x) = 1 - I_p(x + 1, n - x)
    let high = if hits == trials {
        1.0
    } else {
        solve_increasing(|p| beta_reg(x + 1.0, n - x, p), 1.0 - alpha / 2.0)
    };
    (low, high)
}

/// Bisection for `f(p) = target` with `f` increasing on `[0, 1]`.
fn solve_increasing(f: impl Fn(f64) -> f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check_inputs(kernel: &FiniteKernel, steps: usize, trials: u64) -> Result<(), VerifyError> {
    if trials == 0 {
        return Err(VerifyError::NoTrials);
    }
    if steps > kernel.horizon() {
        return Err(crate::martingale::KernelError::HorizonExceeded {
            requested: steps,
            horizon: kernel.horizon(),
        }
        .into());
    }
    Ok(())
}

/// Estimates `P{∃k ≤ K: λ_max(Y_k) ≥ t and λ_max(W_k) ≤ σ²}`.
///
/// Trial `i` runs on stream `(seed, i)`, so the result does not depend on
/// the number of worker threads.
pub fn estimate_tail_probability(
    kernel: &FiniteKernel,
    steps: usize,
    t: f64,
    sigma2: f64,
    trials: u64,
    seed: u64,
) -> Result<TailEstimate, VerifyError> {
    check_inputs(kernel, steps, trials)?;
    let hits = (0..trials)
        .into_par_iter()
        .map(|i| {
            first_hit(kernel, steps, t, sigma2, StreamSeed::new(seed, i))
                .map(|h| h.is_some() as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let (ci_low, ci_high) = clopper_pearson(hits, trials, CONFIDENCE);
    Ok(TailEstimate {
        trials,
        hits,
        p_hat: hits as f64 / trials as f64,
        ci_low,
        ci_high,
        confidence: CONFIDENCE,
        t,
        sigma2,
        steps,
        seed,
    })
}

/// One row of [`bound_vs_empirical_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub estimate: TailEstimate,
    /// Raw Freedman bound.
    pub freedman: f64,
    /// Raw Bennett bound.
    pub bennett: f64,
    /// `ci_low ≤ min(1, bound)` for both bounds.
    pub ok: bool,
}

/// Compares estimated tail probabilities against the Freedman and Bennett
/// bounds with `R = kernel.difference_bound()` and `d = kernel.dim()`.
///
/// All levels share the same simulated paths, and each row equals
/// [`estimate_tail_probability`] at that level with the same seed.
/// Rows are sorted by `t`.
pub fn bound_vs_empirical_sweep(
    kernel: &FiniteKernel,
    steps: usize,
    t_grid: &[f64],
    sigma2: f64,
    trials: u64,
    seed: u64,
) -> Result<Vec<SweepRow>, VerifyError> {
    check_inputs(kernel, steps, trials)?;
    let mut levels = t_grid.to_vec();
    levels.sort_by(f64::total_cmp);
    let queries = levels
        .iter()
        .map(|&t| TailQuery::new(t, sigma2, kernel.difference_bound(), kernel.dim()))
        .collect::<Result<Vec<_>, _>>()?;

    let counts = (0..trials)
        .into_par_iter()
        .map(|i| {
            let path = spectral_path(kernel, steps, StreamSeed::new(seed, i))?;
            Ok::<_, VerifyError>(
                levels
                    .iter()
                    .map(|&t| path.iter().any(|&(y, w)| y >= t && w <= sigma2) as u64)
                    .collect::<Vec<u64>>(),
            )
        })
        .try_reduce(
            || vec![0; levels.len()],
            |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect()),
        )?;

    Ok(queries
        .iter()
        .zip(counts)
        .map(|(q, hits)| {
            let (ci_low, ci_high) = clopper_pearson(hits, trials, CONFIDENCE);
            let freedman = freedman_tail_bound(q).value;
            let bennett = bennett_tail_bound(q).value;
            SweepRow {
                estimate: TailEstimate {
                    trials,
                    hits,
                    p_hat: hits as f64 / trials as f64,
                    ci_low,
                    ci_high,
                    confidence: CONFIDENCE,
                    t: q.t,
                    sigma2,
                    steps,
                    seed,
                },
                freedman,
                bennett,
                ok: ci_low <= freedman.min(1.0) && ci_low <= bennett.min(1.0),
            }
        })
        .collect())
}
