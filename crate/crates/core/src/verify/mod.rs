//! Empirical and exact checks of the tail bounds and the trace inequalities
//! behind them.
//!
//! * Monte Carlo estimation of `P{∃k: λ_max(Y_k) ≥ t, λ_max(W_k) ≤ σ²}` with
//!   exact (Clopper–Pearson) confidence intervals.
//! * An exact dynamic-programming oracle for the scalar ±1 walk.
//! * Certifiers that evaluate the Lieb corollary, the Freedman mgf lemma and
//!   the supermartingale property by exact finite sums.

mod certify;
mod montecarlo;
mod oracle;

use thiserror::Error;

use crate::bounds::BoundError;
use crate::martingale::KernelError;
use crate::symmat::LinalgError;

pub use certify::{
    certify_h_inequality, certify_lieb_suite, certify_mgf_suite, certify_supermartingale_suite,
    check_lieb_corollary, check_mgf_lemma, check_supermartingale_exact, random_lieb_instance,
    random_mgf_instance, random_symmetric, CertificationReport, SuiteReport, DEFAULT_MGF_THETAS,
    DEFAULT_SUPERMARTINGALE_THETAS, H_GRID_POINTS, NODE_BUDGET,
};
pub use montecarlo::{
    bound_vs_empirical_sweep, clopper_pearson, estimate_tail_probability, SweepRow, TailEstimate,
    CONFIDENCE,
};
pub use oracle::{scalar_walk_oracle, ExactProbability, MAX_ORACLE_STEPS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("kernel tree has {nodes} nodes, over the exact-enumeration budget of {budget}; use Monte Carlo mode")]
    NodeBudget { nodes: u128, budget: u128 },
    #[error("scalar walk oracle supports at most {max} steps, got {steps}")]
    OracleHorizon { steps: usize, max: usize },
    #[error("trials must be >= 1")]
    NoTrials,
}

/// Checks that `dist` is a probability distribution over matrices of one
/// dimension and returns that dimension.
fn validate_distribution(dist: &[(f64, crate::symmat::SymMatrix)]) -> Result<usize, VerifyError> {
    let dim = dist
        .first()
        .map(|(_, x)| x.dim())
        .ok_or_else(|| VerifyError::Precondition("distribution has no outcomes".into()))?;
    let mut sum = 0.0;
    for (p, x) in dist {
        if !(p.is_finite() && *p > 0.0) {
            return Err(VerifyError::Precondition(format!(
                "probability {p} is not positive"
            )));
        }
        if x.dim() != dim {
            return Err(LinalgError::DimensionMismatch {
                left: dim,
                right: x.dim(),
            }
            .into());
        }
        sum += p;
    }
    if (sum - 1.0).abs() > crate::martingale::PROBABILITY_SUM_TOLERANCE {
        return Err(VerifyError::Precondition(format!(
            "probabilities sum to {sum}, not 1"
        )));
    }
    Ok(dim)
}
