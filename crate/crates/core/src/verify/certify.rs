use rand::Rng;
use rayon::prelude::*;

use crate::bounds::{freedman_g, h_lower_bound_check, CgfBoundFn};
use crate::martingale::{
    discrepancy_value, FiniteKernel, KernelError, StreamSeed, CENTERING_TOLERANCE,
};
use crate::symmat::{
    eigh, lambda_max, lambda_min_graded, matrix_exp, matrix_log, trace_exp, SymMatrix,
};

use super::{validate_distribution, VerifyError};

/// Largest outcome tree [`check_supermartingale_exact`] will enumerate.
pub const NODE_BUDGET: u128 = 100_000;
pub const DEFAULT_MGF_THETAS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 4.0];
pub const DEFAULT_SUPERMARTINGALE_THETAS: [f64; 4] = [0.1, 0.5, 1.0, 2.0];
pub const H_GRID_POINTS: usize = 10_000;

const MGF_TOLERANCE: f64 = 1e-9;
const SUPERMARTINGALE_TOLERANCE: f64 = 1e-9;
const MGF_BOUND_SLACK: f64 = 1e-12;
const H_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CertificationReport {
    pub description: String,
    /// Smallest slack observed; `+∞` when there was nothing to check.
    pub margin: f64,
    pub pass: bool,
    pub tolerance: f64,
}

impl CertificationReport {
    fn new(description: String, margin: f64, tolerance: f64) -> Self {
        Self {
            description,
            margin,
            pass: margin >= -tolerance,
            tolerance,
        }
    }
}

/// The per-instance reports of one certification suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: String,
    pub reports: Vec<CertificationReport>,
}

impl SuiteReport {
    pub fn min_margin(&self) -> f64 {
        self.reports
            .iter()
            .map(|r| r.margin)
            .fold(f64::INFINITY, f64::min)
    }

    /// True when every instance passes (vacuously so for an empty suite).
    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

/// Evaluates `tr exp(H + log E e^X) − E tr exp(H + X)`, which is
/// nonnegative by Jensen's inequality and Lieb's concavity theorem.
pub fn check_lieb_corollary(
    h: &SymMatrix,
    dist: &[(f64, SymMatrix)],
) -> Result<CertificationReport, VerifyError> {
    let dim = validate_distribution(dist)?;
    h.check_dim(&SymMatrix::zeros(dim))?;

    let mut mean_exp = SymMatrix::zeros(dim);
    let mut lhs = 0.0;
    for (p, x) in dist {
        mean_exp = mean_exp.try_axpy(*p, &matrix_exp(x)?)?;
        lhs += p * trace_exp(&h.try_add(x)?)?;
    }
    let rhs = trace_exp(&h.try_add(&matrix_log(&mean_exp)?)?)?;
    let tolerance = 1e-9 * 1f64.max(lhs.abs()).max(rhs.abs());
    Ok(CertificationReport::new(
        format!("lieb: d={dim}, {} outcomes", dist.len()),
        rhs - lhs,
        tolerance,
    ))
}

/// Evaluates `min_θ λ_min(exp(g(θ) E X²) − E e^{θX})` over `thetas` for a
/// centered distribution with `λ_max(X) ≤ 1`.
pub fn check_mgf_lemma(
    dist: &[(f64, SymMatrix)],
    thetas: &[f64],
) -> Result<CertificationReport, VerifyError> {
    let dim = validate_distribution(dist)?;
    let mut mean = SymMatrix::zeros(dim);
    let mut second = SymMatrix::zeros(dim);
    for (p, x) in dist {
        let top = lambda_max(x)?;
        if top > 1.0 + MGF_BOUND_SLACK {
            return Err(VerifyError::Precondition(format!(
                "outcome has λ_max = {top} > 1"
            )));
        }
        mean = mean.try_axpy(*p, x)?;
        second = second.try_axpy(*p, &x.square())?;
    }
    if mean.max_abs() > CENTERING_TOLERANCE {
        return Err(VerifyError::Precondition(format!(
            "distribution is not centered: |E X| = {:e}",
            mean.max_abs()
        )));
    }

    let second_eig = eigh(&second)?;
    let mut margin = f64::INFINITY;
    for &theta in thetas {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(KernelError::InvalidTheta(theta).into());
        }
        let mut mgf = SymMatrix::zeros(dim);
        for (p, x) in dist {
            mgf = mgf.try_axpy(*p, &matrix_exp(&x.scale(theta))?)?;
        }
        // In the eigenbasis of E X² the bound is diagonal and can reach
        // e^{50} at θ = 4; there the plain λ_min of the difference would
        // carry absolute error ~ε·e^{50}.
        let g = freedman_g(theta)?;
        let bound = SymMatrix::from_diag(
            &second_eig
                .eigenvalues
                .iter()
                .map(|&mu| (g * mu).exp())
                .collect::<Vec<_>>(),
        )?;
        let diff = bound.try_sub(&second_eig.to_eigenbasis(&mgf)?)?;
        margin = margin.min(lambda_min_graded(&diff)?);
    }
    Ok(CertificationReport::new(
        format!(
            "mgf: d={dim}, {} outcomes, {} thetas",
            dist.len(),
            thetas.len()
        ),
        margin,
        MGF_TOLERANCE,
    ))
}

/// Enumerates the whole outcome tree of `kernel` and checks
/// `E_{k−1} S_k ≤ S_{k−1}` at every internal node, with `S` built from the
/// kernel's scaled Freedman cgf bound.
pub fn check_supermartingale_exact(
    kernel: &FiniteKernel,
    theta: f64,
) -> Result<CertificationReport, VerifyError> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(KernelError::InvalidTheta(theta).into());
    }
    let nodes = kernel.tree_node_count(kernel.horizon());
    if nodes > NODE_BUDGET {
        return Err(VerifyError::NodeBudget {
            nodes,
            budget: NODE_BUDGET,
        });
    }
    if !kernel.is_centered() {
        return Err(VerifyError::Precondition("kernel is not centered".into()));
    }

    let g = kernel.cgf_bound();
    let dim = kernel.dim();
    let root = Node {
        state: kernel.initial_state(),
        y: SymMatrix::zeros(dim),
        w: SymMatrix::zeros(dim),
        s: dim as f64,
    };
    let mut margin = f64::INFINITY;
    visit(kernel, theta, &g, root, 0, &mut margin)?;
    Ok(CertificationReport::new(
        format!("supermartingale: {}, theta={theta}", kernel.description()),
        margin,
        SUPERMARTINGALE_TOLERANCE,
    ))
}

struct Node {
    state: usize,
    y: SymMatrix,
    w: SymMatrix,
    s: f64,
}

fn visit(
    kernel: &FiniteKernel,
    theta: f64,
    g: &CgfBoundFn,
    node: Node,
    depth: usize,
    margin: &mut f64,
) -> Result<(), VerifyError> {
    if depth == kernel.horizon() {
        return Ok(());
    }
    let table = kernel.table(node.state, depth + 1)?;
    let w = node.w.try_add(&table.second_moment)?;
    let mut children = Vec::with_capacity(table.outcomes.len());
    let mut expected = 0.0;
    for o in &table.outcomes {
        let y = node.y.try_add(&o.value)?;
        let s = discrepancy_value(&y, &w, theta, g)?;
        expected += o.prob * s;
        children.push(Node {
            state: o.next_state,
            y,
            w: w.clone(),
            s,
        });
    }
    *margin = margin.min(node.s - expected);
    for child in children {
        visit(kernel, theta, g, child, depth + 1, margin)?;
    }
    Ok(())
}

/// Symmetric matrix with upper-triangle entries uniform on `[−bound, bound]`.
pub fn random_symmetric(rng: &mut impl Rng, dim: usize, bound: f64) -> SymMatrix {
    SymMatrix::from_fn(dim, |_, _| rng.random_range(-bound..=bound))
        .expect("dim >= 1 and finite entries")
}

fn random_probabilities(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..=1.0)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

/// `(H, X distribution)` with `d ≤ 5`, at most 4 outcomes and entries
/// bounded by 2.
pub fn random_lieb_instance(seed: StreamSeed) -> (SymMatrix, Vec<(f64, SymMatrix)>) {
    let mut rng = seed.rng();
    let dim = rng.random_range(1..=5);
    let outcomes = rng.random_range(1..=4);
    let h = random_symmetric(&mut rng, dim, 2.0);
    let probs = random_probabilities(&mut rng, outcomes);
    let dist = probs
        .into_iter()
        .map(|p| (p, random_symmetric(&mut rng, dim, 2.0)))
        .collect();
    (h, dist)
}

/// A centered distribution with `max_i λ_max(X_i) ∈ [1/4, 1]`, `d ≤ 5` and
/// 2 to 4 outcomes.
pub fn random_mgf_instance(seed: StreamSeed) -> Vec<(f64, SymMatrix)> {
    let mut rng = seed.rng();
    let dim = rng.random_range(1..=5);
    let outcomes = rng.random_range(2..=4);
    let probs = random_probabilities(&mut rng, outcomes);
    let raw: Vec<SymMatrix> = (0..outcomes)
        .map(|_| random_symmetric(&mut rng, dim, 1.0))
        .collect();
    let mean = probs
        .iter()
        .zip(&raw)
        .fold(SymMatrix::zeros(dim), |acc, (p, x)| &acc + &(x * *p));
    let centered: Vec<SymMatrix> = raw.iter().map(|x| x - &mean).collect();
    let top = centered
        .iter()
        .map(|x| lambda_max(x).expect("jacobi converges on small matrices"))
        .fold(0.0, f64::max);
    let target = rng.random_range(0.25..=1.0);
    let factor = if top > 1e-12 { target / top } else { 1.0 };
    probs
        .into_iter()
        .zip(centered)
        .map(|(p, x)| (p, x.scale(factor)))
        .collect()
}

/// Runs [`check_lieb_corollary`] on `instances` random instances; instance
/// `i` is generated from stream `(seed, i)`.
pub fn certify_lieb_suite(instances: u64, seed: u64) -> Result<SuiteReport, VerifyError> {
    let reports = (0..instances)
        .into_par_iter()
        .map(|i| {
            let (h, dist) = random_lieb_instance(StreamSeed::new(seed, i));
            let mut r = check_lieb_corollary(&h, &dist)?;
            r.description = format!("instance {i}: {}", r.description);
            Ok(r)
        })
        .collect::<Result<Vec<_>, VerifyError>>()?;
    Ok(SuiteReport {
        suite: "lieb".into(),
        reports,
    })
}

/// Runs [`check_mgf_lemma`] on `instances` random centered instances.
pub fn certify_mgf_suite(
    instances: u64,
    seed: u64,
    thetas: &[f64],
) -> Result<SuiteReport, VerifyError> {
    let reports = (0..instances)
        .into_par_iter()
        .map(|i| {
            let dist = random_mgf_instance(StreamSeed::new(seed, i));
            let mut r = check_mgf_lemma(&dist, thetas)?;
            r.description = format!("instance {i}: {}", r.description);
            Ok(r)
        })
        .collect::<Result<Vec<_>, VerifyError>>()?;
    Ok(SuiteReport {
        suite: "mgf".into(),
        reports,
    })
}

/// Runs [`check_supermartingale_exact`] for every kernel and θ.
pub fn certify_supermartingale_suite(
    kernels: &[FiniteKernel],
    thetas: &[f64],
) -> Result<SuiteReport, VerifyError> {
    let jobs: Vec<(&FiniteKernel, f64)> = kernels
        .iter()
        .flat_map(|k| thetas.iter().map(move |&t| (k, t)))
        .collect();
    let reports = jobs
        .into_par_iter()
        .map(|(k, theta)| check_supermartingale_exact(k, theta))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SuiteReport {
        suite: "supermartingale".into(),
        reports,
    })
}

/// Checks `h(u) ≥ (u²/2)/(1 + u/3)` on `points` equally spaced `u ∈ [0, 100]`.
pub fn certify_h_inequality(points: usize) -> SuiteReport {
    let reports = (0..points)
        .map(|i| {
            let u = if points > 1 {
                100.0 * i as f64 / (points - 1) as f64
            } else {
                0.0
            };
            let c = h_lower_bound_check(u);
            CertificationReport::new(format!("h-inequality: u={u}"), c.margin(), H_TOLERANCE)
        })
        .collect();
    SuiteReport {
        suite: "h-inequality".into(),
        reports,
    }
}
