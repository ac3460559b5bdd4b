//! Finite-outcome transition kernels generating adapted difference sequences.
//!
//! A kernel is a finite state machine. At step `k` (1-based) in state `s`
//! it draws one of finitely many outcomes `(p_i, X_i, s_i')`; `X_i` becomes
//! the difference `X_k` and `s_i'` the next state. Conditional expectations
//! given the past are exact finite sums over the current outcome table.

use crate::bounds::CgfBoundFn;
use crate::symmat::{lambda_max, LinalgError, SymMatrix};

use super::KernelError;

/// Probability tables must sum to 1 within this absolute tolerance.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-12;
/// Centered kernels must have `‖Σ p_i X_i‖_max` within this tolerance.
pub const CENTERING_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub prob: f64,
    pub value: SymMatrix,
    pub next_state: usize,
}

impl Outcome {
    pub fn new(prob: f64, value: SymMatrix, next_state: usize) -> Self {
        Self {
            prob,
            value,
            next_state,
        }
    }
}

/// One outcome table with its cached conditional moments.
#[derive(Debug, Clone)]
pub(crate) struct Table {
    pub(crate) outcomes: Vec<Outcome>,
    pub(crate) mean: SymMatrix,
    pub(crate) second_moment: SymMatrix,
    pub(crate) max_eigenvalue: f64,
}

#[derive(Debug, Clone)]
enum Tables {
    /// Indexed by state.
    Stationary(Vec<Table>),
    /// Indexed by `[step - 1][state]`.
    PerStep(Vec<Vec<Table>>),
}

/// A named state with its outcome table, used to build stationary kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRow {
    pub label: String,
    pub outcomes: Vec<Outcome>,
}

/// Stationary transition table for [`kernel_state_dependent_walk`].
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    pub dim: usize,
    pub horizon: usize,
    pub initial_state: usize,
    pub states: Vec<StateRow>,
    /// Require `E_{k-1} X_k = 0` at every reachable state.
    pub centered: bool,
}

#[derive(Debug, Clone)]
pub struct FiniteKernel {
    dim: usize,
    horizon: usize,
    initial_state: usize,
    state_labels: Vec<String>,
    tables: Tables,
    centered: bool,
    description: String,
    difference_bound: f64,
}

impl FiniteKernel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn num_states(&self) -> usize {
        self.state_labels.len()
    }

    pub fn state_label(&self, state: usize) -> Option<&str> {
        self.state_labels.get(state).map(String::as_str)
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    /// Largest `λ_max(X_i)` over every outcome of every reachable table,
    /// clamped at 0.
    pub fn difference_bound(&self) -> f64 {
        self.difference_bound
    }

    /// The Freedman cgf bound scaled to this kernel's difference bound `R`:
    /// `g(θ) = (e^{Rθ} − Rθ − 1)/R²` (exactly `e^θ − θ − 1` when `R = 1`).
    pub fn cgf_bound(&self) -> CgfBoundFn {
        CgfBoundFn::freedman_scaled(self.difference_bound)
    }

    /// Outcome table for step `k ∈ 1..=horizon` from `state`.
    pub fn outcomes(&self, state: usize, k: usize) -> Result<&[Outcome], KernelError> {
        Ok(&self.table(state, k)?.outcomes)
    }

    pub(crate) fn table(&self, state: usize, k: usize) -> Result<&Table, KernelError> {
        if k == 0 || k > self.horizon {
            return Err(KernelError::HorizonExceeded {
                requested: k,
                horizon: self.horizon,
            });
        }
        if state >= self.num_states() {
            return Err(KernelError::UnknownState(state));
        }
        Ok(match &self.tables {
            Tables::Stationary(t) => &t[state],
            Tables::PerStep(t) => &t[k - 1][state],
        })
    }

    /// States occupied with positive probability at time `k` (`k = 0` is the
    /// initial state alone).
    pub fn reachable_states(&self, k: usize) -> Vec<bool> {
        let n = self.num_states();
        let mut reach = vec![false; n];
        reach[self.initial_state] = true;
        for step in 1..=k.min(self.horizon) {
            let mut next = vec![false; n];
            for s in (0..n).filter(|&s| reach[s]) {
                let table = self.table(s, step).expect("step within horizon");
                for o in &table.outcomes {
                    next[o.next_state] = true;
                }
            }
            if next == reach && matches!(self.tables, Tables::Stationary(_)) {
                break;
            }
            reach = next;
        }
        reach
    }

    /// Number of nodes in the outcome tree through depth `steps`, root
    /// included. Saturates at `u128::MAX`.
    pub fn tree_node_count(&self, steps: usize) -> u128 {
        let n = self.num_states();
        let mut counts = vec![0u128; n];
        counts[self.initial_state] = 1;
        let mut total: u128 = 1;
        for step in 1..=steps.min(self.horizon) {
            let mut next = vec![0u128; n];
            for (s, &c) in counts.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let table = self.table(s, step).expect("step within horizon");
                for o in &table.outcomes {
                    next[o.next_state] = next[o.next_state].saturating_add(c);
                }
            }
            total = next.iter().fold(total, |acc, &c| acc.saturating_add(c));
            counts = next;
        }
        total
    }
}

/// `E_{k-1} X_k²` at `state` for step `k`.
pub fn exact_conditional_second_moment(
    kernel: &FiniteKernel,
    state: usize,
    k: usize,
) -> Result<SymMatrix, KernelError> {
    let table = kernel.table(state, k)?;
    if !kernel.reachable_states(k - 1)[state] {
        return Err(KernelError::UnreachableState { state, step: k });
    }
    Ok(table.second_moment.clone())
}

fn build_table(
    dim: usize,
    outcomes: Vec<Outcome>,
    num_states: usize,
    state: usize,
    step: usize,
) -> Result<Table, KernelError> {
    if outcomes.is_empty() {
        return Err(KernelError::EmptyTable { state, step });
    }
    let mut sum = 0.0;
    let mut mean = SymMatrix::zeros(dim);
    let mut second_moment = SymMatrix::zeros(dim);
    let mut max_eigenvalue = f64::NEG_INFINITY;
    for o in &outcomes {
        if !(o.prob.is_finite() && o.prob > 0.0 && o.prob <= 1.0) {
            return Err(KernelError::BadProbability {
                state,
                step,
                prob: o.prob,
            });
        }
        if o.value.dim() != dim {
            return Err(KernelError::Linalg(LinalgError::DimensionMismatch {
                left: dim,
                right: o.value.dim(),
            }));
        }
        if o.next_state >= num_states {
            return Err(KernelError::UnknownState(o.next_state));
        }
        sum += o.prob;
        mean = mean.try_axpy(o.prob, &o.value)?;
        second_moment = second_moment.try_axpy(o.prob, &o.value.square())?;
        max_eigenvalue = max_eigenvalue.max(lambda_max(&o.value)?);
    }
    if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
        return Err(KernelError::ProbabilitySum { state, step, sum });
    }
    Ok(Table {
        outcomes,
        mean,
        second_moment,
        max_eigenvalue,
    })
}

fn finish(
    dim: usize,
    horizon: usize,
    initial_state: usize,
    state_labels: Vec<String>,
    tables: Tables,
    centered: bool,
    description: String,
) -> Result<FiniteKernel, KernelError> {
    if initial_state >= state_labels.len() {
        return Err(KernelError::UnknownState(initial_state));
    }
    let mut kernel = FiniteKernel {
        dim,
        horizon,
        initial_state,
        state_labels,
        tables,
        centered,
        description,
        difference_bound: 0.0,
    };
    // Scan reachable tables for R and, when centered, the conditional mean.
    let scans: Vec<(usize, Vec<bool>)> = match &kernel.tables {
        Tables::Stationary(_) if horizon == 0 => Vec::new(),
        Tables::Stationary(_) => vec![(1, kernel.ever_reachable())],
        Tables::PerStep(_) => (1..=horizon)
            .map(|k| (k, kernel.reachable_states(k - 1)))
            .collect(),
    };
    let mut bound = 0.0_f64;
    for (k, reach) in scans {
        for s in (0..kernel.num_states()).filter(|&s| reach[s]) {
            let table = kernel.table(s, k)?;
            bound = bound.max(table.max_eigenvalue);
            if centered {
                let deviation = table.mean.max_abs();
                if deviation > CENTERING_TOLERANCE {
                    return Err(KernelError::NotCentered {
                        state: s,
                        step: k,
                        deviation,
                    });
                }
            }
        }
    }
    kernel.difference_bound = bound;
    Ok(kernel)
}

impl FiniteKernel {
    fn ever_reachable(&self) -> Vec<bool> {
        let n = self.num_states();
        let mut reach = vec![false; n];
        reach[self.initial_state] = true;
        let mut stack = vec![self.initial_state];
        while let Some(s) = stack.pop() {
            for o in &self.table(s, 1).expect("horizon >= 1").outcomes {
                if !reach[o.next_state] {
                    reach[o.next_state] = true;
                    stack.push(o.next_state);
                }
            }
        }
        reach
    }
}

/// Independent series `X_k = ε_k A_k` with Rademacher signs `ε_k`.
///
/// Single state; outcomes `+A_k` and `−A_k` with probability ½ each, so
/// `V_k = A_k²` is deterministic. The horizon is the number of coefficients.
pub fn kernel_rademacher_series(coeffs: &[SymMatrix]) -> Result<FiniteKernel, KernelError> {
    let first = coeffs.first().ok_or(KernelError::EmptySeries)?;
    let dim = first.dim();
    let mut per_step = Vec::with_capacity(coeffs.len());
    for (i, a) in coeffs.iter().enumerate() {
        if a.dim() != dim {
            return Err(KernelError::Linalg(LinalgError::DimensionMismatch {
                left: dim,
                right: a.dim(),
            }));
        }
        let outcomes = vec![Outcome::new(0.5, a.clone(), 0), Outcome::new(0.5, -a, 0)];
        per_step.push(vec![build_table(dim, outcomes, 1, 0, i + 1)?]);
    }
    finish(
        dim,
        coeffs.len(),
        0,
        vec!["series".to_string()],
        Tables::PerStep(per_step),
        true,
        format!("rademacher series, d={dim}, K={}", coeffs.len()),
    )
}

/// Stationary kernel whose outcome distribution depends on a finite state.
pub fn kernel_state_dependent_walk(table: TransitionTable) -> Result<FiniteKernel, KernelError> {
    let TransitionTable {
        dim,
        horizon,
        initial_state,
        states,
        centered,
    } = table;
    if dim == 0 {
        return Err(KernelError::Linalg(LinalgError::EmptyDimension));
    }
    if states.is_empty() {
        return Err(KernelError::UnknownState(initial_state));
    }
    let n = states.len();
    let mut labels = Vec::with_capacity(n);
    let mut tables = Vec::with_capacity(n);
    for (s, row) in states.into_iter().enumerate() {
        labels.push(row.label);
        tables.push(build_table(dim, row.outcomes, n, s, 1)?);
    }
    let description = format!("state-dependent walk, d={dim}, {n} states, K={horizon}");
    finish(
        dim,
        horizon,
        initial_state,
        labels,
        Tables::Stationary(tables),
        centered,
        description,
    )
}

/// Names accepted by [`builtin_kernel`].
pub const BUILTIN_KERNELS: [&str; 3] = ["walk1d", "rademacher2d", "statewalk"];

/// Scalar ±1 random walk.
pub fn walk1d(horizon: usize) -> FiniteKernel {
    let one = SymMatrix::identity(1);
    kernel_state_dependent_walk(TransitionTable {
        dim: 1,
        horizon,
        initial_state: 0,
        states: vec![StateRow {
            label: "walk".into(),
            outcomes: vec![
                Outcome::new(0.5, one.clone(), 0),
                Outcome::new(0.5, -&one, 0),
            ],
        }],
        centered: true,
    })
    .expect("valid built-in kernel")
    .with_description(format!("walk1d: scalar +-1 walk, K={horizon}"))
}

/// Coefficient cycle of [`rademacher2d`]: non-commuting, each with `λ_max = 1`.
pub fn rademacher2d_coefficients() -> [SymMatrix; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [
        SymMatrix::from_diag(&[1.0, 0.0]).expect("finite"),
        SymMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).expect("symmetric"),
        SymMatrix::from_diag(&[0.0, 1.0]).expect("finite"),
        SymMatrix::from_rows(&[[h, h], [h, -h]]).expect("symmetric"),
    ]
}

/// 2×2 Rademacher series cycling through [`rademacher2d_coefficients`].
pub fn rademacher2d(horizon: usize) -> FiniteKernel {
    let cycle = rademacher2d_coefficients();
    let coeffs: Vec<SymMatrix> = (0..horizon.max(1))
        .map(|k| cycle[k % cycle.len()].clone())
        .collect();
    let kernel = kernel_rademacher_series(&coeffs).expect("valid built-in kernel");
    let kernel = if horizon == 0 {
        FiniteKernel {
            horizon: 0,
            ..kernel
        }
    } else {
        kernel
    };
    kernel.with_description(format!("rademacher2d: 2x2 rademacher series, K={horizon}"))
}

/// Scalar walk whose step size halves, permanently, after the first down-step.
///
/// State `full` steps ±1; its down-step moves to state `half`, which steps
/// ±½ forever. The predictable quadratic variation `W_k` is random.
pub fn statewalk(horizon: usize) -> FiniteKernel {
    let one = SymMatrix::identity(1);
    let half = SymMatrix::scalar(1, 0.5);
    kernel_state_dependent_walk(TransitionTable {
        dim: 1,
        horizon,
        initial_state: 0,
        states: vec![
            StateRow {
                label: "full".into(),
                outcomes: vec![
                    Outcome::new(0.5, one.clone(), 0),
                    Outcome::new(0.5, -&one, 1),
                ],
            },
            StateRow {
                label: "half".into(),
                outcomes: vec![
                    Outcome::new(0.5, half.clone(), 1),
                    Outcome::new(0.5, -&half, 1),
                ],
            },
        ],
        centered: true,
    })
    .expect("valid built-in kernel")
    .with_description(format!(
        "statewalk: step halves after first down-step, K={horizon}"
    ))
}

pub fn builtin_kernel(name: &str, horizon: usize) -> Result<FiniteKernel, KernelError> {
    match name {
        "walk1d" => Ok(walk1d(horizon)),
        "rademacher2d" => Ok(rademacher2d(horizon)),
        "statewalk" => Ok(statewalk(horizon)),
        _ => Err(KernelError::UnknownBuiltin(name.to_string())),
    }
}
