//! Simulation of kernel paths, the discrepancy process `S_k(θ)`, and
//! stopping times.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::CgfBoundFn;
use crate::symmat::{eigh, lambda_max, trace_exp, SymMatrix};

use super::kernel::FiniteKernel;
use super::KernelError;

/// Identifies one RNG stream: trajectory `stream` under `master` seed.
///
/// Streams are ChaCha8 keyed by the master seed with the stream index as
/// the ChaCha stream id, so trajectory `i` is the same regardless of how
/// trajectories are split across threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamSeed {
    pub master: u64,
    pub stream: u64,
}

impl StreamSeed {
    pub fn new(master: u64, stream: u64) -> Self {
        Self { master, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream);
        rng
    }
}

/// One time index of a trajectory. Record `k = 0` has `X_0 = V_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Kernel state after this step.
    pub state: usize,
    pub x: SymMatrix,
    /// `E_{k-1} X_k²`, from the kernel at the pre-step state.
    pub v: SymMatrix,
    pub y: SymMatrix,
    pub w: SymMatrix,
    /// `S_k(θ)` for each tracked `θ`, in `theta_list` order.
    pub s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub theta_list: Vec<f64>,
    pub seed: StreamSeed,
    /// The cgf bound `g` used in `S_k(θ) = tr exp(θ Y_k − g(θ) W_k)`.
    pub cgf_label: String,
    /// Records for `k = 0..=K`.
    pub steps: Vec<StepRecord>,
}

impl Trajectory {
    /// Number of steps `K`.
    pub fn len(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Running `(state, Y_k, W_k)` of one path.
#[derive(Debug, Clone)]
pub(crate) struct PathState {
    pub(crate) state: usize,
    pub(crate) y: SymMatrix,
    pub(crate) w: SymMatrix,
}

impl PathState {
    pub(crate) fn start(kernel: &FiniteKernel) -> Self {
        Self {
            state: kernel.initial_state(),
            y: SymMatrix::zeros(kernel.dim()),
            w: SymMatrix::zeros(kernel.dim()),
        }
    }

    /// Draws `X_k` and advances. Returns `(X_k, V_k)`.
    pub(crate) fn advance(
        &mut self,
        kernel: &FiniteKernel,
        k: usize,
        rng: &mut impl Rng,
    ) -> Result<(SymMatrix, SymMatrix), KernelError> {
        let table = kernel.table(self.state, k)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = table.outcomes.last().expect("non-empty table");
        for o in &table.outcomes {
            acc += o.prob;
            if u < acc {
                chosen = o;
                break;
            }
        }
        self.y = self.y.try_add(&chosen.value)?;
        self.w = self.w.try_add(&table.second_moment)?;
        self.state = chosen.next_state;
        Ok((chosen.value.clone(), table.second_moment.clone()))
    }
}

fn discrepancy(
    y: &SymMatrix,
    w: &SymMatrix,
    theta: f64,
    g: &CgfBoundFn,
) -> Result<f64, KernelError> {
    let arg = y.scale(theta).try_axpy(-g.eval(theta), w)?;
    Ok(trace_exp(&arg)?)
}

/// `S(θ) = tr exp(θ Y − g(θ) W)`.
pub fn discrepancy_value(
    y: &SymMatrix,
    w: &SymMatrix,
    theta: f64,
    g: &CgfBoundFn,
) -> Result<f64, KernelError> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(KernelError::InvalidTheta(theta));
    }
    discrepancy(y, w, theta, g)
}

/// Simulates `steps` steps on stream 0 of `seed`.
pub fn simulate(
    kernel: &FiniteKernel,
    steps: usize,
    theta_list: &[f64],
    seed: u64,
) -> Result<Trajectory, KernelError> {
    simulate_stream(kernel, steps, theta_list, StreamSeed::new(seed, 0))
}

/// Simulates one path on an explicit stream. `S_k(θ)` uses the kernel's
/// scaled Freedman cgf bound ([`FiniteKernel::cgf_bound`]).
pub fn simulate_stream(
    kernel: &FiniteKernel,
    steps: usize,
    theta_list: &[f64],
    seed: StreamSeed,
) -> Result<Trajectory, KernelError> {
    if steps > kernel.horizon() {
        return Err(KernelError::HorizonExceeded {
            requested: steps,
            horizon: kernel.horizon(),
        });
    }
    if let Some(&bad) = theta_list.iter().find(|&&th| !(th > 0.0 && th.is_finite())) {
        return Err(KernelError::InvalidTheta(bad));
    }
    let g = kernel.cgf_bound();
    let d = kernel.dim();
    let mut rng = seed.rng();
    let mut path = PathState::start(kernel);
    let mut records = Vec::with_capacity(steps + 1);
    records.push(StepRecord {
        state: path.state,
        x: SymMatrix::zeros(d),
        v: SymMatrix::zeros(d),
        y: path.y.clone(),
        w: path.w.clone(),
        s: vec![d as f64; theta_list.len()],
    });
    for k in 1..=steps {
        let (x, v) = path.advance(kernel, k, &mut rng)?;
        let s = theta_list
            .iter()
            .map(|&th| discrepancy(&path.y, &path.w, th, &g))
            .collect::<Result<Vec<_>, _>>()?;
        records.push(StepRecord {
            state: path.state,
            x,
            v,
            y: path.y.clone(),
            w: path.w.clone(),
            s,
        });
    }
    Ok(Trajectory {
        dim: d,
        theta_list: theta_list.to_vec(),
        seed,
        cgf_label: g.label().to_string(),
        steps: records,
    })
}

/// `(λ_max(Y_k), λ_max(W_k))` for `k = 0..=steps` along one path.
pub fn spectral_path(
    kernel: &FiniteKernel,
    steps: usize,
    seed: StreamSeed,
) -> Result<Vec<(f64, f64)>, KernelError> {
    if steps > kernel.horizon() {
        return Err(KernelError::HorizonExceeded {
            requested: steps,
            horizon: kernel.horizon(),
        });
    }
    let mut rng = seed.rng();
    let mut path = PathState::start(kernel);
    let mut out = Vec::with_capacity(steps + 1);
    out.push((0.0, 0.0));
    for k in 1..=steps {
        path.advance(kernel, k, &mut rng)?;
        out.push((top_eigenvalue(&path.y)?, top_eigenvalue(&path.w)?));
    }
    Ok(out)
}

/// First `k ≤ steps` with `λ_max(Y_k) ≥ t` and `λ_max(W_k) ≤ σ²`, stopping
/// the path as soon as it is found.
pub fn first_hit(
    kernel: &FiniteKernel,
    steps: usize,
    t: f64,
    sigma2: f64,
    seed: StreamSeed,
) -> Result<Option<usize>, KernelError> {
    if steps > kernel.horizon() {
        return Err(KernelError::HorizonExceeded {
            requested: steps,
            horizon: kernel.horizon(),
        });
    }
    if 0.0 >= t && 0.0 <= sigma2 {
        return Ok(Some(0));
    }
    let mut rng = seed.rng();
    let mut path = PathState::start(kernel);
    for k in 1..=steps {
        path.advance(kernel, k, &mut rng)?;
        if top_eigenvalue(&path.y)? >= t && top_eigenvalue(&path.w)? <= sigma2 {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

fn top_eigenvalue(a: &SymMatrix) -> Result<f64, KernelError> {
    if a.dim() == 1 {
        return Ok(a.get(0, 0));
    }
    Ok(eigh(a)?.lambda_max())
}

/// First time `κ` at which `λ_max(Y_κ) ≥ t` and `λ_max(W_κ) ≤ σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRecord {
    /// `None` is `κ = ∞`.
    pub kappa: Option<usize>,
    pub hit: bool,
    pub t: f64,
    pub sigma2: f64,
}

/// Scans `k = 0..=K` for the first index with `λ_max(Y_k) ≥ t` and
/// `λ_max(W_k) ≤ σ²` (both non-strict).
pub fn stopping_time(
    traj: &Trajectory,
    t: f64,
    sigma2: f64,
) -> Result<StoppingRecord, KernelError> {
    let mut kappa = None;
    for (k, rec) in traj.steps.iter().enumerate() {
        if lambda_max(&rec.y)? >= t && lambda_max(&rec.w)? <= sigma2 {
            kappa = Some(k);
            break;
        }
    }
    Ok(StoppingRecord {
        kappa,
        hit: kappa.is_some(),
        t,
        sigma2,
    })
}
