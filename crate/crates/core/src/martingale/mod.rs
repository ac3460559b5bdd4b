//! Adapted matrix difference sequences with exactly computable conditional
//! moments: finite-outcome kernels, simulated trajectories, the discrepancy
//! process `S_k(θ)` and stopping times.

mod file;
mod kernel;
mod trajectory;

use thiserror::Error;

use crate::symmat::LinalgError;

pub use file::{parse_kernel_file, KernelFileError};
pub use kernel::{
    builtin_kernel, exact_conditional_second_moment, kernel_rademacher_series,
    kernel_state_dependent_walk, rademacher2d, rademacher2d_coefficients, statewalk, walk1d,
    FiniteKernel, Outcome, StateRow, TransitionTable, BUILTIN_KERNELS, CENTERING_TOLERANCE,
    PROBABILITY_SUM_TOLERANCE,
};
pub use trajectory::{
    discrepancy_value, first_hit, simulate, simulate_stream, spectral_path, stopping_time,
    StepRecord, StoppingRecord, StreamSeed, Trajectory,
};

/// The built-in Freedman cgf bound `g(θ) = e^θ − θ − 1`.
pub use crate::bounds::freedman_g as g_function_value;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("outcome table for state {state} at step {step} is empty")]
    EmptyTable { state: usize, step: usize },
    #[error("probability {prob} at state {state}, step {step} is not in (0, 1]")]
    BadProbability {
        state: usize,
        step: usize,
        prob: f64,
    },
    #[error("probabilities at state {state}, step {step} sum to {sum}, not 1")]
    ProbabilitySum { state: usize, step: usize, sum: f64 },
    #[error("kernel is not centered at state {state}, step {step}: |E X| = {deviation:e}")]
    NotCentered {
        state: usize,
        step: usize,
        deviation: f64,
    },
    #[error("unknown state index {0}")]
    UnknownState(usize),
    #[error("state {state} is unreachable before step {step}")]
    UnreachableState { state: usize, step: usize },
    #[error("step {requested} is outside the kernel horizon 1..={horizon}")]
    HorizonExceeded { requested: usize, horizon: usize },
    #[error("a rademacher series needs at least one coefficient")]
    EmptySeries,
    #[error("theta must be finite and > 0, got {0}")]
    InvalidTheta(f64),
    #[error("unknown built-in kernel '{0}' (expected walk1d, rademacher2d or statewalk)")]
    UnknownBuiltin(String),
}
