//! Accelerated stochastic variance-reduced ADMM and baselines.

mod asvrg;
mod baselines;
mod rng;
mod schedule;
mod steps;
mod trace;

use thiserror::Error;

use crate::linalg::LinalgError;
use crate::problem::ProblemError;

pub use asvrg::{
    constraint_norm_sq, initial_iterates, make_schedule, run_asvrg_admm, run_asvrg_admm_recorded, run_svrg_admm,
    run_svrg_via_pinned_schedule, run_with_schedule, x_solver_for, AsvrgConfig, InnerObserver, NoObserver,
    OutputWeighting, SolverOutput, SolverState, StepContext, SvrgConfig, ASVRG_ID, SVRG_ID,
};
pub use baselines::{run_deterministic_admm, run_sadmm, AdmmConfig, SadmmConfig, StepDecay, ADMM_ID, SADMM_ID};
pub use rng::SampleStream;
pub use schedule::{
    advance_weights, make_schedule_from_constants, Chi, Schedule, ScheduleConfig, ScheduleConstants, WeightSchedule,
    Weights,
};
pub use steps::{
    exact_rhs, lambda_update, soft_threshold, svrg_gradient, x_update_exact, x_update_linearized, y_update, Iterates,
    XSolver,
};
pub use trace::{objective_at, PassCounter, TraceOptions, TraceRecord, DIVERGENCE_FACTOR};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{solver} diverged at outer iteration {outer}, inner iteration {inner}: {reason}")]
    Divergence { solver: String, outer: usize, inner: usize, reason: String },
    #[error("initial point is infeasible: constraint violation {violation}")]
    InfeasibleStart { violation: f64 },
    #[error("exact x-update needs a dense factor of dimension {dim} above the limit {limit}; use chi = 1")]
    FactorizationUnavailable { dim: usize, limit: usize },
}
