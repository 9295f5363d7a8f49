//! Non-variance-reduced baselines: stochastic linearized ADMM and
//! deterministic linearized ADMM.

use serde::{Deserialize, Serialize};

use crate::problem::Problem;

use super::asvrg::{constraint_norm_sq, initial_iterates, SolverOutput};
use super::rng::SampleStream;
use super::steps::{lambda_update, x_update_linearized, y_update, Iterates};
use super::trace::{PassCounter, TraceOptions, TraceRecorder};
use super::SolverError;

pub const SADMM_ID: &str = "sadmm";
pub const ADMM_ID: &str = "admm";

/// Proximal weight schedule for the stochastic baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepDecay {
    /// `η_t = η₀·√t`
    #[default]
    Sqrt,
    /// `η_t = η₀`
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SadmmConfig {
    /// Total stochastic iterations.
    pub iterations: usize,
    /// Penalty and dual step.
    pub beta: f64,
    /// Defaults to `L_Q + β‖A‖₂²`.
    pub eta0: Option<f64>,
    pub decay: StepDecay,
    pub trace: TraceOptions,
}

impl SadmmConfig {
    pub fn new(iterations: usize) -> Self {
        Self { iterations, beta: 1.0, eta0: None, decay: StepDecay::Sqrt, trace: TraceOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    /// Full-gradient iterations (one pass each).
    pub iterations: usize,
    pub beta: f64,
    /// Defaults to `L_f + β‖A‖₂²`.
    pub eta: Option<f64>,
    pub trace: TraceOptions,
}

impl AdmmConfig {
    pub fn new(iterations: usize) -> Self {
        Self { iterations, beta: 1.0, eta: None, trace: TraceOptions::default() }
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), SolverError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SolverError::InvalidConfig(format!("{name} must be positive and finite, got {v}")))
    }
}

fn divergence(solver: &str, t: usize, it: &Iterates) -> Result<(), SolverError> {
    if let Some(k) = it.x.first_non_finite() {
        return Err(SolverError::Divergence {
            solver: solver.into(),
            outer: t,
            inner: 0,
            reason: format!("x[{k}] = {}", it.x[k]),
        });
    }
    Ok(())
}

/// Stochastic linearized ADMM: one sampled gradient per iteration, returns
/// the last iterate.
pub fn run_sadmm(p: &Problem, config: &SadmmConfig, seed: u64) -> Result<SolverOutput, SolverError> {
    check_positive("beta", config.beta)?;
    let eta0 = match config.eta0 {
        Some(e) => e,
        None => p.lq() + config.beta * constraint_norm_sq(p)?,
    };
    check_positive("eta0", eta0)?;
    let n = p.n_samples();
    let stride = config.trace.stride.unwrap_or(n).max(1);

    let mut it = initial_iterates(p)?;
    let mut rng = SampleStream::new(seed);
    let mut passes = PassCounter::new(n);
    let mut recorder = TraceRecorder::new(p, SADMM_ID, seed, config.trace);
    recorder.record(0.0, &it.x, &it.y, (0, 0))?;

    for t in 1..=config.iterations {
        let eta = match config.decay {
            StepDecay::Sqrt => eta0 * (t as f64).sqrt(),
            StepDecay::Constant => eta0,
        };
        let i = rng.next_index(n);
        let g = p.component_gradient(i, &it.x)?;
        passes.stochastic += 1;
        let x = x_update_linearized(p, &it, &g, config.beta, eta)?;
        let y = y_update(p, &x, &it.lambda, config.beta)?;
        let lambda = lambda_update(p, &x, &y, &it.lambda, config.beta)?;
        it = Iterates { x, y, lambda };
        divergence(SADMM_ID, t, &it)?;
        if t % stride == 0 || t == config.iterations {
            recorder.record(passes.passes(), &it.x, &it.y, (t, 0))?;
        }
    }
    Ok(SolverOutput { solver: SADMM_ID.into(), seed, x: it.x, y: it.y, lambda: it.lambda, trace: recorder.records })
}

/// Deterministic linearized ADMM with full gradients. The seed only labels
/// the output.
pub fn run_deterministic_admm(p: &Problem, config: &AdmmConfig, seed: u64) -> Result<SolverOutput, SolverError> {
    check_positive("beta", config.beta)?;
    let eta = match config.eta {
        Some(e) => e,
        None => p.lf() + config.beta * constraint_norm_sq(p)?,
    };
    check_positive("eta", eta)?;
    let stride = config.trace.stride.unwrap_or(1).max(1);

    let mut it = initial_iterates(p)?;
    let mut passes = PassCounter::new(p.n_samples());
    let mut recorder = TraceRecorder::new(p, ADMM_ID, seed, config.trace);
    recorder.record(0.0, &it.x, &it.y, (0, 0))?;

    for t in 1..=config.iterations {
        let g = p.full_gradient(&it.x)?;
        passes.full += 1;
        let x = x_update_linearized(p, &it, &g, config.beta, eta)?;
        let y = y_update(p, &x, &it.lambda, config.beta)?;
        let lambda = lambda_update(p, &x, &y, &it.lambda, config.beta)?;
        it = Iterates { x, y, lambda };
        divergence(ADMM_ID, t, &it)?;
        if t % stride == 0 || t == config.iterations {
            recorder.record(passes.passes(), &it.x, &it.y, (t, 0))?;
        }
    }
    Ok(SolverOutput { solver: ADMM_ID.into(), seed, x: it.x, y: it.y, lambda: it.lambda, trace: recorder.records })
}
