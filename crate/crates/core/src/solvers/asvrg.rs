//! Accelerated stochastic variance-reduced ADMM and its unaccelerated
//! variance-reduced counterpart.
//!
//! Each outer iteration `s` computes a full gradient `ṽ_s` at the snapshot
//! `x̃_{s−1}` and then runs `m` inner iterations. An inner iteration forms the
//! middle point `x_md = α₁x_ag + α₂x + α₃x̃`, draws one sample, builds the
//! variance-reduced gradient at `x_md`, and performs the x / y / λ updates,
//! each followed by the matching aggregate update with the same weights. The
//! next snapshot is the mean of the `m` aggregate iterates.

use serde::{Deserialize, Serialize};

use crate::linalg::{
    combine2, combine3, factor_spd_with_limit, spectral_norm_sq, DenseVector, LinalgError,
    DEFAULT_FACTOR_DIM_LIMIT, DEFAULT_SPECTRAL_MAX_ITERS, DEFAULT_SPECTRAL_TOL,
};
use crate::problem::Problem;

use super::rng::SampleStream;
use super::schedule::{make_schedule_from_constants, Chi, Schedule, ScheduleConfig, WeightSchedule};
use super::steps::{lambda_update, svrg_gradient, y_update, Iterates, XSolver};
use super::trace::{PassCounter, TraceOptions, TraceRecord, TraceRecorder};
use super::SolverError;

pub const ASVRG_ID: &str = "asvrg-admm";
pub const SVRG_ID: &str = "svrg-admm";

const INIT_FEASIBILITY_TOL: f64 = 1e-10;

/// How the returned point combines the last aggregate and the last snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputWeighting {
    /// `1/(1+α₃m)·w_ag + α₃m/(1+α₃m)·w̃`
    #[default]
    Algorithm,
    /// `α₁/(α₁+α₃m)·w_ag + α₃m/(α₁+α₃m)·w̃`
    Appendix,
}

/// Result of a solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOutput {
    pub solver: String,
    pub seed: u64,
    pub x: DenseVector,
    pub y: DenseVector,
    pub lambda: DenseVector,
    pub trace: Vec<TraceRecord>,
}

/// Everything needed to re-check one inner iteration after the fact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepContext {
    pub s: usize,
    pub t: usize,
    pub sample: usize,
    pub chi: Chi,
    pub theta: f64,
    pub rho: f64,
    pub eta: f64,
    pub prev: Iterates,
    pub v: DenseVector,
    pub next: Iterates,
}

/// Iterate bundle of the accelerated method.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// `(x_{t,s}, y_{t,s}, λ_{t,s})`
    pub iterate: Iterates,
    /// `(x_ag, y_ag, λ_ag)`
    pub aggregate: Iterates,
    /// `(x̃, ỹ, λ̃)`
    pub snapshot: Iterates,
    pub x_md: DenseVector,
    /// Full gradient at the snapshot.
    pub v_snap: DenseVector,
    /// Most recent variance-reduced gradient.
    pub v: DenseVector,
    /// Completed outer iterations.
    pub s: usize,
    /// Inner index within the current outer iteration.
    pub t: usize,
    pub rng: SampleStream,
    pub passes: PassCounter,
    aggregate_sum: Iterates,
}

/// Default feasible start: `x = 0`, `λ = 0` and `y` solving `By = c`
/// (`y = −c` when `B = −I`, `y = 0` when `c = 0`).
pub fn initial_iterates(p: &Problem) -> Result<Iterates, SolverError> {
    let mut it = Iterates::zeros(p);
    if p.b_is_negative_identity() {
        it.y = p.c().iter().map(|c| -c).collect();
    } else if p.c().iter().any(|&c| c != 0.0) {
        return Err(SolverError::Unsupported("no default feasible start for general B with c != 0"));
    }
    Ok(it)
}

/// Observer invoked after every inner iteration.
pub trait InnerObserver {
    /// Whether the observer needs a [`StepContext`] (costs a copy per step).
    fn wants_context(&self) -> bool {
        false
    }

    fn after_inner(&mut self, state: &SolverState, ctx: Option<StepContext>) -> Result<(), SolverError>;
}

/// Observer that does nothing.
pub struct NoObserver;

impl InnerObserver for NoObserver {
    fn after_inner(&mut self, _: &SolverState, _: Option<StepContext>) -> Result<(), SolverError> {
        Ok(())
    }
}

impl SolverState {
    /// Starts from a feasible snapshot triple; the iterate and aggregate
    /// begin at the snapshot.
    pub fn new(p: &Problem, start: Iterates, seed: u64) -> Result<Self, SolverError> {
        let violation = p.constraint_violation(&start.x, &start.y)?;
        if violation > INIT_FEASIBILITY_TOL {
            return Err(SolverError::InfeasibleStart { violation });
        }
        if start.lambda.len() != p.constraint_dim() {
            return Err(SolverError::InvalidConfig("initial multiplier has the wrong dimension".into()));
        }
        Ok(Self {
            iterate: start.clone(),
            aggregate: start.clone(),
            x_md: start.x.clone(),
            v_snap: DenseVector::zeros(p.x_dim()),
            v: DenseVector::zeros(p.x_dim()),
            s: 0,
            t: 0,
            rng: SampleStream::new(seed),
            passes: PassCounter::new(p.n_samples()),
            aggregate_sum: Iterates::zeros(p),
            snapshot: start,
        })
    }

    /// One inner iteration, sub-updates in order: middle point, sample,
    /// gradient estimate, x, x_ag, y, y_ag, λ, λ_ag.
    pub fn inner_step(&mut self, p: &Problem, sched: &WeightSchedule, xs: &XSolver) -> Result<(), SolverError> {
        self.inner_step_impl(p, sched, xs, false).map(|_| ())
    }

    /// As [`inner_step`](Self::inner_step), returning the step's full context.
    pub fn inner_step_recorded(
        &mut self,
        p: &Problem,
        sched: &WeightSchedule,
        xs: &XSolver,
    ) -> Result<StepContext, SolverError> {
        self.inner_step_impl(p, sched, xs, true).map(|c| c.expect("context requested"))
    }

    fn inner_step_impl(
        &mut self,
        p: &Problem,
        sched: &WeightSchedule,
        xs: &XSolver,
        record: bool,
    ) -> Result<Option<StepContext>, SolverError> {
        let w = sched.weights;
        self.x_md = combine3(w.alpha1, &self.aggregate.x, w.alpha2, &self.iterate.x, w.alpha3, &self.snapshot.x);
        let sample = self.rng.next_index(p.n_samples());
        self.v = svrg_gradient(p, sample, &self.x_md, &self.snapshot.x, &self.v_snap);
        self.passes.stochastic += 1;

        let x = xs.update(p, &self.iterate, &self.v, sched.theta, sched.eta)?;
        self.aggregate.x = combine3(w.alpha1, &self.aggregate.x, w.alpha2, &x, w.alpha3, &self.snapshot.x);
        let y = y_update(p, &x, &self.iterate.lambda, sched.theta)?;
        self.aggregate.y = combine3(w.alpha1, &self.aggregate.y, w.alpha2, &y, w.alpha3, &self.snapshot.y);
        let lambda = lambda_update(p, &x, &y, &self.iterate.lambda, sched.rho)?;
        self.aggregate.lambda =
            combine3(w.alpha1, &self.aggregate.lambda, w.alpha2, &lambda, w.alpha3, &self.snapshot.lambda);

        let next = Iterates { x, y, lambda };
        let prev = std::mem::replace(&mut self.iterate, next);
        self.t += 1;
        accumulate(&mut self.aggregate_sum, &self.aggregate);
        self.check_finite()?;

        Ok(record.then(|| StepContext {
            s: sched.s,
            t: self.t,
            sample,
            chi: xs.chi(),
            theta: sched.theta,
            rho: sched.rho,
            eta: sched.eta,
            prev,
            v: self.v.clone(),
            next: self.iterate.clone(),
        }))
    }

    fn check_finite(&self) -> Result<(), SolverError> {
        for (name, v) in [("x", &self.iterate.x), ("y", &self.iterate.y), ("lambda", &self.iterate.lambda)] {
            if let Some(k) = v.first_non_finite() {
                return Err(SolverError::Divergence {
                    solver: ASVRG_ID.into(),
                    outer: self.s + 1,
                    inner: self.t,
                    reason: format!("{name}[{k}] = {}", v[k]),
                });
            }
        }
        Ok(())
    }

    /// One outer iteration: snapshot gradient, `m` inner iterations, then the
    /// snapshot triple becomes the mean of the aggregate iterates.
    pub fn outer_step(
        &mut self,
        p: &Problem,
        sched: &WeightSchedule,
        xs: &XSolver,
        observer: &mut dyn InnerObserver,
    ) -> Result<(), SolverError> {
        if sched.s != self.s + 1 {
            return Err(SolverError::InvalidConfig(format!(
                "schedule for s={} applied at outer iteration {}",
                sched.s,
                self.s + 1
            )));
        }
        let m = sched.constants.inner_iters;
        self.v_snap = p.full_gradient(&self.snapshot.x)?;
        self.passes.full += 1;
        self.aggregate_sum = Iterates::zeros(p);
        self.t = 0;
        for _ in 0..m {
            let ctx = self.inner_step_impl(p, sched, xs, observer.wants_context())?;
            observer.after_inner(self, ctx)?;
        }
        let mf = m as f64;
        let mean = |v: &DenseVector| -> DenseVector { v.iter().map(|a| a / mf).collect() };
        self.snapshot = Iterates {
            x: mean(&self.aggregate_sum.x),
            y: mean(&self.aggregate_sum.y),
            lambda: mean(&self.aggregate_sum.lambda),
        };
        self.s += 1;
        Ok(())
    }

    /// Returned point after `N` outer iterations, weighted with the
    /// parameters of stage `N + 1`.
    pub fn output(&self, next: &WeightSchedule, weighting: OutputWeighting) -> Result<Iterates, SolverError> {
        let m = next.constants.inner_iters as f64;
        let a3m = next.weights.alpha3 * m;
        let (w_ag, w_snap) = match weighting {
            OutputWeighting::Algorithm => (1.0 / (1.0 + a3m), a3m / (1.0 + a3m)),
            OutputWeighting::Appendix => {
                let denom = next.weights.alpha1 + a3m;
                if !(denom > 0.0) {
                    return Err(SolverError::InvalidConfig("appendix output weighting needs alpha1 + alpha3 m > 0".into()));
                }
                (next.weights.alpha1 / denom, a3m / denom)
            }
        };
        Ok(Iterates {
            x: combine2(w_ag, &self.aggregate.x, w_snap, &self.snapshot.x),
            y: combine2(w_ag, &self.aggregate.y, w_snap, &self.snapshot.y),
            lambda: combine2(w_ag, &self.aggregate.lambda, w_snap, &self.snapshot.lambda),
        })
    }
}

fn accumulate(sum: &mut Iterates, add: &Iterates) {
    for (s, a) in [(&mut sum.x, &add.x), (&mut sum.y, &add.y), (&mut sum.lambda, &add.lambda)] {
        for (si, ai) in s.iter_mut().zip(a.iter()) {
            *si += ai;
        }
    }
}

/// Configuration of the accelerated method. Penalties follow
/// `β₁ = N`, `β₂ = 1/N`, `L̄ = L_Q/α₃,₁ + L_f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsvrgConfig {
    /// `N`
    pub outer_iters: usize,
    /// `m`; defaults to the number of samples.
    pub inner_iters: Option<usize>,
    pub chi: Chi,
    pub alpha2_init: f64,
    pub alpha3_init: f64,
    pub output_weighting: OutputWeighting,
    pub trace: TraceOptions,
    pub factor_dim_limit: usize,
}

impl AsvrgConfig {
    pub fn new(outer_iters: usize) -> Self {
        Self {
            outer_iters,
            inner_iters: None,
            chi: Chi::Linearized,
            alpha2_init: 2.0 / 3.0,
            alpha3_init: 0.1,
            output_weighting: OutputWeighting::Algorithm,
            trace: TraceOptions::default(),
            factor_dim_limit: DEFAULT_FACTOR_DIM_LIMIT,
        }
    }

    pub fn schedule_config(&self, p: &Problem) -> ScheduleConfig {
        ScheduleConfig {
            outer_iters: self.outer_iters,
            inner_iters: self.inner_iters.unwrap_or(p.n_samples()),
            chi: self.chi,
            alpha2_init: self.alpha2_init,
            alpha3_init: self.alpha3_init,
        }
    }
}

/// `‖A‖₂²` by power iteration with the default tolerance.
pub fn constraint_norm_sq(p: &Problem) -> Result<f64, SolverError> {
    if p.a().nnz() == 0 {
        return Ok(0.0);
    }
    Ok(spectral_norm_sq(p.a(), DEFAULT_SPECTRAL_TOL, DEFAULT_SPECTRAL_MAX_ITERS)?)
}

/// Builds the accelerated schedule for `p`.
pub fn make_schedule(p: &Problem, config: &ScheduleConfig) -> Result<Schedule, SolverError> {
    make_schedule_from_constants(p.lq(), p.lf(), constraint_norm_sq(p)?, config)
}

/// x-update strategy for a schedule; the exact variant factors
/// `L̄I + β₁AᵀA` once.
pub fn x_solver_for(p: &Problem, schedule: &Schedule, dim_limit: usize) -> Result<XSolver, SolverError> {
    match schedule.constants.chi {
        Chi::Linearized => Ok(XSolver::Linearized),
        Chi::Exact => match factor_spd_with_limit(p.a(), schedule.constants.lbar, schedule.constants.beta1, dim_limit) {
            Ok(f) => Ok(XSolver::Exact(f)),
            Err(LinalgError::UnsupportedSize { dim, limit }) => Err(SolverError::FactorizationUnavailable { dim, limit }),
            Err(e) => Err(e.into()),
        },
    }
}

struct TraceObserver<'a, 'p, 'c> {
    recorder: TraceRecorder<'p>,
    stride: usize,
    inner_iters: usize,
    contexts: Option<&'c mut Vec<StepContext>>,
    _marker: std::marker::PhantomData<&'a ()>,
}

impl InnerObserver for TraceObserver<'_, '_, '_> {
    fn wants_context(&self) -> bool {
        self.contexts.is_some()
    }

    fn after_inner(&mut self, state: &SolverState, ctx: Option<StepContext>) -> Result<(), SolverError> {
        if let (Some(store), Some(ctx)) = (self.contexts.as_deref_mut(), ctx) {
            store.push(ctx);
        }
        if state.t < self.inner_iters && (state.t % self.stride == 0 || state.passes.at_stochastic_boundary()) {
            self.recorder.record(state.passes.passes(), &state.aggregate.x, &state.aggregate.y, (state.s + 1, state.t))?;
        }
        Ok(())
    }
}

pub(crate) fn default_stride(inner_iters: usize) -> usize {
    inner_iters.div_ceil(4).max(1)
}

/// Runs the accelerated engine over a prepared schedule.
#[allow(clippy::too_many_arguments)]
pub fn run_with_schedule(
    p: &Problem,
    schedule: &Schedule,
    xs: &XSolver,
    start: Iterates,
    seed: u64,
    weighting: OutputWeighting,
    solver_id: &str,
    trace: TraceOptions,
    contexts: Option<&mut Vec<StepContext>>,
) -> Result<SolverOutput, SolverError> {
    let mut state = SolverState::new(p, start, seed)?;
    let m = schedule.constants.inner_iters;
    let mut observer = TraceObserver {
        recorder: TraceRecorder::new(p, solver_id, seed, trace),
        stride: trace.stride.unwrap_or_else(|| default_stride(m)).max(1),
        inner_iters: m,
        contexts,
        _marker: std::marker::PhantomData,
    };
    observer.recorder.record(0.0, &state.snapshot.x, &state.snapshot.y, (0, 0))?;
    let n_outer = schedule.outer_iters();
    for s in 1..=n_outer {
        state.outer_step(p, schedule.stage(s), xs, &mut observer)?;
        let out = state.output(schedule.stage(s + 1), weighting)?;
        observer.recorder.record(state.passes.passes(), &out.x, &out.y, (s, m))?;
    }
    let out = state.output(schedule.stage(n_outer + 1), weighting)?;
    Ok(SolverOutput {
        solver: solver_id.to_string(),
        seed,
        x: out.x,
        y: out.y,
        lambda: out.lambda,
        trace: observer.recorder.records,
    })
}

fn initial_output(p: &Problem, seed: u64, solver_id: &str, trace: TraceOptions) -> Result<SolverOutput, SolverError> {
    let start = initial_iterates(p)?;
    let mut recorder = TraceRecorder::new(p, solver_id, seed, trace);
    recorder.record(0.0, &start.x, &start.y, (0, 0))?;
    Ok(SolverOutput {
        solver: solver_id.to_string(),
        seed,
        x: start.x,
        y: start.y,
        lambda: start.lambda,
        trace: recorder.records,
    })
}

/// Accelerated stochastic variance-reduced ADMM from the default feasible
/// start.
pub fn run_asvrg_admm(p: &Problem, config: &AsvrgConfig, seed: u64) -> Result<SolverOutput, SolverError> {
    run_asvrg_admm_impl(p, config, seed, None)
}

/// As [`run_asvrg_admm`], also returning the context of every inner step.
pub fn run_asvrg_admm_recorded(
    p: &Problem,
    config: &AsvrgConfig,
    seed: u64,
) -> Result<(SolverOutput, Vec<StepContext>), SolverError> {
    let mut contexts = Vec::new();
    let out = run_asvrg_admm_impl(p, config, seed, Some(&mut contexts))?;
    Ok((out, contexts))
}

fn run_asvrg_admm_impl(
    p: &Problem,
    config: &AsvrgConfig,
    seed: u64,
    contexts: Option<&mut Vec<StepContext>>,
) -> Result<SolverOutput, SolverError> {
    if config.outer_iters == 0 {
        return initial_output(p, seed, ASVRG_ID, config.trace);
    }
    let schedule = make_schedule(p, &config.schedule_config(p))?;
    let xs = x_solver_for(p, &schedule, config.factor_dim_limit)?;
    run_with_schedule(
        p,
        &schedule,
        &xs,
        initial_iterates(p)?,
        seed,
        config.output_weighting,
        ASVRG_ID,
        config.trace,
        contexts,
    )
}

/// Configuration of the unaccelerated variance-reduced baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrgConfig {
    pub outer_iters: usize,
    /// Defaults to the number of samples.
    pub inner_iters: Option<usize>,
    pub chi: Chi,
    /// Constant penalty / dual step `θ = ρ = β`.
    pub beta: f64,
    /// Proximal weight; defaults to `4·L_Q + χ·β·‖A‖₂²`.
    pub eta: Option<f64>,
    pub trace: TraceOptions,
    pub factor_dim_limit: usize,
}

impl SvrgConfig {
    pub fn new(outer_iters: usize) -> Self {
        Self {
            outer_iters,
            inner_iters: None,
            chi: Chi::Linearized,
            beta: 1.0,
            eta: None,
            trace: TraceOptions::default(),
            factor_dim_limit: DEFAULT_FACTOR_DIM_LIMIT,
        }
    }

    pub fn resolve_eta(&self, p: &Problem, a_norm_sq: f64) -> f64 {
        self.eta.unwrap_or(4.0 * p.lq() + self.chi.indicator() * self.beta * a_norm_sq)
    }

    fn validate(&self) -> Result<(), SolverError> {
        if self.outer_iters < 1 || self.inner_iters == Some(0) {
            return Err(SolverError::InvalidConfig("need outer_iters >= 1 and inner_iters >= 1".into()));
        }
        if !(self.beta > 0.0) || self.eta.is_some_and(|e| !(e > 0.0)) {
            return Err(SolverError::InvalidConfig("beta and eta must be positive".into()));
        }
        Ok(())
    }

    /// The pinned schedule under which the accelerated engine reproduces
    /// this baseline.
    pub fn pinned_schedule(&self, p: &Problem) -> Result<Schedule, SolverError> {
        self.validate()?;
        let a_norm_sq = constraint_norm_sq(p)?;
        let eta = self.resolve_eta(p, a_norm_sq);
        let m = self.inner_iters.unwrap_or(p.n_samples());
        Ok(Schedule::pinned(self.beta, eta, self.chi, a_norm_sq, m, self.outer_iters))
    }
}

/// Stochastic variance-reduced ADMM, written as its own loop without
/// middle / aggregate points.
pub fn run_svrg_admm(p: &Problem, config: &SvrgConfig, seed: u64) -> Result<SolverOutput, SolverError> {
    let schedule = config.pinned_schedule(p)?;
    let xs = x_solver_for(p, &schedule, config.factor_dim_limit)?;
    let (beta, eta) = (config.beta, schedule.constants.lbar);
    let m = schedule.constants.inner_iters;
    let n = p.n_samples();
    let stride = config.trace.stride.unwrap_or_else(|| default_stride(m)).max(1);

    let mut it = initial_iterates(p)?;
    let mut x_snap = it.x.clone();
    let mut rng = SampleStream::new(seed);
    let mut passes = PassCounter::new(n);
    let mut recorder = TraceRecorder::new(p, SVRG_ID, seed, config.trace);
    recorder.record(0.0, &it.x, &it.y, (0, 0))?;

    for s in 1..=config.outer_iters {
        let v_snap = p.full_gradient(&x_snap)?;
        passes.full += 1;
        let mut sum = DenseVector::zeros(p.x_dim());
        for t in 1..=m {
            let i = rng.next_index(n);
            let v = svrg_gradient(p, i, &it.x, &x_snap, &v_snap);
            passes.stochastic += 1;
            let x = xs.update(p, &it, &v, beta, eta)?;
            let y = y_update(p, &x, &it.lambda, beta)?;
            let lambda = lambda_update(p, &x, &y, &it.lambda, beta)?;
            it = Iterates { x, y, lambda };
            if let Some(k) = it.x.first_non_finite() {
                return Err(SolverError::Divergence {
                    solver: SVRG_ID.into(),
                    outer: s,
                    inner: t,
                    reason: format!("x[{k}] = {}", it.x[k]),
                });
            }
            for (a, b) in sum.iter_mut().zip(it.x.iter()) {
                *a += b;
            }
            if t < m && (t % stride == 0 || passes.at_stochastic_boundary()) {
                recorder.record(passes.passes(), &it.x, &it.y, (s, t))?;
            }
        }
        let mf = m as f64;
        x_snap = sum.iter().map(|a| a / mf).collect();
        recorder.record(passes.passes(), &it.x, &it.y, (s, m))?;
    }
    Ok(SolverOutput {
        solver: SVRG_ID.to_string(),
        seed,
        x: it.x,
        y: it.y,
        lambda: it.lambda,
        trace: recorder.records,
    })
}

/// The variance-reduced baseline expressed through the accelerated engine
/// with the pinned schedule.
pub fn run_svrg_via_pinned_schedule(p: &Problem, config: &SvrgConfig, seed: u64) -> Result<SolverOutput, SolverError> {
    let schedule = config.pinned_schedule(p)?;
    let xs = x_solver_for(p, &schedule, config.factor_dim_limit)?;
    run_with_schedule(
        p,
        &schedule,
        &xs,
        initial_iterates(p)?,
        seed,
        OutputWeighting::Algorithm,
        SVRG_ID,
        config.trace,
        None,
    )
}
