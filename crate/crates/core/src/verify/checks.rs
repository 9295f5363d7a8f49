use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::linalg::{dot, norm, norm_sq, DenseVector, SparseMatrix};
use crate::problem::Problem;
use crate::solvers::{
    advance_weights, make_schedule, run_svrg_admm, run_svrg_via_pinned_schedule, svrg_gradient, x_solver_for,
    AsvrgConfig, Chi, Iterates, NoObserver, ScheduleConfig, SolverError, SolverState, StepContext, SvrgConfig,
    TraceOptions, Weights,
};
use crate::synthetic::random_points;

use super::oracle::{transcribe, OracleConfig};
use super::{CheckReport, Witness};

/// Multiplicative slack on analytic inequalities.
pub const ANALYTIC_SLACK: f64 = 1e-8;
/// Absolute floor for quantities near zero.
pub const NEAR_ZERO_FLOOR: f64 = 1e-12;

const FD_TOL: f64 = 1e-5;
const UNBIASED_TOL: f64 = 1e-12;
const X_STATIONARITY_TOL: f64 = 1e-8;
const Y_INCLUSION_TOL: f64 = 1e-12;
const ORACLE_TOL: f64 = 1e-12;

fn witness(check: &str, input: serde_json::Value, observed: serde_json::Value) -> Witness {
    Witness { check: check.into(), instance: None, input, observed }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Perturbation of one weight-recursion step, used as a negative control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFault {
    /// Step (1-based) whose `α₂` output is shifted.
    pub step: usize,
    pub alpha2_shift: f64,
}

pub fn check_schedule_properties(outer_iters: usize) -> CheckReport {
    check_schedule_properties_with(outer_iters, None)
}

/// Iterates the weight recursion `N` times from `(7/30, 2/3, 1/10)` and
/// checks the simplex sum, strict monotonicity of every weight and
/// `α₂,s ≤ 2/(s+2)`.
pub fn check_schedule_properties_with(outer_iters: usize, fault: Option<ScheduleFault>) -> CheckReport {
    let name = format!("schedule-properties(N={outer_iters})");
    let input = json!({ "outer_iters": outer_iters, "fault": fault });
    let mut w = Weights::initial(2.0 / 3.0, 0.1);
    let mut worst = (f64::INFINITY, 1usize, "none", w, w);
    let mut record = |slack: f64, s: usize, what: &'static str, prev: Weights, next: Weights| {
        if slack < worst.0 {
            worst = (slack, s, what, prev, next);
        }
    };
    record(2.0 / 3.0 + NEAR_ZERO_FLOOR - w.alpha2, 1, "alpha2 <= 2/(s+2)", w, w);
    record(NEAR_ZERO_FLOOR - (w.sum() - 1.0).abs(), 1, "simplex sum", w, w);
    for step in 1..=outer_iters {
        let s = step + 1;
        let next = match advance_weights(w) {
            Ok(mut n) => {
                if let Some(f) = fault.filter(|f| f.step == step) {
                    n.alpha2 += f.alpha2_shift;
                }
                n
            }
            Err(_) => {
                record(-1.0, s, "recursion rejected its input", w, w);
                break;
            }
        };
        record(w.alpha1 - next.alpha1, s, "alpha1 decreasing", w, next);
        record(w.alpha2 - next.alpha2, s, "alpha2 decreasing", w, next);
        record(next.alpha3 - w.alpha3, s, "alpha3 increasing", w, next);
        record(2.0 / (s as f64 + 2.0) + NEAR_ZERO_FLOOR - next.alpha2, s, "alpha2 <= 2/(s+2)", w, next);
        record(NEAR_ZERO_FLOOR - (next.sum() - 1.0).abs(), s, "simplex sum", w, next);
        for a in [next.alpha1, next.alpha2, next.alpha3] {
            record(a.min(1.0 - a), s, "weight in (0,1)", w, next);
        }
        w = next;
    }
    let (margin, s, what, prev, next) = worst;
    let passed = margin > 0.0;
    let observed = json!({ "s": s, "property": what, "previous": prev, "next": next });
    CheckReport::new(name, passed, margin, witness("schedule-properties", input, observed))
}

/// `θ_s ≥ 1 ≥ ρ_s` (hence `θ_s ≥ ρ_s`) for `s ≤ N` under `β₁ = N`,
/// `β₂ = 1/N`, `α₂,₁ = 2/3`. Holds exactly when `N·α₂,s ≥ 1` for all
/// `s ≤ N`, which is false for `N ≤ 2`.
pub fn check_penalty_dominance(outer_iters: usize) -> CheckReport {
    let name = format!("penalty-dominance(N={outer_iters})");
    let input = json!({ "outer_iters": outer_iters });
    let big_n = outer_iters as f64;
    let mut w = Weights::initial(2.0 / 3.0, 0.1);
    let mut worst = (f64::INFINITY, 0usize, 0.0, 0.0);
    for s in 1..=outer_iters {
        let theta = big_n * w.alpha2;
        let rho = (1.0 / big_n) / w.alpha2;
        let slack = (theta - 1.0).min(1.0 - rho).min(theta - rho);
        if slack < worst.0 {
            worst = (slack, s, theta, rho);
        }
        if s < outer_iters {
            w = advance_weights(w).expect("valid weights stay valid");
        }
    }
    let (margin, s, theta, rho) = worst;
    let observed = json!({ "s": s, "theta": theta, "rho": rho });
    CheckReport::new(name, margin >= 0.0, margin, witness("penalty-dominance", input, observed))
}

/// Random `(x_md, x̃)` pairs in `[−1, 1]^d`.
pub fn random_states(d: usize, count: usize, seed: u64) -> Vec<(DenseVector, DenseVector)> {
    let a = random_points(d, count, 1.0, seed);
    let b = random_points(d, count, 1.0, seed.wrapping_add(0x5eed));
    a.into_iter().zip(b).collect()
}

fn snapshot_terms(p: &Problem, x_md: &[f64], x_snap: &[f64]) -> (DenseVector, DenseVector, Vec<DenseVector>) {
    let g_md = p.full_gradient(x_md).expect("state dimension");
    let v_snap = p.full_gradient(x_snap).expect("state dimension");
    let vs = (0..p.n_samples()).map(|i| svrg_gradient(p, i, x_md, x_snap, &v_snap)).collect();
    (g_md, v_snap, vs)
}

/// Mean of the variance-reduced gradient over every sample equals the full
/// gradient at the middle point, relative to the larger of `‖∇f(x_md)‖∞` and
/// `‖ṽ‖∞`.
pub fn check_unbiasedness(p: &Problem, states: &[(DenseVector, DenseVector)]) -> CheckReport {
    let mut worst: Option<(f64, usize, f64)> = None;
    for (k, (x_md, x_snap)) in states.iter().enumerate() {
        let (g_md, v_snap, vs) = snapshot_terms(p, x_md, x_snap);
        let n = p.n_samples() as f64;
        let mut mean = vec![0.0; p.x_dim()];
        for v in &vs {
            for (m, vi) in mean.iter_mut().zip(v.iter()) {
                *m += vi;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let err = mean.iter().zip(g_md.iter()).fold(0.0f64, |e, (a, b)| e.max((a - b).abs()));
        let scale = inf_norm(&g_md).max(inf_norm(&v_snap)).max(f64::MIN_POSITIVE);
        let rel = err / scale;
        if worst.is_none_or(|w| rel > w.0) {
            worst = Some((rel, k, err));
        }
    }
    let (rel, k, err) = worst.unwrap_or((0.0, 0, 0.0));
    let margin = UNBIASED_TOL - rel;
    let (x_md, x_snap) = states.get(k).cloned().unwrap_or_default();
    CheckReport::new(
        "unbiasedness",
        margin >= 0.0,
        margin,
        witness(
            "unbiasedness",
            json!({ "x_md": x_md, "x_snap": x_snap }),
            json!({ "relative_error": rel, "absolute_error": err }),
        ),
    )
}

/// Variance bound, evaluated exactly by enumerating all samples:
/// `(1/n)Σ‖v_i − ∇f(x_md)‖² ≤ 2L_Q(f(x̃) − f(x_md) − ⟨∇f(x_md), x̃ − x_md⟩)`
/// with slack `1 + 1e-8` and floor `1e-12`. The margin is the smallest
/// absolute slack.
pub fn check_variance_bound(p: &Problem, states: &[(DenseVector, DenseVector)]) -> CheckReport {
    let mut worst: Option<(f64, usize, f64, f64)> = None;
    for (k, (x_md, x_snap)) in states.iter().enumerate() {
        let (g_md, _, vs) = snapshot_terms(p, x_md, x_snap);
        let lhs = vs
            .iter()
            .map(|v| v.iter().zip(g_md.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum::<f64>()
            / p.n_samples() as f64;
        let diff: Vec<f64> = x_snap.iter().zip(x_md.iter()).map(|(a, b)| a - b).collect();
        let f_snap = p.loss_value(x_snap).expect("state dimension");
        let f_md = p.loss_value(x_md).expect("state dimension");
        let rhs = 2.0 * p.lq() * (f_snap - f_md - dot(&g_md, &diff));
        let slack = rhs * (1.0 + ANALYTIC_SLACK) + NEAR_ZERO_FLOOR - lhs;
        if worst.is_none_or(|w| slack < w.0) {
            worst = Some((slack, k, lhs, rhs));
        }
    }
    let (margin, k, lhs, rhs) = worst.unwrap_or((f64::INFINITY, 0, 0.0, 0.0));
    let (x_md, x_snap) = states.get(k).cloned().unwrap_or_default();
    CheckReport::new(
        "variance-bound",
        margin >= 0.0,
        margin,
        witness("variance-bound", json!({ "x_md": x_md, "x_snap": x_snap }), json!({ "lhs": lhs, "rhs": rhs })),
    )
}

/// Central differences of `f` at random points in `[−1, 1]^d` against the
/// full gradient, plus the quadratic upper bound with `L_f` on consecutive
/// point pairs.
pub fn check_gradient_fd(p: &Problem, points: usize, h: f64, seed: u64) -> CheckReport {
    let xs = random_points(p.x_dim(), points, 1.0, seed);
    let pairs: Vec<(DenseVector, DenseVector)> = xs.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
    check_gradient_at(p, &xs, &pairs, h)
}

/// [`check_gradient_fd`] on explicit points and pairs.
pub fn check_gradient_at(p: &Problem, points: &[DenseVector], pairs: &[(DenseVector, DenseVector)], h: f64) -> CheckReport {
    let f = |x: &[f64]| p.loss_value(x).expect("point dimension");
    let mut worst_fd: Option<(f64, usize, f64)> = None;
    for (k, x) in points.iter().enumerate() {
        let g = p.full_gradient(x).expect("point dimension");
        let mut xp = x.clone();
        let mut err: f64 = 0.0;
        for j in 0..x.len() {
            xp[j] = x[j] + h;
            let up = f(&xp);
            xp[j] = x[j] - h;
            let down = f(&xp);
            xp[j] = x[j];
            err = err.max(((up - down) / (2.0 * h) - g[j]).abs());
        }
        let rel = err / inf_norm(&g).max(1e-8);
        if worst_fd.is_none_or(|w| rel > w.0) {
            worst_fd = Some((rel, k, err));
        }
    }
    let mut worst_smooth: Option<(f64, usize, f64, f64)> = None;
    for (k, (x, y)) in pairs.iter().enumerate() {
        let gy = p.full_gradient(y).expect("point dimension");
        let diff: Vec<f64> = x.iter().zip(y.iter()).map(|(a, b)| a - b).collect();
        let lhs = f(x);
        let rhs = f(y) + dot(&gy, &diff) + 0.5 * p.lf() * norm_sq(&diff);
        let slack = (rhs * (1.0 + ANALYTIC_SLACK * rhs.signum()) + NEAR_ZERO_FLOOR - lhs) / rhs.abs().max(1.0);
        if worst_smooth.is_none_or(|w| slack < w.0) {
            worst_smooth = Some((slack, k, lhs, rhs));
        }
    }
    let (rel, kf, err) = worst_fd.unwrap_or((0.0, 0, 0.0));
    let (smooth, ks, lhs, rhs) = worst_smooth.unwrap_or((f64::INFINITY, 0, 0.0, 0.0));
    let margin = (FD_TOL - rel).min(smooth);
    let input = json!({
        "points": points.get(kf).map(|x| vec![x.clone()]).unwrap_or_default(),
        "pairs": pairs.get(ks).map(|pr| vec![pr.clone()]).unwrap_or_default(),
        "h": h,
    });
    let observed = json!({ "fd_relative_error": rel, "fd_absolute_error": err, "upper_bound_lhs": lhs, "upper_bound_rhs": rhs });
    CheckReport::new("gradient-fd", margin >= 0.0, margin, witness("gradient-fd", input, observed))
}

/// Stationarity of the recorded x-steps,
/// `v + χθAᵀ(Ax₋ + By₋ − c) + (1−χ)θAᵀ(Ax + By₋ − c) + Aᵀλ₋ + η(x − x₋) = 0`
/// (relative to the sum of the term norms), and the coordinate-wise
/// subgradient inclusion `λ₋ + θ(Ax − c − y) ∈ ν∂‖y‖₁` of the y-steps
/// (`B = −I`).
pub fn check_subproblem_optimality(p: &Problem, steps: &[StepContext]) -> CheckReport {
    let mut worst: Option<(f64, usize, &'static str, f64)> = None;
    let mut note = |slack: f64, k: usize, what: &'static str, value: f64| {
        if worst.is_none_or(|w| slack < w.0) {
            worst = Some((slack, k, what, value));
        }
    };
    for (k, st) in steps.iter().enumerate() {
        let (rel, scale) = x_stationarity(p, st);
        note(X_STATIONARITY_TOL - rel, k, "x stationarity (relative)", scale);
        if p.b_is_negative_identity() {
            for (slack, q) in y_inclusion(p, st) {
                note(slack, k, "y subgradient inclusion", q as f64);
            }
        }
    }
    let (margin, k, what, value) = worst.unwrap_or((f64::INFINITY, 0, "none", 0.0));
    let step = steps.get(k).cloned().map(|s| vec![s]).unwrap_or_default();
    CheckReport::new(
        "subproblem-optimality",
        margin >= 0.0,
        margin,
        witness("subproblem-optimality", json!({ "steps": step }), json!({ "property": what, "value": value })),
    )
}

fn residual(p: &Problem, x: &[f64], y: &[f64]) -> DenseVector {
    p.constraint_residual(x, y).expect("step dimension")
}

fn at(a: &SparseMatrix, v: &[f64]) -> DenseVector {
    a.matvec_transpose(v).expect("step dimension")
}

/// Relative residual of the x-step identity and the scale it is measured
/// against.
fn x_stationarity(p: &Problem, st: &StepContext) -> (f64, f64) {
    let a = p.a();
    let chi = st.chi.indicator();
    let prev = &st.prev;
    let r_lin = at(a, &residual(p, &prev.x, &prev.y));
    let r_exact = at(a, &residual(p, &st.next.x, &prev.y));
    let at_lam = at(a, &prev.lambda);
    let mut r = vec![0.0; p.x_dim()];
    for j in 0..r.len() {
        r[j] = st.v[j]
            + chi * st.theta * r_lin[j]
            + (1.0 - chi) * st.theta * r_exact[j]
            + at_lam[j]
            + st.eta * (st.next.x[j] - prev.x[j]);
    }
    let scale = norm(&st.v)
        + chi * st.theta * norm(&r_lin)
        + (1.0 - chi) * st.theta * norm(&r_exact)
        + norm(&at_lam)
        + st.eta * (norm(&st.next.x) + norm(&prev.x));
    (norm(&r) / scale.max(f64::MIN_POSITIVE), scale)
}

/// Per-coordinate slack of `g = λ₋ + θ(Ax − c − y) ∈ ν∂|y|`.
fn y_inclusion(p: &Problem, st: &StepContext) -> Vec<(f64, usize)> {
    let ax = p.a().matvec(&st.next.x).expect("step dimension");
    let nu = p.nu();
    (0..ax.len())
        .map(|q| {
            let u = ax[q] - p.c()[q];
            let y = st.next.y[q];
            let g = st.prev.lambda[q] + st.theta * (u - y);
            let tol = Y_INCLUSION_TOL * (1.0f64).max(st.prev.lambda[q].abs() + st.theta * (u.abs() + y.abs()));
            let slack = if y > 0.0 {
                tol - (g - nu).abs()
            } else if y < 0.0 {
                tol - (g + nu).abs()
            } else {
                tol + nu - g.abs()
            };
            (slack / tol, q)
        })
        .collect()
}

/// Three reductions on `p`:
/// the pinned schedule against the standalone variance-reduced loop
/// (bitwise, 5 passes, every inner step traced); a single-sample copy with
/// `m = 1` against the dense transcription over 50 outer iterations
/// (`1e-12`); and two seeds producing different traces.
pub fn check_reduction_equivalence(p: &Problem, seed: u64) -> Result<CheckReport, SolverError> {
    let input = json!({ "seed": seed });

    // Pinned vs standalone: m = 3n/2 and N = 2 give exactly 5 passes.
    let mut svrg = SvrgConfig::new(2);
    svrg.inner_iters = Some((3 * p.n_samples()).div_ceil(2));
    svrg.trace = TraceOptions { stride: Some(1), wall_clock: false };
    let standalone = run_svrg_admm(p, &svrg, seed)?;
    let pinned = run_svrg_via_pinned_schedule(p, &svrg, seed)?;
    let bitwise = standalone == pinned;
    let mismatches = standalone.trace.iter().zip(&pinned.trace).filter(|(a, b)| a != b).count()
        + standalone.trace.len().abs_diff(pinned.trace.len());

    let other = run_svrg_admm(p, &svrg, seed.wrapping_add(1))?;
    let seeds_differ = other.trace != standalone.trace;

    let oracle_err = deterministic_reduction_error(p, 50)?;

    let margin = ORACLE_TOL - oracle_err;
    let passed = bitwise && seeds_differ && margin >= 0.0;
    let observed = json!({
        "pinned_bitwise_equal": bitwise,
        "pinned_trace_mismatches": mismatches,
        "final_passes": standalone.trace.last().map(|r| r.passes),
        "seeds_differ": seeds_differ,
        "deterministic_oracle_error": oracle_err,
    });
    let margin = if bitwise && seeds_differ { margin } else { margin.min(-1.0) };
    Ok(CheckReport::new(
        "reduction-equivalence",
        passed,
        margin,
        witness("reduction-equivalence", input, observed),
    ))
}

fn single_sample(p: &Problem) -> Result<Problem, SolverError> {
    let ds = p.dataset().select(&[0])?;
    Ok(Problem::new(ds, p.loss(), p.a().clone(), p.b().clone(), p.c().clone(), p.nu())?)
}

/// Largest stage-wise deviation (relative to `max(1, ‖·‖∞)`) between the
/// engine and the dense transcription with `n = 1`, `m = 1`.
pub(crate) fn deterministic_reduction_error(p: &Problem, outer_iters: usize) -> Result<f64, SolverError> {
    let p1 = single_sample(p)?;
    engine_vs_oracle(&p1, outer_iters, 1, Chi::Linearized, 0)
}

/// Runs the engine and the transcription side by side with a shared sample
/// stream and returns the largest relative deviation over all stages and
/// the output.
pub fn engine_vs_oracle(p: &Problem, outer_iters: usize, inner_iters: usize, chi: Chi, seed: u64) -> Result<f64, SolverError> {
    let cfg = ScheduleConfig { outer_iters, inner_iters, chi, alpha2_init: 2.0 / 3.0, alpha3_init: 0.1 };
    let schedule = make_schedule(p, &cfg)?;
    let xs = x_solver_for(p, &schedule, AsvrgConfig::new(outer_iters).factor_dim_limit)?;
    let start = crate::solvers::initial_iterates(p)?;
    let mut state = SolverState::new(p, start, seed)?;
    let mut engine = Vec::new();
    for s in 1..=outer_iters {
        state.outer_step(p, schedule.stage(s), &xs, &mut NoObserver)?;
        engine.push((state.iterate.clone(), state.aggregate.clone(), state.snapshot.clone()));
    }
    let out = state.output(schedule.stage(outer_iters + 1), crate::solvers::OutputWeighting::Algorithm)?;

    let mut stream = crate::solvers::SampleStream::new(seed);
    let n = p.n_samples();
    let ocfg = OracleConfig {
        outer_iters,
        inner_iters,
        chi: if chi == Chi::Linearized { 1 } else { 0 },
        lq: p.lq(),
        lf: p.lf(),
        a_norm_sq: schedule.constants.a_norm_sq,
    };
    let oracle = transcribe(p, ocfg, || stream.next_index(n));

    let dev = |a: &[f64], b: &[f64]| {
        let scale = inf_norm(b).max(1.0);
        a.iter().zip(b).fold(0.0f64, |m, (u, v)| m.max((u - v).abs() / scale))
    };
    let tri = |it: &Iterates, x: &[f64], y: &[f64], l: &[f64]| dev(&it.x, x).max(dev(&it.y, y)).max(dev(&it.lambda, l));
    let mut err: f64 = 0.0;
    for ((iter, agg, snap), st) in engine.iter().zip(&oracle.stages) {
        err = err
            .max(tri(iter, &st.x, &st.y, &st.lambda))
            .max(tri(agg, &st.x_ag, &st.y_ag, &st.lambda_ag))
            .max(tri(snap, &st.x_snap, &st.y_snap, &st.lambda_snap));
    }
    err = err.max(tri(&out, &oracle.x_hat, &oracle.y_hat, &oracle.lambda_hat));
    Ok(err)
}
