//! Executable checks of the algorithm's analytic properties, each producing
//! a machine-readable [`CheckReport`] with a replayable witness.

mod checks;
pub mod oracle;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::problem::{Problem, ProblemError};
use crate::solvers::SolverError;
use crate::synthetic::{synthetic_problem, SyntheticSpec};

pub use checks::{
    check_gradient_at, check_gradient_fd, check_penalty_dominance, check_reduction_equivalence,
    check_schedule_properties, check_schedule_properties_with, check_subproblem_optimality, check_unbiasedness,
    check_variance_bound, engine_vs_oracle, random_states, ScheduleFault, ANALYTIC_SLACK, NEAR_ZERO_FLOOR,
};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("malformed witness: {0}")]
    Witness(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Built-in instance a witness refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceRef {
    Desk { seed: u64 },
    Variance { seed: u64 },
    HighSmoothness { seed: u64 },
}

impl InstanceRef {
    pub fn spec(&self) -> SyntheticSpec {
        match *self {
            InstanceRef::Desk { seed } => SyntheticSpec::desk(seed),
            InstanceRef::Variance { seed } => SyntheticSpec::variance(seed),
            InstanceRef::HighSmoothness { seed } => SyntheticSpec::high_smoothness(seed),
        }
    }

    pub fn build(&self) -> Result<Problem, ProblemError> {
        synthetic_problem(&self.spec())
    }
}

/// Serialized state reproducing a check's worst case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// Check identifier, used to dispatch a replay.
    pub check: String,
    pub instance: Option<InstanceRef>,
    /// Arguments that re-run the check on the worst case alone.
    pub input: Value,
    /// Values observed at the worst case.
    pub observed: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    /// Worst-case slack; negative exactly when the check fails.
    pub margin: f64,
    pub witness: Option<Witness>,
}

impl CheckReport {
    pub(crate) fn new(name: impl Into<String>, passed: bool, margin: f64, witness: Witness) -> Self {
        Self { name: name.into(), passed, margin, witness: Some(witness) }
    }

    /// Tags the witness with the instance the check ran on.
    pub fn on_instance(mut self, instance: InstanceRef) -> Self {
        if let Some(w) = self.witness.as_mut() {
            w.instance = Some(instance);
        }
        self
    }

    /// One line: status, name, margin.
    pub fn summary(&self) -> String {
        format!("{} {} margin={:.6e}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.margin)
    }
}

fn field<T: serde::de::DeserializeOwned>(input: &Value, key: &str) -> Result<T, VerifyError> {
    let v = input.get(key).ok_or_else(|| VerifyError::Witness(format!("missing field {key:?}")))?;
    serde_json::from_value(v.clone()).map_err(|e| VerifyError::Witness(format!("field {key:?}: {e}")))
}

fn instance(w: &Witness) -> Result<(InstanceRef, Problem), VerifyError> {
    let r = w.instance.ok_or_else(|| VerifyError::Witness(format!("{} witness needs an instance", w.check)))?;
    Ok((r, r.build()?))
}

/// Re-runs the check named by the witness on its recorded worst case.
pub fn replay(w: &Witness) -> Result<CheckReport, VerifyError> {
    let report = match w.check.as_str() {
        "schedule-properties" => {
            let n: usize = field(&w.input, "outer_iters")?;
            let fault: Option<ScheduleFault> = field(&w.input, "fault")?;
            check_schedule_properties_with(n, fault)
        }
        "penalty-dominance" => check_penalty_dominance(field(&w.input, "outer_iters")?),
        "variance-bound" => {
            let (r, p) = instance(w)?;
            let state = (field(&w.input, "x_md")?, field(&w.input, "x_snap")?);
            check_variance_bound(&p, &[state]).on_instance(r)
        }
        "unbiasedness" => {
            let (r, p) = instance(w)?;
            let state = (field(&w.input, "x_md")?, field(&w.input, "x_snap")?);
            check_unbiasedness(&p, &[state]).on_instance(r)
        }
        "gradient-fd" => {
            let (r, p) = instance(w)?;
            check_gradient_at(&p, &field::<Vec<_>>(&w.input, "points")?, &field::<Vec<_>>(&w.input, "pairs")?, field(&w.input, "h")?)
                .on_instance(r)
        }
        "subproblem-optimality" => {
            let (r, p) = instance(w)?;
            check_subproblem_optimality(&p, &field::<Vec<_>>(&w.input, "steps")?).on_instance(r)
        }
        "reduction-equivalence" => {
            let (r, p) = instance(w)?;
            check_reduction_equivalence(&p, field(&w.input, "seed")?)?.on_instance(r)
        }
        other => return Err(VerifyError::Witness(format!("unknown check {other:?}"))),
    };
    Ok(report)
}

/// Options of [`verify_suite`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SuiteOptions {
    /// Corrupts one step of the weight recursion (negative control).
    pub inject_schedule_fault: bool,
}

/// Runs every check on the built-in instances derived from `seed`.
pub fn verify_suite(seed: u64, options: SuiteOptions) -> Result<Vec<CheckReport>, VerifyError> {
    use crate::solvers::{run_asvrg_admm_recorded, AsvrgConfig, Chi};

    let desk_ref = InstanceRef::Desk { seed };
    let var_ref = InstanceRef::Variance { seed };
    let desk = desk_ref.build()?;
    let var = var_ref.build()?;
    let mut reports = Vec::new();

    let fault = options.inject_schedule_fault.then_some(ScheduleFault { step: 7, alpha2_shift: 0.05 });
    reports.push(check_schedule_properties_with(1000, fault));
    reports.push(check_schedule_properties(1));
    // Dominance fails for N ∈ {1, 2}; the suite covers the range where it holds.
    let dominance: Vec<CheckReport> = (3..=100).map(check_penalty_dominance).collect();
    reports.push(worst_of("penalty-dominance(N=3..100)", dominance));

    reports.push(check_gradient_fd(&desk, 20, 1e-6, seed).on_instance(desk_ref));
    reports.push(check_gradient_fd(&var, 20, 1e-6, seed).on_instance(var_ref));

    let states = random_states(var.x_dim(), 100, seed);
    reports.push(check_unbiasedness(&var, &states).on_instance(var_ref));
    reports.push(check_variance_bound(&var, &states).on_instance(var_ref));

    for chi in [Chi::Linearized, Chi::Exact] {
        let mut cfg = AsvrgConfig::new(4);
        cfg.inner_iters = Some(25);
        cfg.chi = chi;
        let (_, steps) = run_asvrg_admm_recorded(&desk, &cfg, seed)?;
        let mut r = check_subproblem_optimality(&desk, &steps).on_instance(desk_ref);
        r.name = format!("{} chi={}", r.name, chi.indicator());
        reports.push(r);
    }

    reports.push(check_reduction_equivalence(&desk, seed)?.on_instance(desk_ref));
    Ok(reports)
}

/// Folds several reports of one check into the worst one, renamed.
fn worst_of(name: &str, reports: Vec<CheckReport>) -> CheckReport {
    let passed = reports.iter().all(|r| r.passed);
    let mut worst = reports
        .into_iter()
        .min_by(|a, b| a.margin.total_cmp(&b.margin))
        .expect("at least one report");
    worst.name = name.to_string();
    worst.passed = passed;
    worst
}
