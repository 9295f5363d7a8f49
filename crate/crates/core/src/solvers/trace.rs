use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::problem::Problem;

use super::SolverError;

/// One benchmark sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub solver: String,
    pub seed: u64,
    /// Effective passes over the data (fractional).
    pub passes: f64,
    pub objective: f64,
    pub violation: f64,
    /// Wall-clock seconds since the run started; `0` unless timing is enabled.
    pub seconds: f64,
}

/// Trace cadence and timing options.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TraceOptions {
    /// Record every `stride` inner iterations; `None` picks the solver default.
    pub stride: Option<usize>,
    /// Fill the `seconds` column from a wall clock. Off keeps traces bitwise
    /// reproducible.
    pub wall_clock: bool,
}

/// Effective-pass accounting: a full gradient costs one pass, a stochastic
/// gradient costs `1/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassCounter {
    pub n: usize,
    pub full: u64,
    pub stochastic: u64,
}

impl PassCounter {
    pub fn new(n: usize) -> Self {
        Self { n, full: 0, stochastic: 0 }
    }

    pub fn passes(&self) -> f64 {
        self.full as f64 + self.stochastic as f64 / self.n as f64
    }

    /// True right after the stochastic count reaches a multiple of `n`.
    pub fn at_stochastic_boundary(&self) -> bool {
        self.stochastic > 0 && self.stochastic % self.n as u64 == 0
    }
}

/// Divergence threshold relative to the initial objective.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

pub(crate) struct TraceRecorder<'p> {
    problem: &'p Problem,
    solver: String,
    seed: u64,
    wall_clock: bool,
    start: Instant,
    initial_objective: Option<f64>,
    pub records: Vec<TraceRecord>,
}

impl<'p> TraceRecorder<'p> {
    pub fn new(problem: &'p Problem, solver: &str, seed: u64, options: TraceOptions) -> Self {
        Self {
            problem,
            solver: solver.to_string(),
            seed,
            wall_clock: options.wall_clock,
            start: Instant::now(),
            initial_objective: None,
            records: Vec::new(),
        }
    }

    /// Objective reported in traces: `f(x) + ν‖Ax − c‖₁` when `B = −I`,
    /// otherwise `f(x) + g(y)`.
    pub fn reported_objective(problem: &Problem, x: &[f64], y: &[f64]) -> Result<f64, SolverError> {
        Ok(if problem.b_is_negative_identity() {
            problem.feasible_objective(x)?
        } else {
            problem.objective(x, y)?
        })
    }

    pub fn record(&mut self, passes: f64, x: &[f64], y: &[f64], at: (usize, usize)) -> Result<(), SolverError> {
        if let Some(last) = self.records.last() {
            if passes <= last.passes {
                return Ok(());
            }
        }
        let objective = Self::reported_objective(self.problem, x, y)?;
        let violation = self.problem.constraint_violation(x, y)?;
        if !objective.is_finite() || !violation.is_finite() {
            return Err(SolverError::Divergence {
                solver: self.solver.clone(),
                outer: at.0,
                inner: at.1,
                reason: format!("non-finite objective {objective} or violation {violation}"),
            });
        }
        match self.initial_objective {
            None => self.initial_objective = Some(objective),
            Some(f0) if f0 > 0.0 && objective > DIVERGENCE_FACTOR * f0 => {
                return Err(SolverError::Divergence {
                    solver: self.solver.clone(),
                    outer: at.0,
                    inner: at.1,
                    reason: format!("objective {objective} exceeds {DIVERGENCE_FACTOR}x initial value {f0}"),
                });
            }
            Some(_) => {}
        }
        let seconds = if self.wall_clock { self.start.elapsed().as_secs_f64() } else { 0.0 };
        self.records.push(TraceRecord {
            solver: self.solver.clone(),
            seed: self.seed,
            passes,
            objective,
            violation,
            seconds,
        });
        Ok(())
    }
}

/// Last-observation-carried-forward lookup of the objective at `passes`.
pub fn objective_at(trace: &[TraceRecord], passes: f64) -> Option<f64> {
    trace.iter().take_while(|r| r.passes <= passes).last().map(|r| r.objective)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_counter_is_exact_at_boundaries() {
        let mut c = PassCounter::new(3);
        c.full = 2;
        c.stochastic = 6;
        assert_eq!(c.passes(), 4.0);
        assert!(c.at_stochastic_boundary());
        c.stochastic = 7;
        assert!(!c.at_stochastic_boundary());
    }

    #[test]
    fn locf_lookup() {
        let rec = |p: f64, o: f64| TraceRecord { solver: "x".into(), seed: 0, passes: p, objective: o, violation: 0.0, seconds: 0.0 };
        let t = vec![rec(0.0, 3.0), rec(1.5, 2.0), rec(2.0, 1.0)];
        assert_eq!(objective_at(&t, 1.9), Some(2.0));
        assert_eq!(objective_at(&t, 2.0), Some(1.0));
        assert_eq!(objective_at(&t, 100.0), Some(1.0));
        assert_eq!(objective_at(&t, -1.0), None);
    }
}
