//! Weight and penalty schedules.
//!
//! The three convex-combination weights evolve once per outer iteration:
//!
//! ```text
//! α₂′ = (√(α₂⁴ + 4α₂²) − α₂²) / 2
//! α₁′ = α₁ (1 − α₂′)
//! α₃′ = (1 − α₁)(1 − α₂′)
//! ```
//!
//! and the penalties follow `θ_s = β₁α₂,s`, `ρ_s = β₂/α₂,s`,
//! `η_s = (L̄ + χβ₁‖A‖₂²) α₂,s` with `β₁ = N`, `β₂ = 1/N` and
//! `L̄ = L_Q/α₃,₁ + L_f`.

use serde::{Deserialize, Serialize};

use super::SolverError;

const SIMPLEX_TOL: f64 = 1e-12;

/// Convex-combination weights `(α₁, α₂, α₃)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

impl Weights {
    pub fn new(alpha1: f64, alpha2: f64, alpha3: f64) -> Self {
        Self { alpha1, alpha2, alpha3 }
    }

    /// Initial weights from `α₂,₁` and `α₃,₁`.
    pub fn initial(alpha2: f64, alpha3: f64) -> Self {
        Self { alpha1: 1.0 - alpha2 - alpha3, alpha2, alpha3 }
    }

    /// `(0, 1, 0)`: middle and aggregate points collapse onto the iterate.
    pub fn pinned() -> Self {
        Self { alpha1: 0.0, alpha2: 1.0, alpha3: 0.0 }
    }

    pub fn sum(&self) -> f64 {
        self.alpha1 + self.alpha2 + self.alpha3
    }

    fn validate_open_simplex(&self) -> Result<(), SolverError> {
        let inside = |a: f64| a > 0.0 && a < 1.0;
        if !(inside(self.alpha1) && inside(self.alpha2) && inside(self.alpha3)) {
            return Err(SolverError::InvalidConfig(format!(
                "weights must lie in (0,1), got ({}, {}, {})",
                self.alpha1, self.alpha2, self.alpha3
            )));
        }
        if (self.sum() - 1.0).abs() > SIMPLEX_TOL {
            return Err(SolverError::InvalidConfig(format!(
                "weights must sum to 1, got {}",
                self.sum()
            )));
        }
        Ok(())
    }
}

/// One step of the weight recursion.
pub fn advance_weights(w: Weights) -> Result<Weights, SolverError> {
    w.validate_open_simplex()?;
    Ok(advance_unchecked(w))
}

pub(crate) fn advance_unchecked(w: Weights) -> Weights {
    let a2 = w.alpha2;
    let a2_sq = a2 * a2;
    let next2 = ((a2_sq * a2_sq + 4.0 * a2_sq).sqrt() - a2_sq) / 2.0;
    Weights {
        alpha1: w.alpha1 * (1.0 - next2),
        alpha2: next2,
        alpha3: (1.0 - w.alpha1) * (1.0 - next2),
    }
}

/// x-update variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chi {
    /// Exact quadratic subproblem, one SPD solve per step (χ = 0).
    Exact,
    /// Linearized penalty, no linear solve (χ = 1).
    Linearized,
}

impl Chi {
    pub fn indicator(self) -> f64 {
        match self {
            Chi::Exact => 0.0,
            Chi::Linearized => 1.0,
        }
    }

    pub fn from_indicator(v: u8) -> Option<Self> {
        match v {
            0 => Some(Chi::Exact),
            1 => Some(Chi::Linearized),
            _ => None,
        }
    }
}

/// Schedule configuration for the accelerated method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    /// Outer iterations `N`.
    pub outer_iters: usize,
    /// Inner iterations `m`.
    pub inner_iters: usize,
    pub chi: Chi,
    pub alpha2_init: f64,
    pub alpha3_init: f64,
}

impl ScheduleConfig {
    pub fn new(outer_iters: usize, inner_iters: usize, chi: Chi) -> Self {
        Self { outer_iters, inner_iters, chi, alpha2_init: 2.0 / 3.0, alpha3_init: 0.1 }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.outer_iters < 1 || self.inner_iters < 1 {
            return Err(SolverError::InvalidConfig(format!(
                "need N >= 1 and m >= 1, got N={}, m={}",
                self.outer_iters, self.inner_iters
            )));
        }
        if !(self.alpha2_init > 0.0 && self.alpha2_init <= 2.0 / 3.0) {
            return Err(SolverError::InvalidConfig(format!(
                "alpha2 initial value must lie in (0, 2/3], got {}",
                self.alpha2_init
            )));
        }
        if !(self.alpha3_init > 0.0 && self.alpha3_init < 1.0 / 3.0) {
            return Err(SolverError::InvalidConfig(format!(
                "alpha3 initial value must lie in (0, 1/3), got {}",
                self.alpha3_init
            )));
        }
        Weights::initial(self.alpha2_init, self.alpha3_init).validate_open_simplex()
    }
}

/// Run-wide constants shared by every outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConstants {
    pub beta1: f64,
    pub beta2: f64,
    pub lbar: f64,
    /// `‖A‖₂²` as estimated; η inherits its error.
    pub a_norm_sq: f64,
    pub chi: Chi,
    pub inner_iters: usize,
    pub outer_iters: usize,
}

/// Parameters for outer iteration `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSchedule {
    /// 1-based outer index.
    pub s: usize,
    pub weights: Weights,
    pub theta: f64,
    pub rho: f64,
    pub eta: f64,
    pub constants: ScheduleConstants,
}

impl WeightSchedule {
    fn derive(s: usize, weights: Weights, k: ScheduleConstants) -> Self {
        let a2 = weights.alpha2;
        Self {
            s,
            weights,
            theta: k.beta1 * a2,
            rho: k.beta2 / a2,
            eta: (k.lbar + k.chi.indicator() * k.beta1 * k.a_norm_sq) * a2,
            constants: k,
        }
    }

    /// Constant schedule with `α = (0,1,0)`, `θ = ρ = β` and fixed `η`.
    ///
    /// With these values the accelerated method reduces to plain
    /// variance-reduced ADMM. `lbar = η` and `β₁ = β` so the exact x-update
    /// factor `ηI + βAᵀA` is shared with the general path.
    pub fn pinned(s: usize, beta: f64, eta: f64, chi: Chi, a_norm_sq: f64, inner_iters: usize, outer_iters: usize) -> Self {
        let constants = ScheduleConstants {
            beta1: beta,
            beta2: beta,
            lbar: eta,
            a_norm_sq,
            chi,
            inner_iters,
            outer_iters,
        };
        Self { s, weights: Weights::pinned(), theta: beta, rho: beta, eta, constants }
    }
}

/// Schedules for `s = 1..=N+1`; the last entry only feeds the output weighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub constants: ScheduleConstants,
    pub stages: Vec<WeightSchedule>,
}

impl Schedule {
    /// Parameters of outer iteration `s` (1-based, up to `N + 1`).
    pub fn stage(&self, s: usize) -> &WeightSchedule {
        &self.stages[s - 1]
    }

    pub fn outer_iters(&self) -> usize {
        self.constants.outer_iters
    }

    /// `θ_s ≥ ρ_s` for every `s ≤ N`, the precondition of the per-iteration
    /// progress bound. Fails for `N ≤ 2` under `β₁ = N, β₂ = 1/N`.
    pub fn penalty_dominance_holds(&self) -> bool {
        self.stages[..self.outer_iters()].iter().all(|w| w.theta >= w.rho)
    }

    /// Pinned schedule repeated for `N + 1` stages.
    pub fn pinned(beta: f64, eta: f64, chi: Chi, a_norm_sq: f64, inner_iters: usize, outer_iters: usize) -> Self {
        let stages: Vec<_> = (1..=outer_iters + 1)
            .map(|s| WeightSchedule::pinned(s, beta, eta, chi, a_norm_sq, inner_iters, outer_iters))
            .collect();
        Self { constants: stages[0].constants, stages }
    }
}

/// Builds the default schedule from smoothness constants and `‖A‖₂²`.
pub fn make_schedule_from_constants(
    lq: f64,
    lf: f64,
    a_norm_sq: f64,
    config: &ScheduleConfig,
) -> Result<Schedule, SolverError> {
    config.validate()?;
    if !(lq > 0.0 && lf > 0.0 && lq.is_finite() && lf.is_finite()) {
        return Err(SolverError::InvalidConfig(format!(
            "smoothness constants must be positive and finite, got L_Q={lq}, L_f={lf}"
        )));
    }
    let n_outer = config.outer_iters;
    let constants = ScheduleConstants {
        beta1: n_outer as f64,
        beta2: 1.0 / n_outer as f64,
        lbar: lq / config.alpha3_init + lf,
        a_norm_sq,
        chi: config.chi,
        inner_iters: config.inner_iters,
        outer_iters: n_outer,
    };
    let mut weights = Weights::initial(config.alpha2_init, config.alpha3_init);
    let mut stages = Vec::with_capacity(n_outer + 1);
    for s in 1..=n_outer + 1 {
        stages.push(WeightSchedule::derive(s, weights, constants));
        weights = advance_weights(weights)?;
    }
    Ok(Schedule { constants, stages })
}
