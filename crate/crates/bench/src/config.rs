//! Run configuration, read from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use asvrg_core::problem::LossKind;
use asvrg_core::solvers::{Chi, OutputWeighting, StepDecay};
use serde::{Deserialize, Serialize};

use crate::BenchError;

/// Regularization weight used when the config leaves `nu` out. It multiplies
/// `‖Fx‖₁` next to the sample-averaged loss.
pub const DEFAULT_NU: f64 = 1e-4;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    /// Seeds of the independent runs of every solver.
    pub seeds: Vec<u64>,
    /// Effective-pass budget of every run.
    pub max_passes: f64,
    /// Directory receiving traces, aggregate, plot and manifest.
    pub output_dir: PathBuf,
    /// Fill the `seconds` column from a wall clock. Traces are then no longer
    /// bitwise reproducible in that column.
    #[serde(default)]
    pub timing: bool,
    #[serde(rename = "solver")]
    pub solvers: Vec<SolverSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Label used for the plot file name.
    pub name: Option<String>,
    /// LIBSVM text file or binary cache. Exactly one of `path` and
    /// `synthetic` must be set.
    pub path: Option<PathBuf>,
    pub synthetic: Option<SyntheticKind>,
    /// Seed of the synthetic generator.
    #[serde(default)]
    pub synthetic_seed: u64,
    /// Defaults to logistic for files and to the instance's own loss for
    /// synthetic data.
    pub loss: Option<LossKind>,
    /// Defaults to [`DEFAULT_NU`] for files and to the instance's own weight
    /// for synthetic data.
    pub nu: Option<f64>,
    /// Absolute-correlation threshold of the feature graph (files only).
    #[serde(default = "default_threshold")]
    pub graph_threshold: f64,
    /// Force the feature dimension (files only).
    pub dim: Option<usize>,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

/// Built-in generated instances with a chain-graph penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    Desk,
    HighSmoothness,
    Variance,
}

/// One solver and its parameters. Iteration counts left out are derived
/// from `max_passes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SolverSpec {
    AsvrgAdmm {
        outer_iters: Option<usize>,
        inner_iters: Option<usize>,
        #[serde(default = "linearized")]
        chi: u8,
        #[serde(default)]
        output_weighting: OutputWeighting,
        stride: Option<usize>,
    },
    SvrgAdmm {
        outer_iters: Option<usize>,
        inner_iters: Option<usize>,
        #[serde(default = "linearized")]
        chi: u8,
        #[serde(default = "unit")]
        beta: f64,
        eta: Option<f64>,
        stride: Option<usize>,
    },
    Sadmm {
        iterations: Option<usize>,
        #[serde(default = "unit")]
        beta: f64,
        eta0: Option<f64>,
        #[serde(default)]
        decay: StepDecay,
        stride: Option<usize>,
    },
    Admm {
        iterations: Option<usize>,
        #[serde(default = "unit")]
        beta: f64,
        eta: Option<f64>,
    },
}

fn linearized() -> u8 {
    1
}

fn unit() -> f64 {
    1.0
}

impl SolverSpec {
    pub fn id(&self) -> &'static str {
        match self {
            SolverSpec::AsvrgAdmm { .. } => asvrg_core::solvers::ASVRG_ID,
            SolverSpec::SvrgAdmm { .. } => asvrg_core::solvers::SVRG_ID,
            SolverSpec::Sadmm { .. } => asvrg_core::solvers::SADMM_ID,
            SolverSpec::Admm { .. } => asvrg_core::solvers::ADMM_ID,
        }
    }

    pub(crate) fn chi(&self) -> Result<Chi, BenchError> {
        let raw = match self {
            SolverSpec::AsvrgAdmm { chi, .. } | SolverSpec::SvrgAdmm { chi, .. } => *chi,
            _ => 1,
        };
        Chi::from_indicator(raw).ok_or_else(|| BenchError::Config(format!("{}: chi must be 0 or 1, got {raw}", self.id())))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if let Some(p) = self.dataset.path.as_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.solvers.is_empty() {
            return bad("at least one [[solver]] is required".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.seeds {
            if !seen.insert(s) {
                return bad(format!("duplicate seed {s}"));
            }
        }
        let mut ids = std::collections::BTreeSet::new();
        for s in &self.solvers {
            if !ids.insert(s.id()) {
                return bad(format!("solver {} listed twice", s.id()));
            }
            s.chi()?;
        }
        if !(self.max_passes > 0.0 && self.max_passes.is_finite()) {
            return bad(format!("max_passes must be positive, got {}", self.max_passes));
        }
        let d = &self.dataset;
        match (&d.path, &d.synthetic) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return bad("dataset needs exactly one of `path` and `synthetic`".into()),
        }
        if !(d.graph_threshold > 0.0 && d.graph_threshold < 1.0) {
            return bad(format!("graph_threshold must lie in (0, 1), got {}", d.graph_threshold));
        }
        if d.nu.is_some_and(|nu| !(nu >= 0.0 && nu.is_finite())) {
            return bad("nu must be finite and >= 0".into());
        }
        Ok(())
    }

    /// Name used for the plot file.
    pub fn dataset_name(&self) -> String {
        if let Some(n) = &self.dataset.name {
            return n.clone();
        }
        match (&self.dataset.path, self.dataset.synthetic) {
            (Some(p), _) => p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into()),
            (None, Some(k)) => serde_json::to_value(k).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            (None, None) => "dataset".into(),
        }
    }
}
