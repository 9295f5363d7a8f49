//! Runs every (solver, seed) pair and writes the artifacts.

use std::path::{Path, PathBuf};

use asvrg_core::data_io::{
    build_feature_graph, build_penalty_matrix, load_dataset, with_binary_labels, write_cache, ParseOptions,
};
use asvrg_core::problem::{LossKind, Problem};
use asvrg_core::solvers::{
    run_asvrg_admm, run_deterministic_admm, run_sadmm, run_svrg_admm, AdmmConfig, AsvrgConfig, SadmmConfig,
    SolverError, SvrgConfig, TraceOptions, TraceRecord,
};
use asvrg_core::synthetic::{chain_graph, synthetic_dataset, SyntheticSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DatasetConfig, RunConfig, SolverSpec, SyntheticKind, DEFAULT_NU};
use crate::output::{aggregate_csv, mean_curve, sha256, trace_csv, untimed_sha256, write_atomic};
use crate::plot::render_svg;
use crate::BenchError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const TRACE_DIR: &str = "traces";

/// Description of the problem actually solved, stored in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub source: String,
    /// Hash of the input file; absent for generated data.
    pub file_sha256: Option<String>,
    /// Hash of the loaded dataset in the binary cache encoding.
    pub content_sha256: String,
    pub n: usize,
    pub d: usize,
    pub nnz: usize,
    pub loss: LossKind,
    pub nu: f64,
    pub graph_threshold: Option<f64>,
    pub graph_edges: usize,
    pub lf: f64,
    pub lq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Diverged,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub solver: String,
    pub seed: u64,
    pub status: RunStatus,
    pub detail: Option<String>,
    /// Trace file relative to the output directory.
    pub file: Option<String>,
    pub sha256: Option<String>,
    /// Hash ignoring the `seconds` column.
    pub untimed_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub sha256: String,
    pub untimed_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: RunConfig,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub dataset: DatasetInfo,
    pub runs: Vec<RunEntry>,
    pub aggregate: ArtifactEntry,
    pub plot: String,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| BenchError::Replay(format!("{}: {e}", path.display())))
    }
}

fn synthetic_spec(kind: SyntheticKind, seed: u64) -> SyntheticSpec {
    match kind {
        SyntheticKind::Desk => SyntheticSpec::desk(seed),
        SyntheticKind::HighSmoothness => SyntheticSpec::high_smoothness(seed),
        SyntheticKind::Variance => SyntheticSpec::variance(seed),
    }
}

fn content_hash(ds: &asvrg_core::problem::Dataset) -> String {
    let mut bytes = Vec::new();
    write_cache(ds, &mut bytes).expect("writing to memory");
    sha256(&bytes)
}

/// Builds the generalized-lasso problem described by the dataset section.
pub fn build_problem(cfg: &DatasetConfig, name: &str) -> Result<(Problem, DatasetInfo), BenchError> {
    let (problem, source, file_sha256, threshold, edges) = if let Some(kind) = cfg.synthetic {
        let mut spec = synthetic_spec(kind, cfg.synthetic_seed);
        if let Some(loss) = cfg.loss {
            spec.loss = loss;
        }
        if let Some(nu) = cfg.nu {
            spec.nu = nu;
        }
        let ds = synthetic_dataset(&spec)?;
        let graph = chain_graph(spec.d);
        let f = build_penalty_matrix(&graph, spec.d)?;
        let p = Problem::generalized_lasso(ds, spec.loss, f, spec.nu)?;
        let source = format!("synthetic:{name}:seed={}", cfg.synthetic_seed);
        (p, source, None, None, graph.len())
    } else {
        let path = cfg.path.as_ref().ok_or_else(|| BenchError::Config("dataset path missing".into()))?;
        let bytes = std::fs::read(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
        let ds = load_dataset(path, ParseOptions { dim_override: cfg.dim })?;
        let loss = cfg.loss.unwrap_or(LossKind::Logistic);
        let ds = if loss == LossKind::Logistic { with_binary_labels(&ds)? } else { ds };
        let graph = build_feature_graph(&ds, cfg.graph_threshold)?;
        let f = build_penalty_matrix(&graph, ds.n_features())?;
        let p = Problem::generalized_lasso(ds, loss, f, cfg.nu.unwrap_or(DEFAULT_NU))?;
        (p, path.display().to_string(), Some(sha256(&bytes)), Some(cfg.graph_threshold), graph.len())
    };
    let ds = problem.dataset();
    let info = DatasetInfo {
        name: name.to_string(),
        source,
        file_sha256,
        content_sha256: content_hash(ds),
        n: ds.n_samples(),
        d: ds.n_features(),
        nnz: ds.features().nnz(),
        loss: problem.loss(),
        nu: problem.nu(),
        graph_threshold: threshold,
        graph_edges: edges,
        lf: problem.lf(),
        lq: problem.lq(),
    };
    Ok((problem, info))
}

/// Outer iterations needed to spend `budget` passes at `per_outer` each.
fn outer_for(budget: f64, per_outer: f64) -> usize {
    ((budget / per_outer) - 1e-9).ceil().max(1.0) as usize
}

/// Runs one solver with iteration counts derived from the pass budget and
/// drops records beyond it.
pub fn run_solver(
    p: &Problem,
    spec: &SolverSpec,
    seed: u64,
    max_passes: f64,
    timing: bool,
) -> Result<Vec<TraceRecord>, SolverError> {
    let n = p.n_samples();
    let trace = |stride: Option<usize>| TraceOptions { stride, wall_clock: timing };
    let chi = spec.chi().map_err(|e| SolverError::InvalidConfig(e.to_string()))?;
    let mut records = match spec {
        SolverSpec::AsvrgAdmm { outer_iters, inner_iters, output_weighting, stride, .. } => {
            let m = inner_iters.unwrap_or(n);
            let mut c = AsvrgConfig::new(outer_iters.unwrap_or_else(|| outer_for(max_passes, 1.0 + m as f64 / n as f64)));
            c.inner_iters = Some(m);
            c.chi = chi;
            c.output_weighting = *output_weighting;
            c.trace = trace(*stride);
            run_asvrg_admm(p, &c, seed)?.trace
        }
        SolverSpec::SvrgAdmm { outer_iters, inner_iters, beta, eta, stride, .. } => {
            let m = inner_iters.unwrap_or(n);
            let mut c = SvrgConfig::new(outer_iters.unwrap_or_else(|| outer_for(max_passes, 1.0 + m as f64 / n as f64)));
            c.inner_iters = Some(m);
            c.chi = chi;
            c.beta = *beta;
            c.eta = *eta;
            c.trace = trace(*stride);
            run_svrg_admm(p, &c, seed)?.trace
        }
        SolverSpec::Sadmm { iterations, beta, eta0, decay, stride } => {
            let mut c = SadmmConfig::new(iterations.unwrap_or_else(|| (max_passes * n as f64 - 1e-9).ceil().max(1.0) as usize));
            c.beta = *beta;
            c.eta0 = *eta0;
            c.decay = *decay;
            c.trace = trace(*stride);
            run_sadmm(p, &c, seed)?.trace
        }
        SolverSpec::Admm { iterations, beta, eta } => {
            let mut c = AdmmConfig::new(iterations.unwrap_or_else(|| outer_for(max_passes, 1.0)));
            c.beta = *beta;
            c.eta = *eta;
            c.trace = trace(None);
            run_deterministic_admm(p, &c, seed)?.trace
        }
    };
    records.retain(|r| r.passes <= max_passes * (1.0 + 1e-12));
    Ok(records)
}

fn trace_file(solver: &str, seed: u64) -> String {
    format!("{TRACE_DIR}/{solver}_seed{seed}.csv")
}

/// Runs every configured (solver, seed) pair on a pool of `threads` workers
/// (`None` uses all hardware threads) and writes the artifacts.
pub fn run_benchmark(cfg: &RunConfig, threads: Option<usize>) -> Result<Manifest, BenchError> {
    cfg.validate()?;
    let name = cfg.dataset_name();
    let (problem, info) = build_problem(&cfg.dataset, &name)?;
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out.join(TRACE_DIR))?;

    let jobs: Vec<(&SolverSpec, u64)> = cfg.solvers.iter().flat_map(|s| cfg.seeds.iter().map(move |&seed| (s, seed))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<Vec<TraceRecord>, SolverError>> = pool.install(|| {
        jobs.par_iter()
            .map(|(spec, seed)| run_solver(&problem, spec, *seed, cfg.max_passes, cfg.timing))
            .collect()
    });

    let mut runs = Vec::with_capacity(jobs.len());
    let mut curves = Vec::new();
    for spec in &cfg.solvers {
        let mut ok_traces = Vec::new();
        for ((s, seed), result) in jobs.iter().zip(&results) {
            if s.id() != spec.id() {
                continue;
            }
            let entry = match result {
                Ok(records) => {
                    let csv = trace_csv(records);
                    let file = trace_file(spec.id(), *seed);
                    write_atomic(&out.join(&file), csv.as_bytes())?;
                    ok_traces.push(records.as_slice());
                    RunEntry {
                        solver: spec.id().into(),
                        seed: *seed,
                        status: RunStatus::Ok,
                        detail: None,
                        file: Some(file),
                        sha256: Some(sha256(csv.as_bytes())),
                        untimed_sha256: Some(untimed_sha256(&csv)),
                    }
                }
                Err(e) => RunEntry {
                    solver: spec.id().into(),
                    seed: *seed,
                    status: if matches!(e, SolverError::Divergence { .. }) { RunStatus::Diverged } else { RunStatus::Failed },
                    detail: Some(e.to_string()),
                    file: None,
                    sha256: None,
                    untimed_sha256: None,
                },
            };
            runs.push(entry);
        }
        if !ok_traces.is_empty() {
            curves.push((spec.id().to_string(), mean_curve(&ok_traces)));
        }
    }

    let agg = aggregate_csv(&curves);
    write_atomic(&out.join(AGGREGATE_FILE), agg.as_bytes())?;
    let series: Vec<_> = curves
        .iter()
        .map(|(s, c)| (s.clone(), c.iter().map(|p| (p.passes, p.objective)).collect()))
        .collect();
    let plot = format!("{}.svg", sanitize(&name));
    write_atomic(&out.join(&plot), render_svg(&name, &series).as_bytes())?;

    let config_json = serde_json::to_vec(cfg).expect("config serializes");
    let manifest = Manifest {
        version: asvrg_core::VERSION.to_string(),
        config: cfg.clone(),
        config_sha256: sha256(&config_json),
        seeds: cfg.seeds.clone(),
        dataset: info,
        runs,
        aggregate: ArtifactEntry { file: AGGREGATE_FILE.into(), sha256: sha256(agg.as_bytes()), untimed_sha256: untimed_sha256(&agg) },
        plot,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&out.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(manifest)
}

fn sanitize(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    if s.is_empty() { "dataset".into() } else { s }
}

/// Outcome of re-running a manifest's config.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub output_dir: PathBuf,
    /// Files whose hash differs from the manifest.
    pub mismatches: Vec<String>,
    /// `seconds` column excluded because the original run was timed.
    pub untimed: bool,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Re-runs the config stored in a manifest into `output_dir` and compares
/// every CSV with the recorded hashes.
pub fn replay_manifest(manifest_path: &Path, output_dir: &Path, threads: Option<usize>) -> Result<ReplayReport, BenchError> {
    let original = Manifest::read(manifest_path)?;
    let mut cfg = original.config.clone();
    let recorded = sha256(&serde_json::to_vec(&cfg).expect("config serializes"));
    if recorded != original.config_sha256 {
        return Err(BenchError::Replay("config hash does not match the manifest".into()));
    }
    cfg.output_dir = output_dir.to_path_buf();
    let fresh = run_benchmark(&cfg, threads)?;
    if fresh.dataset.content_sha256 != original.dataset.content_sha256 {
        return Err(BenchError::Replay(format!(
            "dataset content changed: manifest {} vs now {}",
            original.dataset.content_sha256, fresh.dataset.content_sha256
        )));
    }
    let untimed = cfg.timing;
    let pick = |full: &Option<String>, bare: &Option<String>| if untimed { bare.clone() } else { full.clone() };
    let mut mismatches = Vec::new();
    for (a, b) in original.runs.iter().zip(&fresh.runs) {
        if a.solver != b.solver || a.seed != b.seed || a.status != b.status || pick(&a.sha256, &a.untimed_sha256) != pick(&b.sha256, &b.untimed_sha256) {
            mismatches.push(a.file.clone().unwrap_or_else(|| format!("{} seed {}", a.solver, a.seed)));
        }
    }
    if original.runs.len() != fresh.runs.len() {
        mismatches.push("run list".into());
    }
    let (a, b) = (&original.aggregate, &fresh.aggregate);
    let aggregate_differs = if untimed { a.untimed_sha256 != b.untimed_sha256 } else { a.sha256 != b.sha256 };
    if aggregate_differs {
        mismatches.push(a.file.clone());
    }
    Ok(ReplayReport { output_dir: output_dir.to_path_buf(), mismatches, untimed })
}
