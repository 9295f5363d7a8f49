use serde::{Deserialize, Serialize};

use crate::linalg::SparseMatrix;
use crate::problem::Dataset;

use super::DataError;

/// Default correlation threshold for feature-graph edges.
pub const DEFAULT_GRAPH_THRESHOLD: f64 = 0.5;

/// Largest feature count for which the dense correlation matrix is built.
pub const MAX_GRAPH_FEATURES: usize = 20_000;

/// Undirected feature graph; every edge `(i, j)` has `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGraph {
    edges: Vec<(usize, usize)>,
    weights: Vec<f64>,
}

impl FeatureGraph {
    /// Validates ordering, uniqueness and positive weights.
    pub fn new(edges: Vec<(usize, usize)>, weights: Vec<f64>) -> Result<Self, DataError> {
        if edges.len() != weights.len() {
            return Err(DataError::Graph("edge and weight counts differ".into()));
        }
        if let Some(&(i, j)) = edges.iter().find(|(i, j)| i >= j) {
            return Err(DataError::Graph(format!("edge ({i}, {j}) must satisfy i < j")));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(DataError::Graph("edge weights must be positive and finite".into()));
        }
        let mut sorted = edges.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(DataError::Graph("duplicate edge".into()));
        }
        Ok(Self { edges, weights })
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Absolute Pearson correlation matrix of the feature columns (row-major
/// `d × d`). Constant columns correlate 0 with everything, themselves
/// included.
pub fn correlation_matrix(ds: &Dataset) -> Result<Vec<f64>, DataError> {
    let w = ds.features();
    let (n, d) = (w.rows(), w.cols());
    if d > MAX_GRAPH_FEATURES {
        return Err(DataError::Graph(format!("{d} features exceeds the graph limit {MAX_GRAPH_FEATURES}")));
    }
    let nf = n as f64;
    let mut sum = vec![0.0; d];
    let mut count = vec![0usize; d];
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for (_, j, v) in w.triplets() {
        sum[j] += v;
        count[j] += 1;
        lo[j] = lo[j].min(v);
        hi[j] = hi[j].max(v);
    }
    let constant: Vec<bool> = (0..d).map(|j| count[j] == 0 || (count[j] == n && lo[j] == hi[j])).collect();
    let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let gram = w.gram_dense();
    let cov = |i: usize, j: usize| gram[i * d + j] / nf - mean[i] * mean[j];
    let sd: Vec<f64> = (0..d).map(|j| cov(j, j).max(0.0).sqrt()).collect();
    let mut corr = vec![0.0; d * d];
    for i in 0..d {
        if constant[i] || sd[i] == 0.0 {
            continue;
        }
        for j in 0..d {
            if constant[j] || sd[j] == 0.0 {
                continue;
            }
            corr[i * d + j] = (cov(i, j) / (sd[i] * sd[j])).clamp(-1.0, 1.0);
        }
    }
    Ok(corr)
}

/// Edge `(i, j)` iff `|corr(col_i, col_j)| ≥ threshold`, weight 1.
pub fn build_feature_graph(ds: &Dataset, threshold: f64) -> Result<FeatureGraph, DataError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(DataError::Graph(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    let d = ds.n_features();
    let corr = correlation_matrix(ds)?;
    let edges: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
        .filter(|&(i, j)| corr[i * d + j].abs() >= threshold)
        .collect();
    let weights = vec![1.0; edges.len()];
    FeatureGraph::new(edges, weights)
}

/// `F = [G; I]`: one signed incidence row per edge (`+w` at `i`, `−w` at
/// `j`) stacked over the `d × d` identity.
pub fn build_penalty_matrix(g: &FeatureGraph, d: usize) -> Result<SparseMatrix, DataError> {
    if let Some(&(i, j)) = g.edges().iter().find(|&&(_, j)| j >= d) {
        return Err(DataError::Graph(format!("edge ({i}, {j}) out of range for {d} features")));
    }
    let e = g.len();
    let triplets = g
        .edges()
        .iter()
        .zip(g.weights())
        .enumerate()
        .flat_map(|(r, (&(i, j), &w))| [(r, i, w), (r, j, -w)])
        .chain((0..d).map(|k| (e + k, k, 1.0)));
    Ok(SparseMatrix::from_triplets(e + d, d, triplets.collect::<Vec<_>>())?)
}
