//! Seeded synthetic problem instances used by the checks, tests and the
//! benchmark's built-in configs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data_io::{build_penalty_matrix, FeatureGraph};
use crate::linalg::{DenseVector, SparseMatrix};
use crate::problem::{Dataset, LossKind, Problem, ProblemError};

/// Default regularization weight of the built-in instances.
pub const DESK_NU: f64 = 1e-3;

/// `E|z|` for a standard normal `z`.
const HALF_NORMAL_MEAN: f64 = 0.797_884_560_802_865_4;

/// Shape and scaling of a generated generalized-lasso instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub loss: LossKind,
    pub nu: f64,
    /// Column `j` is multiplied by `feature_scale·max_column_scale^(j/(d−1))`.
    pub max_column_scale: f64,
    pub feature_scale: f64,
    /// Fraction of entries kept (1 keeps a dense matrix).
    pub density: f64,
    /// Scale every sample to unit Euclidean norm (after column scaling).
    pub normalize_rows: bool,
    /// Use `|z|` instead of `z` for the raw entries, as in count or
    /// indicator features.
    pub nonnegative: bool,
    /// Standard deviation of the label noise.
    pub label_noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Fused lasso: `n = 100`, `d = 20`, squared loss, standard Gaussian
    /// features, chain-graph penalty.
    pub fn desk(seed: u64) -> Self {
        Self {
            n: 100,
            d: 20,
            loss: LossKind::Squared,
            nu: DESK_NU,
            max_column_scale: 1.0,
            feature_scale: 1.0,
            density: 1.0,
            normalize_rows: false,
            nonnegative: false,
            label_noise: 0.5,
            seed,
        }
    }

    /// Logistic loss, `n = 200`, `d = 30`.
    pub fn variance(seed: u64) -> Self {
        Self { n: 200, d: 30, loss: LossKind::Logistic, ..Self::desk(seed) }
    }

    /// Desk shape with column scales spread geometrically over `[1, 400]`,
    /// like unnormalized raw attributes, so that `L_f ≥ 1e4`.
    pub fn high_smoothness(seed: u64) -> Self {
        Self { max_column_scale: 400.0, ..Self::desk(seed) }
    }
}

/// Path graph `0 − 1 − … − (d−1)` with unit weights.
pub fn chain_graph(d: usize) -> FeatureGraph {
    let edges: Vec<(usize, usize)> = (1..d).map(|j| (j - 1, j)).collect();
    let weights = vec![1.0; edges.len()];
    FeatureGraph::new(edges, weights).expect("chain edges are ordered and unique")
}

/// Gaussian features, a piecewise-constant ground truth and labels drawn
/// from the matching model (noisy sign for logistic, additive noise for
/// squared).
pub fn synthetic_dataset(spec: &SyntheticSpec) -> Result<Dataset, ProblemError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let (n, d) = (spec.n, spec.d);
    let scale = |j: usize| {
        if d <= 1 {
            spec.feature_scale
        } else {
            spec.feature_scale * spec.max_column_scale.powf(j as f64 / (d - 1) as f64)
        }
    };
    let truth: Vec<f64> = (0..d).map(|j| if (j / 5) % 2 == 0 { 1.0 } else { -0.5 }).collect();
    let mut triplets = Vec::new();
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let row_start = triplets.len();
        let mut margin = 0.0;
        for (j, &tj) in truth.iter().enumerate() {
            let keep = spec.density >= 1.0 || rng.random::<f64>() < spec.density;
            if keep {
                let z: f64 = normal.sample(&mut rng);
                let (raw, centered) = if spec.nonnegative { (z.abs(), z.abs() - HALF_NORMAL_MEAN) } else { (z, z) };
                margin += centered * tj;
                triplets.push((i, j, raw * scale(j)));
            }
        }
        if spec.normalize_rows {
            let row = &mut triplets[row_start..];
            let norm = row.iter().map(|t: &(usize, usize, f64)| t.2 * t.2).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|t| t.2 /= norm);
            }
        }
        let noise: f64 = normal.sample(&mut rng);
        labels.push(match spec.loss {
            LossKind::Logistic => {
                if margin + spec.label_noise * noise >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            LossKind::Squared => margin + spec.label_noise * noise,
        });
    }
    let features = SparseMatrix::from_triplets(n, d, triplets)?;
    Dataset::new(features, DenseVector::from(labels))
}

/// Generalized lasso with the chain-graph penalty `F = [G; I]`.
pub fn synthetic_problem(spec: &SyntheticSpec) -> Result<Problem, ProblemError> {
    let ds = synthetic_dataset(spec)?;
    let f = build_penalty_matrix(&chain_graph(spec.d), spec.d)
        .map_err(|e| ProblemError::InvalidArgument(e.to_string()))?;
    Problem::generalized_lasso(ds, spec.loss, f, spec.nu)
}

/// Uniform random points in `[−r, r]^d`.
pub fn random_points(d: usize, count: usize, radius: f64, seed: u64) -> Vec<DenseVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..d).map(|_| rng.random_range(-radius..=radius)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_seeded() {
        let a = synthetic_problem(&SyntheticSpec::desk(1)).unwrap();
        let b = synthetic_problem(&SyntheticSpec::desk(1)).unwrap();
        let c = synthetic_problem(&SyntheticSpec::desk(2)).unwrap();
        assert_eq!(a.dataset(), b.dataset());
        assert_ne!(a.dataset(), c.dataset());
        assert_eq!((a.n_samples(), a.x_dim(), a.constraint_dim()), (100, 20, 39));
    }

    #[test]
    fn high_smoothness_regime() {
        let p = synthetic_problem(&SyntheticSpec::high_smoothness(0)).unwrap();
        assert!(p.lf() >= 1e4, "{}", p.lf());
    }

    #[test]
    fn chain_graph_edges() {
        assert_eq!(chain_graph(4).edges(), &[(0, 1), (1, 2), (2, 3)]);
        assert!(chain_graph(1).is_empty());
    }
}
