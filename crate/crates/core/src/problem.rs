//! Linearly constrained empirical risk minimization:
//!
//! ```text
//! minimize   (1/n) Σ f_i(x) + ν‖y‖₁
//! subject to A x + B y = c
//! ```
//!
//! with `f_i` either the squared loss `½(w_iᵀx − b_i)²` or the logistic loss
//! `log(1 + exp(−b_i w_iᵀx))`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, dot, DenseVector, LinalgError, SparseMatrix};

/// Power-iteration tolerance used for the smoothness constant of `f`.
const LF_TOL: f64 = 1e-10;
const LF_MAX_ITERS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("{what}: expected dimension {expected}, found {found}")]
    Dimension { what: &'static str, expected: usize, found: usize },
    #[error("label {value} at sample {index} is not ±1 (required by the logistic loss)")]
    InvalidLabel { index: usize, value: f64 },
    #[error("sample index {index} out of range for {n} samples")]
    SampleOutOfRange { index: usize, n: usize },
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Logistic,
    Squared,
}

impl LossKind {
    /// Loss value at margin `t = w_iᵀx` with label `b`.
    pub fn value(self, t: f64, b: f64) -> f64 {
        match self {
            LossKind::Squared => 0.5 * (t - b) * (t - b),
            LossKind::Logistic => {
                let z = b * t;
                if z >= 0.0 {
                    (-z).exp().ln_1p()
                } else {
                    -z + z.exp().ln_1p()
                }
            }
        }
    }

    /// Derivative of the loss with respect to the margin.
    pub fn derivative(self, t: f64, b: f64) -> f64 {
        match self {
            LossKind::Squared => t - b,
            LossKind::Logistic => -b * sigmoid(-b * t),
        }
    }

    /// Curvature bound: `f_i` is `curvature · ‖w_i‖²`-smooth.
    pub fn curvature(self) -> f64 {
        match self {
            LossKind::Squared => 1.0,
            LossKind::Logistic => 0.25,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Samples `w_i` stored as rows of a sparse matrix, with labels `b_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: SparseMatrix,
    labels: DenseVector,
}

impl Dataset {
    pub fn new(features: SparseMatrix, labels: DenseVector) -> Result<Self, ProblemError> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(ProblemError::EmptyDataset);
        }
        if labels.len() != features.rows() {
            return Err(ProblemError::Dimension {
                what: "labels",
                expected: features.rows(),
                found: labels.len(),
            });
        }
        if let Some(i) = labels.first_non_finite() {
            return Err(ProblemError::InvalidLabel { index: i, value: labels[i] });
        }
        Ok(Self { features, labels })
    }

    pub fn features(&self) -> &SparseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &DenseVector {
        &self.labels
    }

    pub fn n_samples(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    /// Sub-dataset made of the listed samples.
    pub fn select(&self, samples: &[usize]) -> Result<Self, ProblemError> {
        let labels = samples.iter().map(|&i| self.labels[i]).collect();
        Self::new(self.features.select_rows(samples), labels)
    }
}

/// Smoothness constants of the loss: per-sample `L_i`, their max `L_Q` and
/// the constant `L_f` of the averaged loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Smoothness {
    pub per_sample: DenseVector,
    pub lq: f64,
    pub lf: f64,
}

/// Computes `(L_i, L_Q, L_f)` for a dataset under the given loss.
///
/// `L_i = κ‖w_i‖²` and `L_f = κ λ_max((1/n) Σ w_i w_iᵀ)` with `κ = 1` for the
/// squared loss and `κ = 1/4` for the logistic loss.
pub fn smoothness_constants(ds: &Dataset, loss: LossKind) -> Result<Smoothness, ProblemError> {
    let kappa = loss.curvature();
    let w = ds.features();
    let per_sample: DenseVector = (0..w.rows()).map(|i| kappa * w.row_norm_sq(i)).collect();
    let lq = per_sample.iter().copied().fold(0.0, f64::max);
    let lf = kappa * averaged_gram_norm(ds)?;
    Ok(Smoothness { per_sample, lq, lf })
}

/// `λ_max((1/n) Σ w_i w_iᵀ)`, the smoothness constant of the averaged
/// squared loss.
pub fn averaged_gram_norm(ds: &Dataset) -> Result<f64, ProblemError> {
    let n = ds.n_samples() as f64;
    Ok(linalg::spectral_norm_sq(ds.features(), LF_TOL, LF_MAX_ITERS)? / n)
}

/// Arguments of the primal-dual gap function: candidate `w̄` and reference `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct GapArguments {
    pub x_bar: DenseVector,
    pub y_bar: DenseVector,
    pub lambda_bar: DenseVector,
    pub x: DenseVector,
    pub y: DenseVector,
    pub lambda: DenseVector,
}

/// A constrained ERM instance. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Problem {
    dataset: Dataset,
    loss: LossKind,
    a: SparseMatrix,
    b: SparseMatrix,
    c: DenseVector,
    nu: f64,
    smoothness: Smoothness,
    b_is_neg_identity: bool,
}

impl Problem {
    pub fn new(
        dataset: Dataset,
        loss: LossKind,
        a: SparseMatrix,
        b: SparseMatrix,
        c: DenseVector,
        nu: f64,
    ) -> Result<Self, ProblemError> {
        if !(nu >= 0.0 && nu.is_finite()) {
            return Err(ProblemError::InvalidArgument(format!("regularization weight must be >= 0, got {nu}")));
        }
        let d = dataset.n_features();
        if a.cols() != d {
            return Err(ProblemError::Dimension { what: "A columns", expected: d, found: a.cols() });
        }
        if b.rows() != a.rows() {
            return Err(ProblemError::Dimension { what: "B rows", expected: a.rows(), found: b.rows() });
        }
        if c.len() != a.rows() {
            return Err(ProblemError::Dimension { what: "c", expected: a.rows(), found: c.len() });
        }
        if !c.is_finite() {
            return Err(ProblemError::InvalidArgument("c must be finite".into()));
        }
        if loss == LossKind::Logistic {
            if let Some(i) = dataset.labels().iter().position(|&b| b != 1.0 && b != -1.0) {
                return Err(ProblemError::InvalidLabel { index: i, value: dataset.labels()[i] });
            }
        }
        let smoothness = smoothness_constants(&dataset, loss)?;
        let b_is_neg_identity = b.is_negative_identity();
        Ok(Self { dataset, loss, a, b, c, nu, smoothness, b_is_neg_identity })
    }

    /// Generalized lasso `min f(x) + ν‖F x‖₁` written as `F x − y = 0`.
    pub fn generalized_lasso(
        dataset: Dataset,
        loss: LossKind,
        penalty: SparseMatrix,
        nu: f64,
    ) -> Result<Self, ProblemError> {
        let m = penalty.rows();
        Self::new(dataset, loss, penalty, SparseMatrix::scaled_identity(m, -1.0), DenseVector::zeros(m), nu)
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn a(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn b(&self) -> &SparseMatrix {
        &self.b
    }

    pub fn c(&self) -> &DenseVector {
        &self.c
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn smoothness(&self) -> &Smoothness {
        &self.smoothness
    }

    pub fn lq(&self) -> f64 {
        self.smoothness.lq
    }

    pub fn lf(&self) -> f64 {
        self.smoothness.lf
    }

    pub fn n_samples(&self) -> usize {
        self.dataset.n_samples()
    }

    /// Dimension of `x`.
    pub fn x_dim(&self) -> usize {
        self.dataset.n_features()
    }

    /// Dimension of `y`.
    pub fn y_dim(&self) -> usize {
        self.b.cols()
    }

    /// Number of constraint rows.
    pub fn constraint_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn b_is_negative_identity(&self) -> bool {
        self.b_is_neg_identity
    }

    fn check_x(&self, x: &[f64]) -> Result<(), ProblemError> {
        if x.len() != self.x_dim() {
            return Err(ProblemError::Dimension { what: "x", expected: self.x_dim(), found: x.len() });
        }
        Ok(())
    }

    fn check_y(&self, y: &[f64]) -> Result<(), ProblemError> {
        if y.len() != self.y_dim() {
            return Err(ProblemError::Dimension { what: "y", expected: self.y_dim(), found: y.len() });
        }
        Ok(())
    }

    fn check_lambda(&self, l: &[f64]) -> Result<(), ProblemError> {
        if l.len() != self.constraint_dim() {
            return Err(ProblemError::Dimension {
                what: "lambda",
                expected: self.constraint_dim(),
                found: l.len(),
            });
        }
        Ok(())
    }

    /// `f_i(x)`
    pub fn component_loss(&self, i: usize, x: &[f64]) -> f64 {
        let t = self.dataset.features.row_dot(i, x);
        self.loss.value(t, self.dataset.labels[i])
    }

    /// `∇f_i(x)`
    pub fn component_gradient(&self, i: usize, x: &[f64]) -> Result<DenseVector, ProblemError> {
        let n = self.n_samples();
        if i >= n {
            return Err(ProblemError::SampleOutOfRange { index: i, n });
        }
        self.check_x(x)?;
        let mut g = DenseVector::zeros(self.x_dim());
        self.add_component_gradient(i, x, 1.0, &mut g);
        Ok(g)
    }

    /// `out += scale · ∇f_i(x)`, touching only the support of `w_i`.
    pub fn add_component_gradient(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        let w = &self.dataset.features;
        let coeff = self.loss.derivative(w.row_dot(i, x), self.dataset.labels[i]);
        let (idx, val) = w.row(i);
        if scale == 1.0 {
            for (&j, &v) in idx.iter().zip(val) {
                out[j] += coeff * v;
            }
        } else {
            for (&j, &v) in idx.iter().zip(val) {
                out[j] += scale * (coeff * v);
            }
        }
    }

    /// `∇f(x) = (1/n) Σ ∇f_i(x)`, summed in sample order then divided by `n`.
    pub fn full_gradient(&self, x: &[f64]) -> Result<DenseVector, ProblemError> {
        self.check_x(x)?;
        let mut g = DenseVector::zeros(self.x_dim());
        for i in 0..self.n_samples() {
            self.add_component_gradient(i, x, 1.0, &mut g);
        }
        let n = self.n_samples() as f64;
        g.iter_mut().for_each(|v| *v /= n);
        Ok(g)
    }

    /// `f(x) = (1/n) Σ f_i(x)`
    pub fn loss_value(&self, x: &[f64]) -> Result<f64, ProblemError> {
        self.check_x(x)?;
        let total: f64 = (0..self.n_samples()).map(|i| self.component_loss(i, x)).sum();
        Ok(total / self.n_samples() as f64)
    }

    /// `g(y) = ν‖y‖₁`
    pub fn regularizer(&self, y: &[f64]) -> f64 {
        self.nu * y.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// `f(x) + g(y)`
    pub fn objective(&self, x: &[f64], y: &[f64]) -> Result<f64, ProblemError> {
        self.check_y(y)?;
        Ok(self.loss_value(x)? + self.regularizer(y))
    }

    /// `Ax + By − c`
    pub fn constraint_residual(&self, x: &[f64], y: &[f64]) -> Result<DenseVector, ProblemError> {
        self.check_x(x)?;
        self.check_y(y)?;
        let mut r = self.a.matvec(x)?;
        let by = self.b.matvec(y)?;
        for ((ri, bi), ci) in r.iter_mut().zip(by.iter()).zip(self.c.iter()) {
            *ri = *ri + bi - ci;
        }
        Ok(r)
    }

    /// `‖Ax + By − c‖₂`
    pub fn constraint_violation(&self, x: &[f64], y: &[f64]) -> Result<f64, ProblemError> {
        Ok(self.constraint_residual(x, y)?.norm())
    }

    /// Objective at the feasible completion of `x`: for `B = −I` this is
    /// `f(x) + ν‖Ax − c‖₁`, the value of the unconstrained generalized lasso.
    pub fn feasible_objective(&self, x: &[f64]) -> Result<f64, ProblemError> {
        if !self.b_is_neg_identity {
            return Err(ProblemError::InvalidArgument(
                "feasible objective requires B = -I".into(),
            ));
        }
        let mut ax = self.a.matvec(x)?;
        for (v, ci) in ax.iter_mut().zip(self.c.iter()) {
            *v -= ci;
        }
        Ok(self.loss_value(x)? + self.regularizer(&ax))
    }

    /// Gap function
    /// `Q(w̄; w) = [f(x)+g(y)+⟨λ̄, Ax+By−c⟩] − [f(x̄)+g(ȳ)+⟨λ, Ax̄+Bȳ−c⟩]`.
    pub fn gap(&self, args: &GapArguments) -> Result<f64, ProblemError> {
        self.check_lambda(&args.lambda)?;
        self.check_lambda(&args.lambda_bar)?;
        let first = self.objective(&args.x, &args.y)?
            + dot(&args.lambda_bar, &self.constraint_residual(&args.x, &args.y)?);
        let second = self.objective(&args.x_bar, &args.y_bar)?
            + dot(&args.lambda, &self.constraint_residual(&args.x_bar, &args.y_bar)?);
        Ok(first - second)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(rows: &[Vec<f64>], labels: &[f64]) -> Dataset {
        Dataset::new(SparseMatrix::from_dense(rows).unwrap(), labels.to_vec().into()).unwrap()
    }

    fn lasso(ds: Dataset, loss: LossKind, nu: f64) -> Problem {
        let d = ds.n_features();
        Problem::generalized_lasso(ds, loss, SparseMatrix::identity(d), nu).unwrap()
    }

    #[test]
    fn squared_component_gradient_hand_value() {
        let p = lasso(dataset(&[vec![1.0, 0.0]], &[0.0]), LossKind::Squared, 0.0);
        let g = p.component_gradient(0, &[2.0, 5.0]).unwrap();
        assert_eq!(g.as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn logistic_gradient_saturates() {
        let p = lasso(dataset(&[vec![1.0, 2.0]], &[1.0]), LossKind::Logistic, 0.0);
        let g = p.component_gradient(0, &[400.0, 400.0]).unwrap();
        assert!(g.norm() < 1e-300);
        // large negative margin: loss grows linearly without overflow
        let v = p.component_loss(0, &[-400.0, -400.0]);
        assert!((v - 1200.0).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_sample() {
        let p = lasso(dataset(&[vec![1.0]], &[1.0]), LossKind::Squared, 0.0);
        assert!(matches!(p.component_gradient(1, &[0.0]), Err(ProblemError::SampleOutOfRange { .. })));
    }

    #[test]
    fn full_gradient_single_sample_equals_component() {
        let p = lasso(dataset(&[vec![1.5, -2.0]], &[1.0]), LossKind::Logistic, 0.0);
        let x = [0.3, 0.7];
        assert_eq!(p.full_gradient(&x).unwrap(), p.component_gradient(0, &x).unwrap());
    }

    #[test]
    fn full_gradient_zero_for_zero_labels() {
        let p = lasso(dataset(&[vec![1.0, 2.0], vec![3.0, 4.0]], &[0.0, 0.0]), LossKind::Squared, 0.0);
        assert_eq!(p.full_gradient(&[0.0, 0.0]).unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn smoothness_rank_one() {
        let s = smoothness_constants(&dataset(&[vec![3.0, 4.0]], &[1.0]), LossKind::Squared).unwrap();
        assert_eq!(s.per_sample.as_slice(), &[25.0]);
        assert_eq!(s.lq, 25.0);
        assert!((s.lf - 25.0).abs() < 25.0 * 1e-10);
    }

    #[test]
    fn smoothness_orthonormal_pair() {
        // (1/2)(e1 e1ᵀ + e2 e2ᵀ) = I/2
        let s = smoothness_constants(&dataset(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0]), LossKind::Squared)
            .unwrap();
        assert_eq!(s.lq, 1.0);
        assert!((s.lf - 0.5).abs() < 1e-10);
        let s = smoothness_constants(&dataset(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0]), LossKind::Logistic)
            .unwrap();
        assert_eq!(s.lq, 0.25);
        assert!((s.lf - 0.125).abs() < 1e-10);
    }

    #[test]
    fn objective_at_origin() {
        let rows = vec![vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.3, 0.1], vec![2.0, 2.0]];
        let labels = [1.0, -1.0, 1.0, -1.0];
        let p = lasso(dataset(&rows, &labels), LossKind::Logistic, 0.1);
        let v = p.objective(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        let p = lasso(dataset(&rows, &labels), LossKind::Squared, 0.1);
        assert_eq!(p.objective(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn objective_interpolation_is_zero() {
        let p = lasso(dataset(&[vec![1.0, 0.0], vec![0.0, 2.0]], &[3.0, 4.0]), LossKind::Squared, 0.0);
        assert_eq!(p.objective(&[3.0, 2.0], &[5.0, 5.0]).unwrap(), 0.0);
    }

    #[test]
    fn constraint_violation_cases() {
        let p = lasso(dataset(&[vec![1.0, 0.0]], &[1.0]), LossKind::Squared, 0.0);
        assert_eq!(p.constraint_violation(&[0.4, -1.0], &[0.4, -1.0]).unwrap(), 0.0);
        assert_eq!(p.constraint_violation(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(p.constraint_violation(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn logistic_rejects_non_binary_labels() {
        let ds = dataset(&[vec![1.0]], &[2.0]);
        let err = Problem::generalized_lasso(ds, LossKind::Logistic, SparseMatrix::identity(1), 0.1).unwrap_err();
        assert!(matches!(err, ProblemError::InvalidLabel { index: 0, .. }));
    }

    #[test]
    fn gap_identical_points_is_zero() {
        let p = lasso(dataset(&[vec![1.0, 2.0], vec![0.5, -1.0]], &[1.0, -1.0]), LossKind::Logistic, 0.3);
        let w = (DenseVector::from([0.1, 0.2]), DenseVector::from([0.5, -0.2]), DenseVector::from([1.0, 2.0]));
        let args = GapArguments {
            x_bar: w.0.clone(),
            y_bar: w.1.clone(),
            lambda_bar: w.2.clone(),
            x: w.0,
            y: w.1,
            lambda: w.2,
        };
        assert_eq!(p.gap(&args).unwrap(), 0.0);
    }

    #[test]
    fn gap_feasible_same_multiplier_is_objective_difference() {
        let p = lasso(dataset(&[vec![1.0, 2.0], vec![0.5, -1.0]], &[1.0, -1.0]), LossKind::Logistic, 0.3);
        let lam = DenseVector::from([0.7, -0.4]);
        let args = GapArguments {
            x_bar: [0.1, 0.2].into(),
            y_bar: [0.1, 0.2].into(),
            lambda_bar: lam.clone(),
            x: [-0.5, 0.3].into(),
            y: [-0.5, 0.3].into(),
            lambda: lam,
        };
        let expected = p.objective(&args.x, &args.y).unwrap() - p.objective(&args.x_bar, &args.y_bar).unwrap();
        assert!((p.gap(&args).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn dimension_checks() {
        let ds = dataset(&[vec![1.0, 2.0]], &[1.0]);
        let err = Problem::new(
            ds,
            LossKind::Squared,
            SparseMatrix::identity(3),
            SparseMatrix::identity(3),
            DenseVector::zeros(3),
            0.0,
        )
        .unwrap_err();
        assert!(matches!(err, ProblemError::Dimension { what: "A columns", .. }));
    }
}
