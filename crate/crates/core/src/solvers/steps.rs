//! Single sub-updates shared by every solver.

use crate::linalg::{solve_spd, DenseVector, SpdFactorization};
use crate::problem::Problem;

use super::SolverError;

/// Primal-dual iterate `(x, y, λ)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Iterates {
    pub x: DenseVector,
    pub y: DenseVector,
    pub lambda: DenseVector,
}

impl Iterates {
    pub fn zeros(p: &Problem) -> Self {
        Self {
            x: DenseVector::zeros(p.x_dim()),
            y: DenseVector::zeros(p.y_dim()),
            lambda: DenseVector::zeros(p.constraint_dim()),
        }
    }
}

/// Variance-reduced gradient `∇f_i(x_md) − ∇f_i(x̃) + ṽ`.
///
/// Exact whenever the two component gradients coincide, and returns
/// `∇f_i(x_md)` exactly when `ṽ` equals `∇f_i(x̃)` coordinate-wise.
pub fn svrg_gradient(
    p: &Problem,
    i: usize,
    x_md: &[f64],
    x_snap: &[f64],
    v_snap: &[f64],
) -> DenseVector {
    let w = p.dataset().features();
    let label = p.dataset().labels()[i];
    let loss = p.loss();
    let coeff_md = loss.derivative(w.row_dot(i, x_md), label);
    let coeff_snap = loss.derivative(w.row_dot(i, x_snap), label);
    let mut v = DenseVector::from(v_snap);
    let (idx, val) = w.row(i);
    for (&j, &wij) in idx.iter().zip(val) {
        let g_md = coeff_md * wij;
        let g_snap = coeff_snap * wij;
        v[j] = if v_snap[j] == g_snap { g_md } else { (g_md - g_snap) + v_snap[j] };
    }
    v
}

/// Coordinate-wise `sign(v)·max(|v| − τ, 0)`.
pub fn soft_threshold(v: &[f64], tau: f64) -> DenseVector {
    debug_assert!(tau >= 0.0);
    v.iter().map(|&vk| shrink(vk, tau)).collect()
}

fn shrink(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// Linearized x-update:
/// `x − (1/η)(Aᵀλ + v + θAᵀ(Ax + By − c))`.
pub fn x_update_linearized(
    p: &Problem,
    it: &Iterates,
    v: &[f64],
    theta: f64,
    eta: f64,
) -> Result<DenseVector, SolverError> {
    let r = p.constraint_residual(&it.x, &it.y)?;
    let mut u = it.lambda.clone();
    for (ui, ri) in u.iter_mut().zip(r.iter()) {
        *ui += theta * ri;
    }
    let at_u = p.a().matvec_transpose(&u)?;
    Ok(it
        .x
        .iter()
        .zip(at_u.iter())
        .zip(v)
        .map(|((xj, gj), vj)| xj - (gj + vj) / eta)
        .collect())
}

/// Right-hand side `ηx − v − Aᵀλ − θAᵀ(By − c)` of the exact x-update.
pub fn exact_rhs(p: &Problem, it: &Iterates, v: &[f64], theta: f64, eta: f64) -> Result<DenseVector, SolverError> {
    let mut u = p.b().matvec(&it.y)?;
    for ((ui, ci), li) in u.iter_mut().zip(p.c().iter()).zip(it.lambda.iter()) {
        *ui = li + theta * (*ui - ci);
    }
    let at_u = p.a().matvec_transpose(&u)?;
    Ok(it
        .x
        .iter()
        .zip(at_u.iter())
        .zip(v)
        .map(|((xj, gj), vj)| eta * xj - vj - gj)
        .collect())
}

/// Exact x-update `(ηI + θAᵀA)⁻¹ rhs`, realized as `α⁻¹ · solve(L̄I + β₁AᵀA, rhs)`
/// where the schedule satisfies `η = L̄α`, `θ = β₁α`.
pub fn x_update_exact(
    p: &Problem,
    it: &Iterates,
    v: &[f64],
    theta: f64,
    eta: f64,
    factor: &SpdFactorization,
) -> Result<DenseVector, SolverError> {
    let alpha = eta / factor.lbar();
    let consistent = (theta - factor.beta1() * alpha).abs() <= 1e-12 * theta.abs().max(factor.beta1() * alpha);
    if !consistent {
        return Err(SolverError::InvalidConfig(format!(
            "exact x-update needs (eta, theta) proportional to the factored (lbar, beta1): \
             eta={eta}, theta={theta}, lbar={}, beta1={}",
            factor.lbar(),
            factor.beta1()
        )));
    }
    let rhs = exact_rhs(p, it, v, theta, eta)?;
    let mut x = solve_spd(factor, &rhs)?;
    x.iter_mut().for_each(|xj| *xj /= alpha);
    Ok(x)
}

/// y-update for `B = −I`, `g = ν‖·‖₁`:
/// `soft_threshold(Ax − c + λ/θ, ν/θ)`.
pub fn y_update(p: &Problem, x_new: &[f64], lambda_prev: &[f64], theta: f64) -> Result<DenseVector, SolverError> {
    if !p.b_is_negative_identity() {
        return Err(SolverError::Unsupported(
            "closed-form y-update requires B = -I with an l1 regularizer",
        ));
    }
    if !(theta > 0.0) {
        return Err(SolverError::InvalidConfig(format!("theta must be positive, got {theta}")));
    }
    let ax = p.a().matvec(x_new)?;
    let tau = p.nu() / theta;
    Ok(ax
        .iter()
        .zip(p.c().iter())
        .zip(lambda_prev)
        .map(|((axi, ci), li)| shrink(axi - ci + li / theta, tau))
        .collect())
}

/// Dual ascent `λ + ρ(Ax + By − c)`.
pub fn lambda_update(
    p: &Problem,
    x_new: &[f64],
    y_new: &[f64],
    lambda_prev: &[f64],
    rho: f64,
) -> Result<DenseVector, SolverError> {
    let r = p.constraint_residual(x_new, y_new)?;
    Ok(lambda_prev.iter().zip(r.iter()).map(|(l, ri)| l + rho * ri).collect())
}

/// Which x-update a run uses; the exact variant owns its cached factor.
#[derive(Debug, Clone)]
pub enum XSolver {
    Linearized,
    Exact(SpdFactorization),
}

impl XSolver {
    pub fn chi(&self) -> super::Chi {
        match self {
            XSolver::Linearized => super::Chi::Linearized,
            XSolver::Exact(_) => super::Chi::Exact,
        }
    }

    pub fn update(&self, p: &Problem, it: &Iterates, v: &[f64], theta: f64, eta: f64) -> Result<DenseVector, SolverError> {
        match self {
            XSolver::Linearized => x_update_linearized(p, it, v, theta, eta),
            XSolver::Exact(f) => x_update_exact(p, it, v, theta, eta, f),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{factor_spd, SparseMatrix};
    use crate::problem::{Dataset, LossKind};

    fn problem(loss: LossKind, nu: f64, penalty: SparseMatrix) -> Problem {
        let rows = vec![vec![1.0, 0.5, 0.0], vec![-0.3, 1.0, 2.0], vec![0.0, 0.0, 1.0], vec![1.0, 1.0, 1.0]];
        let labels = vec![1.0, -1.0, 1.0, -1.0];
        let ds = Dataset::new(SparseMatrix::from_dense(&rows).unwrap(), labels.into()).unwrap();
        Problem::generalized_lasso(ds, loss, penalty, nu).unwrap()
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(&[2.0, -0.5, 0.0], 1.0).as_slice(), &[1.0, 0.0, 0.0]);
        assert_eq!(soft_threshold(&[2.0, -0.5, 0.0], 0.0).as_slice(), &[2.0, -0.5, 0.0]);
        assert_eq!(soft_threshold(&[-3.0], 1.0).as_slice(), &[-2.0]);
    }

    #[test]
    fn svrg_gradient_at_snapshot_returns_snapshot_gradient() {
        let p = problem(LossKind::Logistic, 0.1, SparseMatrix::identity(3));
        let x = [0.2, -0.4, 0.9];
        let v_snap = p.full_gradient(&x).unwrap();
        for i in 0..p.n_samples() {
            assert_eq!(svrg_gradient(&p, i, &x, &x, &v_snap), v_snap);
        }
    }

    #[test]
    fn svrg_gradient_single_sample_is_exact() {
        let rows = vec![vec![1.0, 0.5, -2.0]];
        let ds = Dataset::new(SparseMatrix::from_dense(&rows).unwrap(), vec![1.0].into()).unwrap();
        let p = Problem::generalized_lasso(ds, LossKind::Logistic, SparseMatrix::identity(3), 0.1).unwrap();
        let (x_md, x_snap) = ([0.3, 0.1, -0.2], [-1.0, 2.0, 0.5]);
        let v_snap = p.full_gradient(&x_snap).unwrap();
        let v = svrg_gradient(&p, 0, &x_md, &x_snap, &v_snap);
        assert_eq!(v, p.component_gradient(0, &x_md).unwrap());
    }

    #[test]
    fn linearized_x_unchanged_at_stationary_feasible_point() {
        let p = problem(LossKind::Squared, 0.1, SparseMatrix::identity(3));
        let it = Iterates { x: [1.0, 2.0, 3.0].into(), y: [1.0, 2.0, 3.0].into(), lambda: DenseVector::zeros(3) };
        let x = x_update_linearized(&p, &it, &[0.0; 3], 2.0, 5.0).unwrap();
        assert_eq!(x, it.x);
    }

    #[test]
    fn linearized_reduces_to_gradient_step_without_constraints() {
        let p = problem(LossKind::Squared, 0.1, SparseMatrix::zeros(3, 3));
        let it = Iterates { x: [1.0, 2.0, 3.0].into(), y: [0.5, 0.5, 0.5].into(), lambda: [1.0, 1.0, 1.0].into() };
        let v = [1.0, -2.0, 4.0];
        let x = x_update_linearized(&p, &it, &v, 3.0, 2.0).unwrap();
        assert_eq!(x.as_slice(), &[0.5, 3.0, 1.0]);
    }

    #[test]
    fn exact_reduces_to_gradient_step_without_constraints() {
        let p = problem(LossKind::Squared, 0.1, SparseMatrix::zeros(3, 3));
        let it = Iterates { x: [1.0, 2.0, 3.0].into(), y: [0.5, 0.5, 0.5].into(), lambda: [1.0, 1.0, 1.0].into() };
        let v = [1.0, -2.0, 4.0];
        // η = L̄·α with L̄ = 4, α = 0.5 → η = 2, θ = β₁α = 3 with β₁ = 6
        let f = factor_spd(p.a(), 4.0, 6.0).unwrap();
        let x = x_update_exact(&p, &it, &v, 3.0, 2.0, &f).unwrap();
        for (a, b) in x.iter().zip([0.5, 3.0, 1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_rejects_inconsistent_schedule() {
        let p = problem(LossKind::Squared, 0.1, SparseMatrix::identity(3));
        let it = Iterates::zeros(&p);
        let f = factor_spd(p.a(), 4.0, 6.0).unwrap();
        assert!(x_update_exact(&p, &it, &[0.0; 3], 1.0, 2.0, &f).is_err());
    }

    #[test]
    fn y_update_without_shrinkage() {
        let p = problem(LossKind::Squared, 0.0, SparseMatrix::identity(3));
        let y = y_update(&p, &[1.0, -2.0, 0.5], &[2.0, 0.0, -1.0], 4.0).unwrap();
        assert_eq!(y.as_slice(), &[1.5, -2.0, 0.25]);
    }

    #[test]
    fn y_update_dead_zone() {
        let p = problem(LossKind::Squared, 1.0, SparseMatrix::identity(3));
        // ν/θ = 0.5, inputs of magnitude < 0.5 vanish
        let y = y_update(&p, &[0.4, -0.49, 2.0], &[0.0; 3], 2.0).unwrap();
        assert_eq!(y.as_slice(), &[0.0, 0.0, 1.5]);
    }

    #[test]
    fn y_update_requires_negative_identity() {
        let rows = vec![vec![1.0]];
        let ds = Dataset::new(SparseMatrix::from_dense(&rows).unwrap(), vec![1.0].into()).unwrap();
        let p = Problem::new(ds, LossKind::Squared, SparseMatrix::identity(1), SparseMatrix::identity(1), DenseVector::zeros(1), 0.1)
            .unwrap();
        assert!(matches!(y_update(&p, &[1.0], &[0.0], 1.0), Err(SolverError::Unsupported(_))));
    }

    #[test]
    fn lambda_update_cases() {
        let p = problem(LossKind::Squared, 0.1, SparseMatrix::identity(3));
        let lam = [0.3, -0.2, 1.0];
        assert_eq!(lambda_update(&p, &[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &lam, 5.0).unwrap().as_slice(), &lam);
        assert_eq!(lambda_update(&p, &[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0], &lam, 0.0).unwrap().as_slice(), &lam);
        let out = lambda_update(&p, &[1.0, 2.0, 3.0], &[0.0, 1.0, 5.0], &lam, 0.5).unwrap();
        for (a, b) in out.iter().zip([0.8, 0.3, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
