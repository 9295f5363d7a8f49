use super::{DenseVector, LinalgError, SparseMatrix};

/// Largest dimension for which a dense factorization is attempted.
pub const DEFAULT_FACTOR_DIM_LIMIT: usize = 4096;

/// Cholesky factor of `lbar·I + beta1·AᵀA`.
///
/// The factor is built once per run; callers needing
/// `(η I + θ AᵀA)⁻¹ = α⁻¹ (lbar I + beta1 AᵀA)⁻¹` apply the `α⁻¹` scaling
/// themselves.
#[derive(Debug, Clone)]
pub struct SpdFactorization {
    dim: usize,
    lbar: f64,
    beta1: f64,
    // row-major lower triangle, full d×d storage
    lower: Vec<f64>,
}

impl SpdFactorization {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lbar(&self) -> f64 {
        self.lbar
    }

    pub fn beta1(&self) -> f64 {
        self.beta1
    }
}

/// Factors `lbar·I + beta1·AᵀA` using the default size limit.
pub fn factor_spd(a: &SparseMatrix, lbar: f64, beta1: f64) -> Result<SpdFactorization, LinalgError> {
    factor_spd_with_limit(a, lbar, beta1, DEFAULT_FACTOR_DIM_LIMIT)
}

pub fn factor_spd_with_limit(
    a: &SparseMatrix,
    lbar: f64,
    beta1: f64,
    dim_limit: usize,
) -> Result<SpdFactorization, LinalgError> {
    if !(lbar > 0.0 && lbar.is_finite()) || !(beta1 >= 0.0 && beta1.is_finite()) {
        return Err(LinalgError::InvalidArgument(format!(
            "factor_spd needs lbar > 0 and beta1 >= 0, got lbar={lbar}, beta1={beta1}"
        )));
    }
    let d = a.cols();
    if d > dim_limit {
        return Err(LinalgError::UnsupportedSize { dim: d, limit: dim_limit });
    }
    let mut k = a.gram_dense();
    for v in k.iter_mut() {
        *v *= beta1;
    }
    for i in 0..d {
        k[i * d + i] += lbar;
    }
    cholesky_in_place(&mut k, d)?;
    Ok(SpdFactorization { dim: d, lbar, beta1, lower: k })
}

/// In-place Cholesky: on success the lower triangle holds `L` with `K = L Lᵀ`.
fn cholesky_in_place(k: &mut [f64], d: usize) -> Result<(), LinalgError> {
    for j in 0..d {
        let mut diag = k[j * d + j];
        for p in 0..j {
            diag -= k[j * d + p] * k[j * d + p];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { pivot: j, value: diag });
        }
        let ljj = diag.sqrt();
        k[j * d + j] = ljj;
        for i in (j + 1)..d {
            let mut s = k[i * d + j];
            for p in 0..j {
                s -= k[i * d + p] * k[j * d + p];
            }
            k[i * d + j] = s / ljj;
        }
    }
    for i in 0..d {
        for j in (i + 1)..d {
            k[i * d + j] = 0.0;
        }
    }
    Ok(())
}

/// Solves `(lbar·I + beta1·AᵀA) x = b` with the cached factor.
pub fn solve_spd(f: &SpdFactorization, b: &[f64]) -> Result<DenseVector, LinalgError> {
    let d = f.dim;
    if b.len() != d {
        return Err(LinalgError::DimensionMismatch { op: "solve_spd", expected: d, found: b.len() });
    }
    let l = &f.lower;
    let mut z = b.to_vec();
    for i in 0..d {
        let mut s = z[i];
        for p in 0..i {
            s -= l[i * d + p] * z[p];
        }
        z[i] = s / l[i * d + i];
    }
    for i in (0..d).rev() {
        let mut s = z[i];
        for p in (i + 1)..d {
            s -= l[p * d + i] * z[p];
        }
        z[i] = s / l[i * d + i];
    }
    Ok(z.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix_halves() {
        let f = factor_spd(&SparseMatrix::zeros(3, 3), 2.0, 5.0).unwrap();
        let x = solve_spd(&f, &[2.0, -4.0, 1.0]).unwrap();
        for (got, want) in x.iter().zip([1.0, -2.0, 0.5]) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn identity_with_unit_weights_halves() {
        let f = factor_spd(&SparseMatrix::identity(2), 1.0, 1.0).unwrap();
        let x = solve_spd(&f, &[3.0, 8.0]).unwrap();
        assert!((x[0] - 1.5).abs() < 1e-15 && (x[1] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn two_by_two_matches_explicit_inverse() {
        // A = [[1,1],[0,1]], AᵀA = [[1,1],[1,2]], K = I + AᵀA = [[2,1],[1,3]]
        // K⁻¹ = (1/5)[[3,-1],[-1,2]], K⁻¹(1,1) = (2/5, 1/5)
        let a = SparseMatrix::from_dense(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let f = factor_spd(&a, 1.0, 1.0).unwrap();
        let x = solve_spd(&f, &[1.0, 1.0]).unwrap();
        assert!((x[0] - 0.4).abs() < 1e-10);
        assert!((x[1] - 0.2).abs() < 1e-10);
    }

    #[test]
    fn size_policy() {
        let a = SparseMatrix::identity(5);
        let err = factor_spd_with_limit(&a, 1.0, 1.0, 4).unwrap_err();
        assert!(matches!(err, LinalgError::UnsupportedSize { dim: 5, limit: 4 }));
    }

    #[test]
    fn rejects_bad_arguments() {
        let a = SparseMatrix::identity(2);
        assert!(factor_spd(&a, 0.0, 1.0).is_err());
        assert!(factor_spd(&a, 1.0, -1.0).is_err());
    }

    #[test]
    fn solve_dimension_mismatch() {
        let f = factor_spd(&SparseMatrix::identity(2), 1.0, 1.0).unwrap();
        assert!(solve_spd(&f, &[1.0]).is_err());
    }
}
