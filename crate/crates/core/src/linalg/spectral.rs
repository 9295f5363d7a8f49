use super::vector::{norm, norm_sq};
use super::{LinalgError, SparseMatrix};

pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-6;
pub const DEFAULT_SPECTRAL_MAX_ITERS: usize = 10_000;

/// Estimates `λ_max(MᵀM) = ‖M‖₂²` by power iteration on `MᵀM`.
///
/// The iteration starts from a fixed pseudo-random vector (hashed from the
/// coordinate index), so the result is a deterministic function of `M` while
/// structured starts such as the all-ones vector, an eigenvector of every
/// incidence-plus-identity penalty, are avoided. Each iterate's Rayleigh
/// quotient `‖M v‖²` is a lower bound on the true value. Iteration stops once the
/// extrapolated remaining error (Aitken estimate from the last two quotient
/// increments) drops below `tol` relative.
///
/// If that start is annihilated by `MᵀM` the all-ones start is tried, then
/// every coordinate vector.
pub fn spectral_norm_sq(m: &SparseMatrix, tol: f64, max_iters: usize) -> Result<f64, LinalgError> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(LinalgError::InvalidArgument("spectral_norm_sq needs a nonempty matrix".into()));
    }
    if !(tol > 0.0) {
        return Err(LinalgError::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if m.nnz() == 0 {
        return Ok(0.0);
    }
    let d = m.cols();
    let starts: [fn(usize) -> f64; 2] = [hashed_start, |_| 1.0];
    for start in &starts {
        let mut v: Vec<f64> = (0..d).map(start).collect();
        match power_iterate(m, &mut v, tol, max_iters)? {
            Some(q) => return Ok(q),
            None => continue,
        }
    }
    // Both starts were annihilated; fall back to a column sweep.
    let mut best: f64 = 0.0;
    for j in 0..d {
        let mut v = vec![0.0; d];
        v[j] = 1.0;
        if let Some(q) = power_iterate(m, &mut v, tol, max_iters)? {
            best = best.max(q);
        }
    }
    Ok(best)
}

/// Entry in `±[0.5, 1.5)` with sign and magnitude from a SplitMix64 hash of `j`.
fn hashed_start(j: usize) -> f64 {
    let mut z = (j as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    let magnitude = 0.5 + (z >> 11) as f64 / (1u64 << 53) as f64;
    if z & 1 == 0 {
        magnitude
    } else {
        -magnitude
    }
}

/// Returns `Ok(None)` when the start vector lies in the null space.
fn power_iterate(
    m: &SparseMatrix,
    v: &mut Vec<f64>,
    tol: f64,
    max_iters: usize,
) -> Result<Option<f64>, LinalgError> {
    let mut mv = vec![0.0; m.rows()];
    let mut w = vec![0.0; m.cols()];
    let nv = norm(v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut prev_q = f64::NAN;
    let mut prev_delta = f64::NAN;
    for _ in 0..max_iters {
        m.matvec_into(v, &mut mv);
        let q = norm_sq(&mv);
        if q == 0.0 {
            return Ok(if prev_q.is_nan() { None } else { Some(prev_q) });
        }
        if !prev_q.is_nan() {
            let delta = (q - prev_q).abs();
            if delta == 0.0 {
                return Ok(Some(q));
            }
            let mut remaining = delta;
            if prev_delta.is_finite() && prev_delta > 0.0 {
                let ratio = delta / prev_delta;
                if ratio < 1.0 {
                    remaining = delta * ratio / (1.0 - ratio);
                }
                if remaining.max(delta) <= tol * q {
                    return Ok(Some(q));
                }
            }
            prev_delta = delta;
        }
        prev_q = q;
        m.matvec_transpose_into(&mv, &mut w);
        let nw = norm(&w);
        if nw == 0.0 {
            return Ok(Some(q));
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
    }
    Err(LinalgError::NoConvergence { iters: max_iters, last: prev_q, previous: prev_q - prev_delta })
}
