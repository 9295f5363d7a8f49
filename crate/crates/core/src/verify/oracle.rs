//! Straight-line dense transcription of the accelerated algorithm, written
//! without any of the solver abstractions. Used to cross-check the engine.

use crate::problem::{LossKind, Problem};

/// Everything the transcription keeps after one outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleStage {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub lambda: Vec<f64>,
    pub x_ag: Vec<f64>,
    pub y_ag: Vec<f64>,
    pub lambda_ag: Vec<f64>,
    pub x_snap: Vec<f64>,
    pub y_snap: Vec<f64>,
    pub lambda_snap: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub stages: Vec<OracleStage>,
    pub x_hat: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub lambda_hat: Vec<f64>,
}

/// Inputs of the transcription. Smoothness and `‖A‖₂²` are supplied so that
/// both sides share the same constants.
#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    pub outer_iters: usize,
    pub inner_iters: usize,
    /// 1 for the linearized x-update, 0 for the exact one.
    pub chi: u8,
    pub lq: f64,
    pub lf: f64,
    pub a_norm_sq: f64,
}

fn dense(p: &Problem) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    (p.dataset().features().to_dense(), p.a().to_dense(), p.b().to_dense())
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn mat_t_vec(m: &[Vec<f64>], v: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for (row, vi) in m.iter().zip(v) {
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * vi;
        }
    }
    out
}

fn grad_i(loss: LossKind, w: &[f64], b: f64, x: &[f64]) -> Vec<f64> {
    let t: f64 = w.iter().zip(x).map(|(a, c)| a * c).sum();
    let coeff = match loss {
        LossKind::Squared => t - b,
        LossKind::Logistic => -b / (1.0 + (b * t).exp()),
    };
    w.iter().map(|a| coeff * a).collect()
}

/// Gaussian elimination with partial pivoting on a dense copy.
fn dense_solve(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Vec<f64> {
    let d = rhs.len();
    for k in 0..d {
        let piv = (k..d).max_by(|&a, &b| m[a][k].abs().total_cmp(&m[b][k].abs())).unwrap();
        m.swap(k, piv);
        rhs.swap(k, piv);
        for r in (k + 1)..d {
            let f = m[r][k] / m[k][k];
            for c in k..d {
                m[r][c] -= f * m[k][c];
            }
            rhs[r] -= f * rhs[k];
        }
    }
    let mut x = vec![0.0; d];
    for k in (0..d).rev() {
        let s: f64 = ((k + 1)..d).map(|c| m[k][c] * x[c]).sum();
        x[k] = (rhs[k] - s) / m[k][k];
    }
    x
}

fn soft(v: f64, tau: f64) -> f64 {
    v.signum() * (v.abs() - tau).max(0.0)
}

/// Runs the accelerated algorithm for `B = −I` from `x = 0, y = −c, λ = 0`,
/// drawing sample indices from `sample`.
pub fn transcribe(p: &Problem, cfg: OracleConfig, mut sample: impl FnMut() -> usize) -> OracleRun {
    let (w, a, b) = dense(p);
    let labels = p.dataset().labels().to_vec();
    let c = p.c().to_vec();
    let (n, d, k) = (w.len(), p.x_dim(), c.len());
    let big_n = cfg.outer_iters as f64;
    let m = cfg.inner_iters;
    let chi = f64::from(cfg.chi);

    // Weight sequence for s = 1..=N+1.
    let mut weights = vec![(1.0 - 2.0 / 3.0 - 0.1, 2.0 / 3.0, 0.1)];
    for _ in 0..cfg.outer_iters {
        let (a1, a2, _): (f64, f64, f64) = *weights.last().unwrap();
        let a2n = ((a2 * a2 * a2 * a2 + 4.0 * a2 * a2).sqrt() - a2 * a2) / 2.0;
        weights.push((a1 * (1.0 - a2n), a2n, (1.0 - a1) * (1.0 - a2n)));
    }
    let lbar = cfg.lq / 0.1 + cfg.lf;

    let mut x = vec![0.0; d];
    let mut y: Vec<f64> = c.iter().map(|v| -v).collect();
    let mut lam = vec![0.0; k];
    let (mut x_ag, mut y_ag, mut lam_ag) = (x.clone(), y.clone(), lam.clone());
    let (mut xs, mut ys, mut ls) = (x.clone(), y.clone(), lam.clone());
    let mut stages = Vec::new();

    for s in 0..cfg.outer_iters {
        let (a1, a2, a3) = weights[s];
        let theta = big_n * a2;
        let rho = (1.0 / big_n) / a2;
        let eta = (lbar + chi * big_n * cfg.a_norm_sq) * a2;

        let mut v_snap = vec![0.0; d];
        for i in 0..n {
            for (acc, g) in v_snap.iter_mut().zip(grad_i(p.loss(), &w[i], labels[i], &xs)) {
                *acc += g;
            }
        }
        v_snap.iter_mut().for_each(|g| *g /= n as f64);

        let (mut sx, mut sy, mut sl) = (vec![0.0; d], vec![0.0; k], vec![0.0; k]);
        for _ in 0..m {
            let x_md: Vec<f64> = (0..d).map(|j| a1 * x_ag[j] + a2 * x[j] + a3 * xs[j]).collect();
            let i = sample();
            let g_md = grad_i(p.loss(), &w[i], labels[i], &x_md);
            let g_snap = grad_i(p.loss(), &w[i], labels[i], &xs);
            let v: Vec<f64> = (0..d).map(|j| g_md[j] - g_snap[j] + v_snap[j]).collect();

            let by = mat_vec(&b, &y);
            let at_lam = mat_t_vec(&a, &lam, d);
            let x_new = if cfg.chi == 1 {
                let ax = mat_vec(&a, &x);
                let r: Vec<f64> = (0..k).map(|q| ax[q] + by[q] - c[q]).collect();
                let at_r = mat_t_vec(&a, &r, d);
                (0..d).map(|j| x[j] - (at_lam[j] + v[j] + theta * at_r[j]) / eta).collect()
            } else {
                let r: Vec<f64> = (0..k).map(|q| by[q] - c[q]).collect();
                let at_r = mat_t_vec(&a, &r, d);
                let rhs: Vec<f64> = (0..d).map(|j| eta * x[j] - v[j] - at_lam[j] - theta * at_r[j]).collect();
                let mut lhs = vec![vec![0.0; d]; d];
                for (r1, row) in lhs.iter_mut().enumerate() {
                    for (r2, e) in row.iter_mut().enumerate() {
                        *e = theta * (0..k).map(|q| a[q][r1] * a[q][r2]).sum::<f64>();
                    }
                    row[r1] += eta;
                }
                dense_solve(lhs, rhs)
            };
            x = x_new;
            x_ag = (0..d).map(|j| a1 * x_ag[j] + a2 * x[j] + a3 * xs[j]).collect();

            let ax = mat_vec(&a, &x);
            y = (0..k).map(|q| soft(ax[q] - c[q] + lam[q] / theta, p.nu() / theta)).collect();
            y_ag = (0..k).map(|q| a1 * y_ag[q] + a2 * y[q] + a3 * ys[q]).collect();

            let by = mat_vec(&b, &y);
            lam = (0..k).map(|q| lam[q] + rho * (ax[q] + by[q] - c[q])).collect();
            lam_ag = (0..k).map(|q| a1 * lam_ag[q] + a2 * lam[q] + a3 * ls[q]).collect();

            (0..d).for_each(|j| sx[j] += x_ag[j]);
            (0..k).for_each(|q| {
                sy[q] += y_ag[q];
                sl[q] += lam_ag[q];
            });
        }
        xs = sx.iter().map(|v| v / m as f64).collect();
        ys = sy.iter().map(|v| v / m as f64).collect();
        ls = sl.iter().map(|v| v / m as f64).collect();
        stages.push(OracleStage {
            x: x.clone(),
            y: y.clone(),
            lambda: lam.clone(),
            x_ag: x_ag.clone(),
            y_ag: y_ag.clone(),
            lambda_ag: lam_ag.clone(),
            x_snap: xs.clone(),
            y_snap: ys.clone(),
            lambda_snap: ls.clone(),
        });
    }

    let a3 = weights[cfg.outer_iters].2;
    let wa = 1.0 / (1.0 + a3 * m as f64);
    let ws = a3 * m as f64 / (1.0 + a3 * m as f64);
    let mix = |ag: &[f64], sn: &[f64]| ag.iter().zip(sn).map(|(u, v)| wa * u + ws * v).collect::<Vec<f64>>();
    OracleRun { stages, x_hat: mix(&x_ag, &xs), y_hat: mix(&y_ag, &ys), lambda_hat: mix(&lam_ag, &ls) }
}
