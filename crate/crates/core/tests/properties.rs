use asvrg_core::data_io::{build_penalty_matrix, parse_libsvm, read_cache, write_cache, write_libsvm, FeatureGraph, ParseOptions};
use asvrg_core::linalg::{factor_spd, solve_spd, spectral_norm_sq, SparseMatrix};
use asvrg_core::problem::{Dataset, LossKind, Problem};
use asvrg_core::solvers::{
    advance_weights, lambda_update, make_schedule_from_constants, soft_threshold, svrg_gradient, y_update, Chi,
    ScheduleConfig, Weights,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn dense_rows(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    let entry = prop_oneof![2 => Just(0.0), 3 => -3.0..3.0f64];
    prop::collection::vec(prop::collection::vec(entry, cols), rows)
}

fn to_nalgebra(rows: &[Vec<f64>], cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

/// Small instance with every sample non-empty and labels ±1.
fn instance(loss: LossKind) -> impl Strategy<Value = Problem> {
    (2usize..8, 2usize..5).prop_flat_map(move |(n, d)| {
        (dense_rows(n, d), prop::collection::vec(prop::bool::ANY, n), 0.0..0.5f64).prop_map(move |(mut rows, signs, nu)| {
            for (i, row) in rows.iter_mut().enumerate() {
                row[i % d] += 1.0;
            }
            let labels: Vec<f64> = signs.iter().map(|&s| if s { 1.0 } else { -1.0 }).collect();
            let ds = Dataset::new(SparseMatrix::from_dense(&rows).unwrap(), labels.into()).unwrap();
            Problem::generalized_lasso(ds, loss, SparseMatrix::identity(d), nu).unwrap()
        })
    })
}

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weight_recursion_stays_on_simplex_and_monotone(a2 in 0.05..0.95f64, frac in 0.01..0.99f64) {
        let a3 = (1.0 - a2) * frac;
        let w = Weights::initial(a2, a3);
        let next = advance_weights(w).unwrap();
        prop_assert!((next.sum() - 1.0).abs() <= 1e-12);
        prop_assert!(next.alpha1 > 0.0 && next.alpha1 < w.alpha1);
        prop_assert!(next.alpha2 > 0.0 && next.alpha2 < w.alpha2);
        prop_assert!(next.alpha3 > w.alpha3 && next.alpha3 < 1.0);
    }

    #[test]
    fn schedule_parameters_follow_their_formulas(
        n_outer in 1usize..60, lq in 0.1..100.0f64, ratio in 0.01..1.0f64, a_norm_sq in 0.0..10.0f64, exact in prop::bool::ANY,
    ) {
        let chi = if exact { Chi::Exact } else { Chi::Linearized };
        let lf = lq * ratio;
        let sched = make_schedule_from_constants(lq, lf, a_norm_sq, &ScheduleConfig::new(n_outer, 5, chi)).unwrap();
        let lbar = lq / 0.1 + lf;
        let big_n = n_outer as f64;
        for (k, st) in sched.stages.iter().enumerate() {
            let s = k + 1;
            let a2 = st.weights.alpha2;
            prop_assert!((st.weights.sum() - 1.0).abs() <= 1e-12);
            prop_assert!(a2 <= 2.0 / (s as f64 + 2.0) + 1e-12);
            prop_assert_eq!(st.theta, big_n * a2);
            prop_assert_eq!(st.rho, (1.0 / big_n) / a2);
            prop_assert!((st.eta - (lbar + chi.indicator() * big_n * a_norm_sq) * a2).abs() <= 1e-12 * st.eta);
        }
        prop_assert_eq!(sched.penalty_dominance_holds(), n_outer >= 3);
    }

    #[test]
    fn sparse_construction_invariants(triplets in prop::collection::vec((0usize..6, 0usize..5, -2.0..2.0f64), 0..40)) {
        let m = SparseMatrix::from_triplets(6, 5, triplets.clone()).unwrap();
        for i in 0..m.rows() {
            let (idx, val) = m.row(i);
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(val.iter().all(|v| *v != 0.0 && v.is_finite()));
        }
        let mut dense = vec![vec![0.0; 5]; 6];
        for (i, j, v) in triplets {
            dense[i][j] += v;
        }
        for (i, row) in dense.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                prop_assert_eq!(m.get(i, j), *v);
            }
        }
    }

    #[test]
    fn products_match_dense_oracle(rows in dense_rows(5, 4), v in point(4), u in point(5)) {
        let m = SparseMatrix::from_dense(&rows).unwrap();
        let oracle = to_nalgebra(&rows, 4);
        let mv = oracle.clone() * nalgebra::DVector::from_column_slice(&v);
        let mtu = oracle.transpose() * nalgebra::DVector::from_column_slice(&u);
        for (a, b) in m.matvec(&v).unwrap().iter().zip(mv.iter()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        for (a, b) in m.matvec_transpose(&u).unwrap().iter().zip(mtu.iter()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn spectral_norm_matches_eigendecomposition(rows in dense_rows(5, 4)) {
        let m = SparseMatrix::from_dense(&rows).unwrap();
        let oracle = to_nalgebra(&rows, 4);
        let gram = oracle.transpose() * oracle;
        let top = gram.symmetric_eigen().eigenvalues.iter().copied().fold(0.0, f64::max);
        let est = spectral_norm_sq(&m, 1e-12, 100_000).unwrap();
        prop_assert!((est - top).abs() <= 1e-6 * top.max(1.0), "{} vs {}", est, top);
    }

    #[test]
    fn spd_solve_residual(rows in dense_rows(4, 3), lbar in 0.1..10.0f64, beta1 in 0.0..10.0f64, b in point(3)) {
        let a = SparseMatrix::from_dense(&rows).unwrap();
        let f = factor_spd(&a, lbar, beta1).unwrap();
        let x = solve_spd(&f, &b).unwrap();
        let oracle = to_nalgebra(&rows, 3);
        let lhs = (DMatrix::identity(3, 3) * lbar + oracle.transpose() * oracle * beta1) * nalgebra::DVector::from_column_slice(&x);
        let res = (lhs - nalgebra::DVector::from_column_slice(&b)).norm();
        prop_assert!(res <= 1e-8 * nalgebra::DVector::from_column_slice(&b).norm().max(1e-300));
    }

    #[test]
    fn soft_threshold_matches_grid_prox(v in point(5), tau in 0.0..1.5f64) {
        let out = soft_threshold(&v, tau);
        for (vk, ok) in v.iter().zip(out.iter()) {
            // argmin_z ½(z − v)² + τ|z| on a 1e-4 grid
            let best = (-40_000..=40_000)
                .map(|k| k as f64 * 1e-4)
                .min_by(|a, b| {
                    let fa = 0.5 * (a - vk).powi(2) + tau * a.abs();
                    let fb = 0.5 * (b - vk).powi(2) + tau * b.abs();
                    fa.total_cmp(&fb)
                })
                .unwrap();
            prop_assert!((ok - best).abs() <= 1e-4 + 1e-12);
        }
    }

    #[test]
    fn variance_reduced_gradient_is_unbiased(p in instance(LossKind::Logistic), seed in 0u64..1000) {
        let d = p.x_dim();
        let pts = asvrg_core::synthetic::random_points(d, 2, 1.5, seed);
        let (x_md, x_snap) = (&pts[0], &pts[1]);
        let v_snap = p.full_gradient(x_snap).unwrap();
        let full = p.full_gradient(x_md).unwrap();
        let mut mean = vec![0.0; d];
        for i in 0..p.n_samples() {
            for (m, v) in mean.iter_mut().zip(svrg_gradient(&p, i, x_md, x_snap, &v_snap).iter()) {
                *m += v / p.n_samples() as f64;
            }
        }
        let scale = full.iter().chain(v_snap.iter()).fold(1e-300f64, |m, v| m.max(v.abs()));
        for (m, g) in mean.iter().zip(full.iter()) {
            prop_assert!((m - g).abs() <= 1e-12 * scale);
        }
        prop_assert_eq!(svrg_gradient(&p, 0, x_snap, x_snap, &v_snap), v_snap);
    }

    #[test]
    fn lipschitz_constants_are_ordered(p in instance(LossKind::Squared)) {
        prop_assert!(p.lf() > 0.0);
        prop_assert!(p.lq() >= p.lf() * (1.0 - 1e-9));
    }

    #[test]
    fn y_step_minimizes_its_scalar_subproblems(p in instance(LossKind::Squared), x in point(4), lam in point(4), theta in 0.2..5.0f64) {
        let d = p.x_dim();
        let (x, lam) = (&x[..d], &lam[..d]);
        let y = y_update(&p, x, lam, theta).unwrap();
        let ax = p.a().matvec(x).unwrap();
        for q in 0..d {
            // ν|y| − λ y + (θ/2)(Ax − c − y)² per coordinate (B = −I)
            let obj = |z: f64| p.nu() * z.abs() - lam[q] * z + 0.5 * theta * (ax[q] - p.c()[q] - z).powi(2);
            let best = (-120_000..=120_000).map(|k| k as f64 * 1e-4).min_by(|a, b| obj(*a).total_cmp(&obj(*b))).unwrap();
            prop_assert!((y[q] - best).abs() <= 1e-4 + 1e-12, "{} vs {}", y[q], best);
            prop_assert!(obj(y[q]) <= obj(best) + 1e-12);
        }
    }

    #[test]
    fn feasible_points_leave_multipliers_unchanged(p in instance(LossKind::Squared), x in point(4), lam in point(4), rho in 0.0..3.0f64) {
        let d = p.x_dim();
        let y: Vec<f64> = p.a().matvec(&x[..d]).unwrap().iter().zip(p.c().iter()).map(|(a, c)| a - c).collect();
        let updated = lambda_update(&p, &x[..d], &y, &lam[..d], rho).unwrap();
        prop_assert_eq!(updated.as_slice(), &lam[..d]);
    }

    #[test]
    fn penalty_matrix_entry_count(d in 2usize..12, picks in prop::collection::btree_set((0usize..12, 0usize..12), 0..20)) {
        let edges: Vec<(usize, usize)> = picks.into_iter().filter(|&(a, b)| a < b && b < d).collect();
        let weights = vec![1.0; edges.len()];
        let g = FeatureGraph::new(edges.clone(), weights).unwrap();
        let f = build_penalty_matrix(&g, d).unwrap();
        prop_assert_eq!(f.nnz(), 2 * edges.len() + d);
        prop_assert_eq!((f.rows(), f.cols()), (edges.len() + d, d));
    }

    #[test]
    fn libsvm_and_cache_round_trip(rows in dense_rows(4, 3), labels in prop::collection::vec(-5.0..5.0f64, 4)) {
        let mut rows = rows;
        rows[3][2] = 1.5;
        let ds = Dataset::new(SparseMatrix::from_dense(&rows).unwrap(), labels.into()).unwrap();
        let mut text = Vec::new();
        write_libsvm(&ds, &mut text).unwrap();
        prop_assert_eq!(&parse_libsvm(&text[..], ParseOptions::default()).unwrap(), &ds);
        let mut bin = Vec::new();
        write_cache(&ds, &mut bin).unwrap();
        prop_assert_eq!(read_cache(&bin[..]).unwrap(), ds);
    }
}
