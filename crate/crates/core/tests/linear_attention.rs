use nalgebra::{DMatrix, DVector};
use olsatt::attention::{
    attention_weights, linear_attention_predict, ols_embedding, pcr_embedding, ridge_embedding,
    softmax_in_place, ActivationKind,
};
use olsatt::linalg::{
    factor_scores, ols_fit, ols_predict_attention, spectral_embedding, weight_decomposition,
    ScoreOrigin, DEFAULT_TOL,
};
use olsatt::DesignMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn design(rng: &mut ChaCha20Rng, n: usize, p: usize) -> DesignMatrix {
    DesignMatrix::new(DMatrix::from_fn(n, p, |_, _| rng.random_range(-2.0..2.0))).unwrap()
}

fn outcomes(rng: &mut ChaCha20Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0))
}

fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

/// `(A'A + λI)^{-1} A' y` through an LU solve of the normal equations.
fn normal_equations(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let p = x.ncols();
    let a = x.transpose() * x + DMatrix::identity(p, p) * lambda;
    a.lu().solve(&(x.transpose() * y)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn attention_form_equals_direct_ols(seed in any::<u64>(), p in 1usize..7, extra in 2usize..40, j in 1usize..15) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let n = p + extra;
        let x = design(&mut rng, n, p);
        let y = outcomes(&mut rng, n);
        let xt = design(&mut rng, j, p);
        let (pred, _) = ols_predict_attention(&xt, &x, &y).unwrap();
        let beta = normal_equations(x.values(), &y, 0.0);
        let direct = xt.values() * beta;
        prop_assert!(rel_err(&pred, &direct) < 1e-8);
        let fit = ols_fit(&x, &y).unwrap();
        prop_assert!(rel_err(&fit.predict(&xt).unwrap(), &direct) < 1e-8);
    }

    #[test]
    fn training_scores_are_orthonormal(seed in any::<u64>(), p in 1usize..7, extra in 1usize..30) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x = design(&mut rng, p + extra, p);
        let emb = spectral_embedding(&x.gram(), DEFAULT_TOL).unwrap();
        let f = factor_scores(&x, &emb, ScoreOrigin::Train).unwrap().values;
        let gram = f.transpose() * &f;
        prop_assert!((gram - DMatrix::identity(p, p)).amax() < 1e-8);
    }

    #[test]
    fn hat_rows_sum_to_one_with_intercept(seed in any::<u64>(), p in 1usize..6, extra in 2usize..30) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x = design(&mut rng, p + extra, p).with_intercept();
        let y = outcomes(&mut rng, x.nrows());
        let (_, w) = ols_predict_attention(&x, &x, &y).unwrap();
        for s in w.row_sums().iter() {
            prop_assert!((s - 1.0).abs() < 1e-8);
        }
        // either role gives the same weight
        prop_assert!((&w.values - w.values.transpose()).amax() < 1e-10);
    }

    #[test]
    fn decomposition_reproduces_inner_product(
        a in prop::collection::vec(-1e3f64..1e3, 1..8),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let b: Vec<f64> = a.iter().map(|_| rng.random_range(-1e3..1e3)).collect();
        prop_assume!(a.iter().any(|v| *v != 0.0));
        let d = weight_decomposition(&a, &b).unwrap();
        prop_assert!((d.scale * d.cosine - d.weight).abs() <= 1e-12 * d.scale.max(1.0));
        prop_assert!(d.cosine.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn ridge_attention_equals_closed_form(seed in any::<u64>(), p in 1usize..6, extra in 0usize..30, lambda in 1e-4f64..50.0) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x = design(&mut rng, p + extra + 1, p);
        let y = outcomes(&mut rng, x.nrows());
        let xt = design(&mut rng, 7, p);
        let omega = ridge_embedding(&x, lambda).unwrap();
        let pred = linear_attention_predict(&xt, &x, &y, &omega, &ActivationKind::identity()).unwrap();
        let direct = xt.values() * normal_equations(x.values(), &y, lambda);
        prop_assert!(rel_err(&pred, &direct) < 1e-8);
    }

    #[test]
    fn ridge_shrinks_monotonically(seed in any::<u64>(), p in 1usize..6) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x = design(&mut rng, p + 10, p);
        let mut last = f64::INFINITY;
        for lambda in [0.0, 1e-3, 0.1, 1.0, 10.0, 1e3] {
            let omega = ridge_embedding(&x, lambda).unwrap();
            let top = omega.values.clone().symmetric_eigenvalues().max();
            prop_assert!(top <= last * (1.0 + 1e-12));
            last = top;
        }
    }

    #[test]
    fn pcr_rank_and_distance(seed in any::<u64>(), p in 1usize..7) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x = design(&mut rng, p + 15, p);
        let ols = ols_embedding(&x).unwrap();
        let mut last = f64::INFINITY;
        for rank in 1..=p {
            let omega = pcr_embedding(&x, rank).unwrap();
            prop_assert_eq!(omega.rank, rank);
            let eig = omega.values.clone().symmetric_eigenvalues();
            let top = eig.amax();
            let numeric = eig.iter().filter(|l| l.abs() > 1e-10 * top).count();
            prop_assert_eq!(numeric, rank);
            let dist = (&omega.values - &ols.values).norm();
            prop_assert!(dist <= last + 1e-10 * ols.values.norm());
            last = dist;
        }
        prop_assert!(last < 1e-8 * ols.values.norm());
    }

    #[test]
    fn softmax_is_shift_invariant(row in prop::collection::vec(-50f64..50.0, 1..30), shift in -1e3f64..1e3) {
        let mut a = row.clone();
        let mut b: Vec<f64> = row.iter().map(|v| v + shift).collect();
        softmax_in_place(&mut a);
        softmax_in_place(&mut b);
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_rows_lie_on_the_simplex(seed in any::<u64>(), p in 1usize..5, n in 5usize..40) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x = design(&mut rng, n.max(p + 2), p);
        let y = outcomes(&mut rng, x.nrows());
        let xq = design(&mut rng, 6, p);
        let omega = ridge_embedding(&x, 1.0).unwrap();
        for act in [ActivationKind::softmax(), ActivationKind::relu(), ActivationKind::elu(1.0)] {
            let Ok(w) = attention_weights(&xq, &x, &omega, &act) else { continue };
            for r in w.row_iter() {
                prop_assert!((r.sum() - 1.0).abs() < 1e-10);
            }
        }
        let pred = linear_attention_predict(&xq, &x, &y, &omega, &ActivationKind::softmax()).unwrap();
        let (lo, hi) = (y.min(), y.max());
        prop_assert!(pred.iter().all(|v| *v >= lo - 1e-12 && *v <= hi + 1e-12));
    }
}

#[test]
fn pcr_matches_principal_components_then_ols() {
    let mut rng = ChaCha20Rng::seed_from_u64(17);
    for _ in 0..20 {
        let p = rng.random_range(2..7);
        let n = p + rng.random_range(5..40);
        let x = design(&mut rng, n, p);
        let y = outcomes(&mut rng, n);
        let xt = design(&mut rng, 5, p);
        let rank = rng.random_range(1..=p);
        // principal directions from the SVD of X, then OLS on the scores
        let svd = x.values().clone().svd(false, true);
        let vt = svd.v_t.unwrap();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let v = DMatrix::from_fn(p, rank, |i, k| vt[(order[k], i)]);
        let t = x.values() * &v;
        let gamma = normal_equations(&t, &y, 0.0);
        let direct = xt.values() * (&v * gamma);
        let omega = pcr_embedding(&x, rank).unwrap();
        let pred = linear_attention_predict(&xt, &x, &y, &omega, &ActivationKind::identity()).unwrap();
        assert!(rel_err(&pred, &direct) < 1e-8);
    }
}
