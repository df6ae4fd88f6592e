use olsatt::optim::{minimize_fns, LbfgsConfig, StopReason};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// `½ x'Ax - b'x` with `A = B'B + I`.
fn quadratic(seed: u64, dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let b: Vec<Vec<f64>> = (0..dim)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let a = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    let s: f64 = (0..dim).map(|k| b[k][i] * b[k][j]).sum();
                    s + if i == j { 1.0 } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let rhs = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
    (a, rhs)
}

fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(x).map(|(u, v)| u * v).sum()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn quadratic_converges_within_dimension_plus_one(seed in any::<u64>(), dim in 1usize..9) {
        let (a, b) = quadratic(seed, dim);
        let f = |x: &[f64]| {
            let ax = matvec(&a, x);
            0.5 * x.iter().zip(&ax).map(|(u, v)| u * v).sum::<f64>()
                - x.iter().zip(&b).map(|(u, v)| u * v).sum::<f64>()
        };
        let g = |x: &[f64]| matvec(&a, x).iter().zip(&b).map(|(u, v)| u - v).collect::<Vec<_>>();
        // finite termination presumes exact line minimization; a tight curvature
        // condition makes the interpolated step exact on a quadratic
        let config = LbfgsConfig {
            memory: dim,
            max_iterations: 200,
            grad_tol: 1e-10,
            wolfe_c1: 1e-7,
            wolfe_c2: 1e-6,
            ..LbfgsConfig::default()
        };
        let res = minimize_fns(f, g, &vec![0.0; dim], &config, 0.0, 1).unwrap();
        prop_assert!(res.iterations <= dim + 1, "{} iterations at dim {}", res.iterations, dim);
        let residual = g(&res.solution);
        prop_assert!(residual.iter().all(|r| r.abs() < 1e-8));
        for s in &res.steps {
            prop_assert!(s.satisfies_strong_wolfe(config.wolfe_c1, config.wolfe_c2));
        }
        for w in res.history.windows(2) {
            prop_assert!(w[1].value < w[0].value);
        }
    }

    #[test]
    fn rosenbrock_steps_satisfy_wolfe(x0 in -2.0f64..2.0, y0 in -1.0f64..3.0) {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let g = |x: &[f64]| vec![
            -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
            200.0 * (x[1] - x[0] * x[0]),
        ];
        let config = LbfgsConfig { max_iterations: 2000, ..LbfgsConfig::default() };
        let res = minimize_fns(f, g, &[x0, y0], &config, 0.0, 1).unwrap();
        prop_assert!(res.stop_reason != StopReason::MaxIterations);
        for s in &res.steps {
            prop_assert!(s.satisfies_strong_wolfe(config.wolfe_c1, config.wolfe_c2));
        }
        for w in res.history.windows(2) {
            prop_assert!(w[1].value < w[0].value);
        }
    }
}
