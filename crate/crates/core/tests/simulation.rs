use olsatt::dgp::{self, DgpKind, DgpSpec};
use proptest::prelude::*;

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[test]
fn large_sample_noise_ratio() {
    let data = dgp::generate(&DgpSpec::new(DgpKind::Linear), 100_000, 2.0, 314).unwrap();
    let noise: Vec<f64> = data.y.iter().zip(data.signal.iter()).map(|(y, f)| y - f).collect();
    let ratio = sample_variance(&noise) / sample_variance(data.signal.as_slice());
    assert!((ratio - 0.5).abs() < 0.05 * 0.5, "ratio {ratio}");
    let sigma = data.noise_variance.sqrt();
    let mean = noise.iter().sum::<f64>() / noise.len() as f64;
    assert!(mean.abs() < 4.0 * sigma / (noise.len() as f64).sqrt());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn calibration_and_support(kind in 0usize..6, n in 2usize..300, snr in 0.1f64..10.0, seed in any::<u64>()) {
        let spec = DgpSpec::new(DgpKind::ALL[kind]);
        let data = match dgp::generate(&spec, n, snr, seed) {
            Ok(d) => d,
            Err(olsatt::Error::DegenerateSignal { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let var = sample_variance(data.signal.as_slice());
        prop_assert!((data.noise_variance * snr - var).abs() <= 1e-12 * var.max(1.0));
        prop_assert!(data.x.values().iter().all(|v| (0.0..=1.0).contains(v)));
        for (i, row) in data.x.values().row_iter().enumerate() {
            let x: Vec<f64> = row.iter().copied().collect();
            prop_assert_eq!(dgp::eval_f(&spec, &x), data.signal[i]);
        }
        prop_assert_eq!(dgp::generate(&spec, n, snr, seed).unwrap(), data);
    }

    #[test]
    fn eval_is_total(kind in 0usize..6, x in prop::collection::vec(-1e3f64..1e3, 5)) {
        let spec = DgpSpec::new(DgpKind::ALL[kind]);
        let a = dgp::eval_f(&spec, &x);
        prop_assert_eq!(a.to_bits(), dgp::eval_f(&spec, &x).to_bits());
    }
}
