use std::fs;
use std::path::Path;
use std::process::Command;

use olsatt::attreg::AttRegConfig;
use olsatt::dgp::{generate, DgpKind, DgpSpec};
use olsatt::linalg::ols_fit;
use olsatt::metrics::out_of_sample_r2;
use olsatt_cli::commands::{export_weights, fit_csv, predict, simulate, DETERMINISTIC_FILES};
use olsatt_cli::experiment::{run_experiment, ExperimentConfig};
use olsatt_cli::model::Method;
use olsatt_cli::table::read_table;
use olsatt_cli::{CliError, Settings};

fn write_dataset(dir: &Path, kind: DgpKind, n: usize, snr: f64, seed: u64) -> std::path::PathBuf {
    let path = dir.join(format!("{}.csv", kind.name()));
    let data = generate(&DgpSpec::new(kind), n, snr, seed).unwrap();
    data.write_csv(fs::File::create(&path).unwrap()).unwrap();
    path
}

fn settings(pairs: &[(&str, &str)]) -> Settings {
    let mut s = Settings::default();
    for (k, v) in pairs {
        s.set(k, v).unwrap();
    }
    s
}

#[test]
fn ols_fit_on_exported_data_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&DgpSpec::new(DgpKind::Friedman1), 400, 2.0, 17).unwrap();
    let csv = dir.path().join("d.csv");
    data.write_csv(fs::File::create(&csv).unwrap()).unwrap();
    let out = dir.path().join("m.txt");
    let report = fit_csv(&csv, &settings(&[("method", "ols"), ("out", out.to_str().unwrap())])).unwrap();

    let x = data.x.with_intercept();
    let fit = ols_fit(&x, &data.y).unwrap();
    let fitted = fit.predict(&x).unwrap();
    let expected = out_of_sample_r2(data.y.as_slice(), fitted.as_slice()).unwrap();
    assert!((report.r2_in_sample - expected).abs() < 1e-12);
    assert_eq!(report.features, ["x1", "x2", "x3", "x4", "x5"]);
    assert!(out.exists() && report.report_path.exists());

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report.report_path).unwrap()).unwrap();
    assert_eq!(json["r2_in_sample"].as_f64().unwrap(), report.r2_in_sample);

    let pred_out = dir.path().join("p.csv");
    let p = predict(
        &csv,
        &settings(&[("model", out.to_str().unwrap()), ("out", pred_out.to_str().unwrap())]),
    )
    .unwrap();
    assert!((p.r2.unwrap() - expected).abs() < 1e-12);
    let written = read_table(&pred_out).unwrap().column("prediction").unwrap();
    assert!((written - fitted).amax() < 1e-9);
}

#[test]
fn malformed_row_names_its_index() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    fs::write(&csv, "x1,x2,y\n1,2,3\n4,5,6\n7,oops,9\n1,1,1\n").unwrap();
    match fit_csv(&csv, &Settings::default()) {
        Err(CliError::Parse { row, column, .. }) => {
            assert_eq!(row, 3);
            assert_eq!(column, "x2");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
    let words = dir.path().join("words.csv");
    fs::write(&words, "x1,name,y\n1,a,3\n4,b,6\n").unwrap();
    assert!(matches!(
        fit_csv(&words, &Settings::default()),
        Err(CliError::NonNumericColumn { .. })
    ));
    let no_target = dir.path().join("nt.csv");
    fs::write(&no_target, "a,b\n1,2\n3,4\n").unwrap();
    assert!(matches!(fit_csv(&no_target, &Settings::default()), Err(CliError::MissingTarget(_))));
}

#[test]
fn attreg_beats_ols_in_sample_on_friedman1_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_dataset(dir.path(), DgpKind::Friedman1, 500, 2.0, 2024);
    let ols = fit_csv(
        &csv,
        &settings(&[("method", "ols"), ("out", dir.path().join("o.txt").to_str().unwrap())]),
    )
    .unwrap();
    let att = fit_csv(
        &csv,
        &settings(&[("method", "attreg"), ("seed", "7"), ("out", dir.path().join("a.txt").to_str().unwrap())]),
    )
    .unwrap();
    assert!(att.r2_in_sample > ols.r2_in_sample, "{} vs {}", att.r2_in_sample, ols.r2_in_sample);
    let diag = att.attreg.unwrap();
    assert!(diag.final_loss < diag.initial_loss);
}

#[test]
fn weights_match_a_two_observation_hand_computation() {
    let dir = tempfile::tempdir().unwrap();
    let key = dir.path().join("k.csv");
    fs::write(&key, "x,y\n1,0\n2,0\n").unwrap();
    let out = dir.path().join("w.csv");
    let base = [("key", key.to_str().unwrap()), ("no-intercept", "true"), ("out", out.to_str().unwrap())];

    // Ω = 1/(1 + 4): weights x_i x_j / 5
    let w = export_weights(&settings(&base)).unwrap();
    let expected = [[0.2, 0.4], [0.4, 0.8]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((w.weights[(i, j)] - expected[i][j]).abs() < 1e-15);
        }
    }
    assert!(w.row_sums.is_none());
    let table = read_table(&out).unwrap();
    assert_eq!(table.headers, ["query", "1", "2"]);

    let mut soft = base.to_vec();
    soft.push(("activation", "softmax"));
    let w = export_weights(&settings(&soft)).unwrap();
    let e = (0.2f64.exp(), 0.4f64.exp());
    assert!((w.weights[(0, 0)] - e.0 / (e.0 + e.1)).abs() < 1e-15);
    let table = read_table(&out).unwrap();
    assert_eq!(table.headers.last().unwrap(), "row_sum");
    assert!(table.column("row_sum").unwrap().iter().all(|s| (s - 1.0).abs() <= 1e-8));
}

#[test]
fn softmax_weights_are_positive_and_rows_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let key = write_dataset(dir.path(), DgpKind::Friedman2, 120, 1.0, 3);
    let query = dir.path().join("q.csv");
    generate(&DgpSpec::new(DgpKind::Friedman2), 30, 1.0, 4)
        .unwrap()
        .write_csv(fs::File::create(&query).unwrap())
        .unwrap();
    for method in ["ols", "ridge", "pcr"] {
        let s = settings(&[
            ("key", key.to_str().unwrap()),
            ("query", query.to_str().unwrap()),
            ("method", method),
            ("rank", "3"),
            ("activation", "softmax"),
            ("out", dir.path().join("w.csv").to_str().unwrap()),
        ]);
        let w = export_weights(&s).unwrap();
        assert_eq!(w.weights.shape(), (30, 120));
        assert!(w.weights.iter().all(|&v| v > 0.0));
        assert!(w.row_sums.unwrap().iter().all(|s| (s - 1.0).abs() <= 1e-8));
    }
    // identity weights of OLS with an intercept, queried on the keys, sum to one
    let s = settings(&[("key", key.to_str().unwrap()), ("out", dir.path().join("i.csv").to_str().unwrap())]);
    let w = export_weights(&s).unwrap();
    for r in w.weights.row_iter() {
        assert!((r.sum() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn attreg_model_weights_are_row_stochastic() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_dataset(dir.path(), DgpKind::Friedman3, 80, 2.0, 5);
    let model = dir.path().join("a.txt");
    fit_csv(
        &csv,
        &settings(&[("method", "attreg"), ("heads", "2"), ("standardize", "true"), ("out", model.to_str().unwrap())]),
    )
    .unwrap();
    let out = dir.path().join("w.csv");
    for head in [None, Some("0"), Some("1")] {
        let mut pairs = vec![("model", model.to_str().unwrap()), ("out", out.to_str().unwrap())];
        if let Some(h) = head {
            pairs.push(("head", h));
        }
        let w = export_weights(&settings(&pairs)).unwrap();
        assert_eq!(w.weights.shape(), (80, 80));
        assert!(w.weights.iter().all(|&v| v >= 0.0));
    }
    let bad = settings(&[("model", model.to_str().unwrap()), ("head", "2"), ("out", out.to_str().unwrap())]);
    assert!(matches!(export_weights(&bad), Err(CliError::Usage(_))));
}

#[test]
fn simulate_writes_one_file_per_condition() {
    let dir = tempfile::tempdir().unwrap();
    let s = settings(&[
        ("dgp", "linear,friedman1"),
        ("n", "50,60"),
        ("snr", "1,2"),
        ("out", dir.path().to_str().unwrap()),
    ]);
    let files = simulate(&s).unwrap();
    assert_eq!(files.len(), 8);
    let t = read_table(&files[0]).unwrap();
    assert_eq!(t.headers, ["x1", "x2", "x3", "x4", "x5", "y", "signal"]);
    assert_eq!(t.nrows(), 50);
    // same seed, same bytes
    let again = simulate(&s).unwrap();
    assert_eq!(fs::read(&files[3]).unwrap(), fs::read(&again[3]).unwrap());
}

#[test]
fn bench_output_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let attreg = AttRegConfig {
        heads: 2,
        max_iterations: 30,
        ..AttRegConfig::default()
    };
    let run = |name: &str, threads: usize| {
        let out = dir.path().join(name);
        let config = ExperimentConfig {
            dgps: vec![DgpKind::Linear, DgpKind::Friedman1],
            sample_sizes: vec![40, 60],
            snrs: vec![1.0, 2.0],
            replications: 2,
            test_size: 100,
            methods: vec![Method::Ols, Method::Ridge(1.0), Method::Pcr(2), Method::AttReg(attreg.clone())],
            base_seed: 99,
            output_path: Some(out.clone()),
            threads,
        };
        run_experiment(&config).unwrap();
        out
    };
    let a = run("a", 1);
    let b = run("b", 3);
    for file in DETERMINISTIC_FILES {
        let (x, y) = (fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap());
        assert!(!x.is_empty());
        assert_eq!(x, y, "{file} differs");
    }
    assert!(a.join("timings.csv").exists());
}

fn olsatt(args: &[&str], cwd: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_olsatt"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(olsatt(&["--help"], d), 0);
    assert_eq!(olsatt(&["--version"], d), 0);
    assert_eq!(olsatt(&["fit"], d), 1);
    assert_eq!(olsatt(&["bench", "--reps", "many"], d), 1);
    assert_eq!(olsatt(&["bench", "--method", "lasso"], d), 1);
    assert_eq!(olsatt(&["simulate", "--dgp", "linear", "--n", "30", "--snr", "1", "--out", "s.csv"], d), 0);
    assert_eq!(olsatt(&["fit", "s.csv", "--method", "pcr"], d), 1);
    assert_eq!(olsatt(&["fit", "s.csv", "--target", "z"], d), 2);
    assert_eq!(olsatt(&["fit", "missing.csv"], d), 2);
    fs::write(d.join("c.csv"), "a,b,y\n1,1,1\n2,2,3\n3,3,2\n4,4,5\n").unwrap();
    assert_eq!(olsatt(&["fit", "c.csv"], d), 3);
    fs::write(d.join("cfg.txt"), "method = ols\nout = m.txt\n").unwrap();
    assert_eq!(olsatt(&["fit", "s.csv", "--config", "cfg.txt"], d), 0);
    assert!(d.join("m.txt").exists());
    assert_eq!(olsatt(&["predict", "s.csv", "--model", "m.txt"], d), 0);
}

#[test]
fn standardization_does_not_change_ols_fits() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_dataset(dir.path(), DgpKind::Linear, 200, 1.0, 8);
    let plain = fit_csv(&csv, &settings(&[("out", dir.path().join("p.txt").to_str().unwrap())])).unwrap();
    let scaled = fit_csv(
        &csv,
        &settings(&[("standardize", "true"), ("out", dir.path().join("s.txt").to_str().unwrap())]),
    )
    .unwrap();
    assert!((plain.r2_in_sample - scaled.r2_in_sample).abs() < 1e-12);
    let split = fit_csv(
        &csv,
        &settings(&[("test-fraction", "0.25"), ("out", dir.path().join("t.txt").to_str().unwrap())]),
    )
    .unwrap();
    assert_eq!((split.n_train, split.n_test), (150, 50));
    assert!(split.r2_test.is_some());
}
