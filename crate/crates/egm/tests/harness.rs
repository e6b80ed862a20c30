mod common;

use std::path::Path;

use common::digit_set;
use egm::gabor::cache::HEADER_LEN;
use egm::harness::{run_single, run_sweep, ExperimentConfig, Session, SweepGrid};
use egm::mnist::{write_idx_images, write_idx_labels, LabelledSet, SetSource};

fn write_mnist(dir: &Path, prefix: &str, set: &LabelledSet) {
    std::fs::write(dir.join(format!("{prefix}-images-idx3-ubyte")), write_idx_images(&set.images).unwrap()).unwrap();
    std::fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), write_idx_labels(&set.labels)).unwrap();
}

fn fixture_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_mnist(dir.path(), "train", &digit_set(6, 31, 0, SetSource::Model));
    write_mnist(dir.path(), "t10k", &digit_set(4, 32, 0, SetSource::Test));
    dir
}

fn config(dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        per_digit_models: 3,
        per_digit_tests: 2,
        n_x: 5,
        parallel: false,
        mnist_dir: dir.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

#[test]
fn identical_config_gives_identical_results() {
    let data = fixture_dir();
    let c = config(data.path());
    let a = run_single(&c).unwrap();
    let b = run_single(&c).unwrap();
    assert_eq!(a.evaluation, b.evaluation);
    let par = run_single(&ExperimentConfig { parallel: true, ..c.clone() }).unwrap();
    assert_eq!(a.evaluation, par.evaluation);
    let other = run_single(&ExperimentConfig { seed: 99, ..c }).unwrap();
    let ids = |r: &egm::harness::RunReport| r.evaluation.outcomes.iter().map(|o| o.classification.best_model_id).collect::<Vec<_>>();
    assert_ne!(ids(&a), ids(&other));
}

#[test]
fn warm_cache_matches_cold_extraction() {
    let data = fixture_dir();
    let cache = tempfile::tempdir().unwrap();
    let cold = run_single(&config(data.path())).unwrap();
    let c = ExperimentConfig {
        cache_dir: Some(cache.path().to_path_buf()),
        ..config(data.path())
    };
    let first = run_single(&c).unwrap();
    let mut files: Vec<_> = std::fs::read_dir(cache.path()).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert_eq!(files.len(), 2);
    let sizes: Vec<u64> = files.iter().map(|f| f.metadata().unwrap().len()).collect();
    let per_image = (28 * 28 * 8 * 8) as u64;
    let mut expected = vec![HEADER_LEN as u64 + 30 * per_image, HEADER_LEN as u64 + 20 * per_image];
    expected.sort();
    let mut got = sizes.clone();
    got.sort();
    assert_eq!(got, expected);
    let modified: Vec<_> = files.iter().map(|f| f.metadata().unwrap().modified().unwrap()).collect();

    let warm = run_single(&c).unwrap();
    assert_eq!(cold.evaluation, first.evaluation);
    assert_eq!(cold.evaluation, warm.evaluation);
    let again: Vec<_> = files.iter().map(|f| f.metadata().unwrap().modified().unwrap()).collect();
    assert_eq!(modified, again, "warm run must not rewrite the cache");

    // an unreadable cache file is rebuilt
    let good = std::fs::read(&files[0]).unwrap();
    let mut bad = good.clone();
    bad[4] ^= 0x7f;
    std::fs::write(&files[0], &bad).unwrap();
    assert_eq!(run_single(&c).unwrap().evaluation, cold.evaluation);
    assert_eq!(std::fs::read(&files[0]).unwrap(), good);

    let c_other = ExperimentConfig { sigma: 3.0, ..c.clone() };
    run_single(&c_other).unwrap();
    assert_eq!(std::fs::read_dir(cache.path()).unwrap().count(), 4);
}

#[test]
fn shifted_tests_keep_their_predictions() {
    let models = digit_set(2, 33, 0, SetSource::Model);
    let tests = digit_set(2, 34, 1000, SetSource::Test);
    let c = ExperimentConfig { n_x: 10, parallel: false, ..ExperimentConfig::default() };
    let mut s = Session::from_sets(&c, models, tests);
    let (plain, _) = s.evaluate(10, 4, 2.0, &[3e-9], None).unwrap();
    for seed in [1, 2] {
        let (shifted, _) = s.evaluate(10, 4, 2.0, &[3e-9], Some(seed)).unwrap();
        let shifts = &s.shifted_tests(seed).1;
        assert!(shifts.iter().any(|d| d != &[0, 0]));
        for (a, b) in plain[0].outcomes.iter().zip(&shifted[0].outcomes) {
            let (a, b) = (&a.classification, &b.classification);
            assert!((a.best_cost - b.best_cost).abs() < 1e-9, "{} vs {}", a.best_cost, b.best_cost);
            for k in 0..10 {
                assert!((a.per_class_best[k] - b.per_class_best[k]).abs() < 1e-9);
            }
            if a.runner_up_cost - a.best_cost > 1e-6 {
                assert_eq!(a.predicted, b.predicted);
            }
        }
    }
}

#[test]
fn reports_carry_provenance_and_results() {
    let data = fixture_dir();
    let out = tempfile::tempdir().unwrap();
    let c = ExperimentConfig {
        out_dir: Some(out.path().to_path_buf()),
        ..config(data.path())
    };
    let r = run_single(&c).unwrap();
    let report = std::fs::read_to_string(out.path().join("report.csv")).unwrap();
    let rows: Vec<&str> = report.lines().skip(1).collect();
    assert_eq!(rows.len(), 20);
    let correct = rows
        .iter()
        .filter(|row| {
            let f: Vec<&str> = row.split(',').collect();
            f[1] == f[2]
        })
        .count();
    assert_eq!(correct, r.evaluation.correct());

    let confusion = std::fs::read_to_string(out.path().join("confusion.csv")).unwrap();
    let total: usize = confusion
        .lines()
        .skip(1)
        .flat_map(|l| l.split(',').skip(1).map(|v| v.parse::<usize>().unwrap()).collect::<Vec<_>>())
        .sum();
    assert_eq!(total, 20);

    let summary = std::fs::read_to_string(out.path().join("summary.txt")).unwrap();
    assert!(summary.contains("# seed = 20171015"));
    assert!(summary.contains("# code_version = "));
    let json_start = summary.find('{').unwrap();
    let v: serde_json::Value = serde_json::from_str(&summary[json_start..]).unwrap();
    assert_eq!(v["total"], 20);
    assert!((v["accuracy"].as_f64().unwrap() - r.accuracy()).abs() < 1e-15);
    assert_eq!(v["confusion"].as_array().unwrap().len(), 10);
}

#[test]
fn sweep_rows_cover_the_grid_and_rerun_identically() {
    let data = fixture_dir();
    let out = tempfile::tempdir().unwrap();
    let c = ExperimentConfig {
        per_digit_models: 1,
        per_digit_tests: 1,
        out_dir: Some(out.path().to_path_buf()),
        ..config(data.path())
    };
    let grid = SweepGrid {
        n_x: vec![5, 10],
        n_d: vec![4],
        mu: vec![2.0],
        lambda: vec![3e-9, 3e-3],
    };
    let a = run_sweep(&c, &grid).unwrap();
    assert_eq!(a.rows.len(), 4);
    assert!(a.rows.iter().all(|r| r.error.is_none() && r.accuracy.is_some()));
    assert!(a.find(10, 4, 2.0, 3e-3).is_some());
    let csv = std::fs::read_to_string(out.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 5);
    let b = run_sweep(&c, &grid).unwrap();
    let acc = |r: &egm::harness::SweepReport| r.rows.iter().map(|x| x.accuracy).collect::<Vec<_>>();
    assert_eq!(acc(&a), acc(&b));

    let bad = SweepGrid { n_x: vec![7], ..grid };
    let r = run_sweep(&c, &bad).unwrap();
    assert!(r.rows.iter().all(|x| x.error.is_some() && x.accuracy.is_none()));
}

#[test]
fn empty_or_oversized_runs_fail_before_compute() {
    let data = fixture_dir();
    let c = config(data.path());
    assert!(matches!(
        run_single(&ExperimentConfig { per_digit_models: 0, ..c.clone() }),
        Err(egm::Error::Argument(_))
    ));
    let huge = ExperimentConfig { per_digit_models: 4000, per_digit_tests: 800, ..c.clone() };
    assert!(matches!(run_single(&huge), Err(egm::Error::Argument(_))));
    let missing = ExperimentConfig { per_digit_models: 7, ..c };
    assert!(matches!(run_single(&missing), Err(egm::Error::Capacity { .. })));
}
