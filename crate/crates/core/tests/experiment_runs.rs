use std::fs;

use banditpd::engine::Variant;
use banditpd::experiment::{run_experiment, ExperimentConfig, CSV_COLUMNS};
use banditpd::Error;

fn small(name: &str, dir: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(name).unwrap();
    cfg.horizon = 300;
    cfg.seeds = vec![3, 4];
    cfg.output_dir = dir.to_path_buf();
    cfg
}

#[test]
fn horizon_one_yields_empty_series() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small("desk-convex-c05", dir.path());
    cfg.horizon = 1;
    let out = run_experiment(&cfg).unwrap();
    assert!(out.mean.is_empty());
    assert!(out.outcomes.iter().all(|o| o.series.is_empty()));
    let text = fs::read_to_string(dir.path().join("mean.csv")).unwrap();
    assert_eq!(text.trim(), CSV_COLUMNS.join(","));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    for preset in ["desk-convex-c05", "desk-strongly-convex-t4"] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_experiment(&small(preset, a.path())).unwrap();
        let mut cfg = small(preset, b.path());
        cfg.parallel_agents = true;
        // The fingerprint covers the config, so compare only the series.
        run_experiment(&cfg).unwrap();
        for file in ["seed-3.csv", "seed-4.csv", "mean.csv"] {
            let x = fs::read(a.path().join(file)).unwrap();
            let y = fs::read(b.path().join(file)).unwrap();
            assert_eq!(x, y, "{preset}/{file}");
        }
    }
}

#[test]
fn csv_and_report_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("desk-convex-c05", dir.path());
    let out = run_experiment(&cfg).unwrap();

    let mut rdr = csv::Reader::from_path(dir.path().join("seed-3.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        CSV_COLUMNS
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.first().unwrap()[0].parse::<usize>().unwrap(), 1);
    assert_eq!(rows.last().unwrap()[0].parse::<usize>().unwrap(), 299);
    assert!(rows.iter().all(|r| !r[1].is_empty()));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["fingerprint"].as_str().unwrap(), cfg.fingerprint());
    assert_eq!(report["config"]["horizon"], 300);
    assert_eq!(report["invariant_violations"]["step_bound"], 0);
    assert_eq!(report["theorem_rates"]["regret"]["exponent"], 0.5);
    assert_eq!(report["theorem_rates"]["ccv"]["exponent"], 0.75);
    assert_eq!(report["seeds"].as_array().unwrap().len(), 2);
    assert!(report["seeds"][0]["comparator"]["converged"]
        .as_bool()
        .unwrap());
    assert_eq!(out.report.seeds[0].seed, 3);
}

#[test]
fn regret_column_is_empty_when_disabled() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small("desk-convex-c05", dir.path());
    cfg.metrics.regret = false;
    cfg.variant = Variant::ClippedPrimal;
    run_experiment(&cfg).unwrap();
    let mut rdr = csv::Reader::from_path(dir.path().join("mean.csv")).unwrap();
    assert!(rdr.records().all(|r| r.unwrap()[1].is_empty()));
}

#[test]
fn config_errors_carry_the_key() {
    let err =
        ExperimentConfig::from_toml_str("preset = \"paper-sec4\"\n[graph]\nedge_prob = 1.5\n")
            .unwrap_err();
    assert!(
        matches!(err, Error::Config { ref key, .. } if key == "graph.edge_prob"),
        "{err}"
    );
    let err =
        ExperimentConfig::from_toml_str("preset = \"paper-sec4\"\nhorizon = 0\n").unwrap_err();
    assert!(
        matches!(err, Error::Config { ref key, .. } if key == "horizon"),
        "{err}"
    );
    let err =
        ExperimentConfig::from_toml_str("preset = \"paper-sec4\"\n[problem]\nb_offset = -1.0\n")
            .unwrap_err();
    assert!(
        matches!(err, Error::Config { ref key, .. } if key == "problem"),
        "{err}"
    );
}
