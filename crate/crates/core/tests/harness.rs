use axon_core::config::{default_scenario, RunConfig};
use axon_core::harness::{
    fit_power_law, fit_rate, run_sweep, write_sweep, ResultsTable, RunRecord, SweepOptions,
};
use proptest::prelude::*;

fn small() -> RunConfig {
    RunConfig {
        cells: 40,
        horizon: 0.3,
        dt: 0.005,
        sweep: vec![10, 20, 40],
        replicates: 3,
        seed: 99,
        ..default_scenario()
    }
}

fn strip_wall(records: &[RunRecord]) -> Vec<RunRecord> {
    records
        .iter()
        .map(|r| RunRecord { wall_ms: 0, ..r.clone() })
        .collect()
}

#[test]
fn sweeps_do_not_depend_on_worker_count() {
    let one = run_sweep(&small(), &SweepOptions { workers: Some(1), refine: false }).unwrap();
    let three = run_sweep(&small(), &SweepOptions { workers: Some(3), refine: false }).unwrap();
    assert_eq!(strip_wall(&one.records), strip_wall(&three.records));
    assert_eq!(one.manifest.medians, three.manifest.medians);
    assert_eq!(one.records.len(), 9);
    assert!(one.records.iter().all(|r| r.status() == "ok"));
}

#[test]
fn written_sweep_reads_back() {
    let outcome = run_sweep(&small(), &SweepOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_sweep(&outcome, dir.path()).unwrap();
    let table = ResultsTable::read(&dir.path().join("results.csv")).unwrap();
    assert_eq!(
        table.header,
        [
            "N", "replicate", "seed", "dev_l2", "dev_h10", "dev_hm1_closed", "dev_hm1_open",
            "mart_hm1_closed", "mart_hm1_open", "wall_ms", "status"
        ]
    );
    assert_eq!(table.rows.len(), outcome.records.len());
    for (row, rec) in table.rows.iter().zip(&outcome.records) {
        let m = &rec.outcome.as_ref().unwrap().metrics;
        assert_eq!(row.seed, rec.seed);
        assert_eq!(table.metric(row, "dev_l2"), Some(m.dev_l2));
        assert_eq!(table.metric(row, "dev_hm1_max"), Some(m.dev_hm1_max()));
    }
    let fit = fit_rate(&table, "dev_l2").unwrap();
    assert_eq!(Some(&fit), outcome.manifest.rate_fit.as_ref());

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_digest"], small().digest());
    assert_eq!(manifest["medians"].as_array().unwrap().len(), 3);
}

#[test]
fn refinement_halves_the_step() {
    let outcome = run_sweep(&small(), &SweepOptions { workers: None, refine: true }).unwrap();
    assert_eq!(outcome.config.cells, 80);
    assert_eq!(outcome.config.dt, 0.0025);
    assert!(outcome.manifest.refine);
}

#[test]
fn fit_needs_three_scales() {
    assert!(fit_power_law(&[(10.0, 1.0), (20.0, 0.5)], "x").is_err());
    assert!(fit_power_law(&[(10.0, 1.0), (10.0, 0.5), (20.0, 0.3)], "x").is_err());
}

proptest! {
    #[test]
    fn fit_recovers_exact_power_laws(slope in -2.0f64..2.0, scale in 0.01f64..10.0) {
        let points: Vec<(f64, f64)> = [25.0, 50.0, 100.0, 200.0].iter().map(|&n: &f64| (n, scale * n.powf(slope))).collect();
        let fit = fit_power_law(&points, "m").unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!((fit.intercept - scale.ln()).abs() < 1e-9);
        prop_assert!(fit.residual < 1e-9);
    }
}
