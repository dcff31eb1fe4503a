use std::fs;
use std::path::Path;

use darling_harness::{expand, run_cell, run_experiment, CellStatus, ExperimentConfig, RESULT_COLUMNS};

fn config(out: &Path, body: &str) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_json(body).unwrap();
    cfg.out_dir = out.to_path_buf();
    cfg
}

const ONE_ALGO: &str = r#"{
  "envs": [{ "kind": "lock" }],
  "protocols": [{ "kind": "ps-explicit", "change_points": [40, 90] }],
  "episodes": 120,
  "algorithms": [{ "wrapper": "darling", "learner": { "kind": "toq" } }],
  "seeds": [1, 2, 3],
  "timing": false
}"#;

#[test]
fn one_env_one_algo_three_seeds_gives_three_row_groups() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), ONE_ALGO);
    let report = run_experiment(&cfg).unwrap();
    assert!(report.failed().is_empty());
    let text = fs::read_to_string(&report.results).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), RESULT_COLUMNS.join(","));
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), 3 * 120);
    let mut ids: Vec<&str> = body.iter().map(|l| l.split(',').next().unwrap()).collect();
    ids.dedup();
    assert_eq!(ids.len(), 3);
    for c in &report.cells {
        assert_eq!(c.oracle_solves, 3);
        assert!(c.oracle_exact);
    }
}

#[test]
fn prefix_sums_hold_in_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&config(dir.path(), ONE_ALGO)).unwrap();
    let mut rdr = csv::Reader::from_path(&report.results).unwrap();
    let mut prev: Option<(String, f64, usize)> = None;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let (id, t): (String, usize) = (rec[0].to_string(), rec[6].parse().unwrap());
        let (r, cum): (f64, f64) = (rec[7].parse().unwrap(), rec[8].parse().unwrap());
        match &prev {
            Some((pid, pcum, pt)) if *pid == id => {
                assert_eq!(t, pt + 1);
                assert!((cum - pcum - r).abs() < 1e-9);
            }
            _ => {
                assert_eq!(t, 1);
                assert!((cum - r).abs() < 1e-12);
            }
        }
        prev = Some((id, cum, t));
    }
}

#[test]
fn same_config_gives_byte_identical_files_for_any_thread_count() {
    let body = ONE_ALGO.replace(
        r#""algorithms": [{ "wrapper": "darling", "learner": { "kind": "toq" } }]"#,
        r#""algorithms": [
            { "wrapper": "darling", "learner": { "kind": "toq" } },
            { "wrapper": "periodic", "learner": { "kind": "toq" } },
            { "wrapper": "oracle", "learner": { "kind": "lsvi" } }
        ]"#,
    );
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut ca = config(a.path(), &body);
    ca.threads = 1;
    let mut cb = config(b.path(), &body);
    cb.threads = 4;
    run_experiment(&ca).unwrap();
    run_experiment(&cb).unwrap();
    for f in ["results.csv", "summary.csv", "summary.txt"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn algorithms_share_change_points_and_environment_noise() {
    let body = r#"{
      "envs": [{ "kind": "lock" }],
      "protocols": [{ "kind": "ps-geometric", "xi": 0.5 }],
      "episodes": 400,
      "algorithms": [
        { "wrapper": "bare", "learner": { "kind": "toq" } },
        { "wrapper": "oracle", "learner": { "kind": "toq" } }
      ],
      "seeds": [5],
      "timing": false
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), body);
    let cells = expand(&cfg);
    assert_eq!(cells.len(), 2);
    assert_eq!(cells[0].env_seeds(), cells[1].env_seeds());
    assert_ne!(cells[0].agent_seed(), cells[1].agent_seed());
    let (_, bare) = run_cell(&cfg, &cells[0]).unwrap();
    let (_, oracle) = run_cell(&cfg, &cells[1]).unwrap();
    assert!(bare.change_points > 0);
    assert_eq!(oracle.restarts, bare.change_points);
}

#[test]
fn a_failing_cell_does_not_stop_the_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), ONE_ALGO);
    // a directory where the cell file should go makes that cell's write fail
    let victim = expand(&cfg)[1].run_id();
    fs::create_dir_all(dir.path().join("cells").join(format!("{victim}.csv"))).unwrap();
    let report = run_experiment(&cfg).unwrap();
    let failed = report.failed();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].run_id, victim);
    assert!(matches!(failed[0].status, CellStatus::Failed { .. }));
    let rows = fs::read_to_string(&report.results).unwrap().lines().count();
    assert_eq!(rows, 1 + 2 * 120);
    let txt = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(txt.contains("failed cells") && txt.contains(&victim));
    assert_eq!(report.summary[0].seeds, 2);
}

#[test]
fn drift_and_hard_instances_run() {
    let body = r#"{
      "envs": [
        { "kind": "lock" },
        { "kind": "chain" },
        { "kind": "hard-tabular", "states": 6, "actions": 2, "horizon": 6 },
        { "kind": "hard-linear", "d": 4, "horizon": 4 }
      ],
      "protocols": [{ "kind": "drift", "window": 20 }],
      "episodes": 60,
      "algorithms": [{ "wrapper": "darling", "learner": { "kind": "lsvi" } }],
      "seeds": [1],
      "timing": false
    }"#;
    let dir = tempfile::tempdir().unwrap();
    // hard instances refuse drift
    let err = run_experiment(&config(dir.path(), body)).unwrap_err();
    assert!(matches!(err, darling_harness::HarnessError::Config(_)));

    let drift_only = body.replace(
        r#",
        { "kind": "hard-tabular", "states": 6, "actions": 2, "horizon": 6 },
        { "kind": "hard-linear", "d": 4, "horizon": 4 }"#,
        "",
    );
    let report = run_experiment(&config(dir.path(), &drift_only)).unwrap();
    assert!(report.failed().is_empty());
    for c in &report.cells {
        // drift: the oracle re-solves every episode
        assert_eq!(c.oracle_solves, 60, "{}", c.run_id);
        assert!(c.oracle_exact);
    }

    let hard = r#"{
      "envs": [
        { "kind": "hard-tabular", "states": 6, "actions": 2, "horizon": 6 },
        { "kind": "hard-linear", "d": 4, "horizon": 4 }
      ],
      "protocols": [{ "kind": "ps-even", "changes": 2 }],
      "episodes": 300,
      "algorithms": [
        { "wrapper": "darling", "learner": { "kind": "toq" } },
        { "wrapper": "bare", "learner": { "kind": "lsvi" } }
      ],
      "seeds": [1, 2],
      "timing": false
    }"#;
    let report = run_experiment(&config(dir.path(), hard)).unwrap();
    assert!(report.failed().is_empty());
    assert!(report.cells.iter().all(|c| c.change_points == 2));
}

#[test]
fn provenance_records_the_regret_mode() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), ONE_ALGO);
    cfg.regret_mode = darling_core::mdp::RegretMode::Realized;
    run_experiment(&cfg).unwrap();
    let prov: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("provenance.json")).unwrap()).unwrap();
    assert_eq!(prov["regret_mode"], "realized");
    assert_eq!(prov["cells"].as_array().unwrap().len(), 3);
    assert_eq!(prov["cells"][0]["status"], "ok");
}
