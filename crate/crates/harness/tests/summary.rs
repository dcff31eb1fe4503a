use std::fs;

use darling_harness::summary::mean_std;
use darling_harness::{aggregate, read_results, summarize_files, CellFinal};

fn fin(algorithm: &str, seed: u64, reward: f64, regret: f64) -> CellFinal {
    CellFinal {
        env: "lock".into(),
        protocol: "ps-geometric".into(),
        xi_or_drift: "0.6".into(),
        algorithm: algorithm.into(),
        seed,
        cum_reward: reward,
        cum_regret: regret,
        wall_ms_per_episode: 0.5,
        restarts: seed as f64,
        oracle_exact: Some(true),
    }
}

#[test]
fn single_seed_has_zero_std() {
    let rows = aggregate(&[fin("a", 1, 3.0, 1.0)]);
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].final_cum_reward_mean, rows[0].final_cum_reward_std), (3.0, 0.0));
    assert_eq!(rows[0].final_cum_regret_std, 0.0);
}

#[test]
fn two_row_fixture_matches_hand_values() {
    let rows = aggregate(&[fin("a", 1, 2.0, 10.0), fin("a", 2, 6.0, 4.0)]);
    let r = &rows[0];
    assert_eq!(r.seeds, 2);
    assert_eq!(r.final_cum_reward_mean, 4.0);
    // sample std of {2, 6} is sqrt(8)
    assert!((r.final_cum_reward_std - 8f64.sqrt()).abs() < 1e-12);
    assert_eq!(r.final_cum_regret_mean, 7.0);
    assert!((r.final_cum_regret_std - 18f64.sqrt()).abs() < 1e-12);
    assert_eq!(r.restarts_mean, 1.5);
    assert_eq!(r.oracle_exact, "true");
    assert!(mean_std(&[]).0.is_nan());
}

#[test]
fn reads_final_rows_and_merges_external_baselines() {
    let dir = tempfile::tempdir().unwrap();
    let ours = dir.path().join("ours.csv");
    fs::write(
        &ours,
        "run_id,seed,algorithm,env,protocol,xi_or_drift,t,episode_reward,cum_reward,cum_regret,probe_flag,restart_flag,restart_count,detector_triggers_this_episode,wall_ns\n\
         r1,1,darling-toq,lock,ps-geometric,0.6,1,1,1,0.5,0,0,0,0,1000000\n\
         r1,1,darling-toq,lock,ps-geometric,0.6,2,0,1,1.5,1,1,1,2,3000000\n\
         r2,2,darling-toq,lock,ps-geometric,0.6,1,1,1,0.25,0,0,0,0,2000000\n\
         r2,2,darling-toq,lock,ps-geometric,0.6,2,1,2,0.25,0,0,0,0,2000000\n",
    )
    .unwrap();
    // an external baseline with a reduced column set, rows out of order
    let ext = dir.path().join("master.csv");
    fs::write(
        &ext,
        "algorithm,env,protocol,xi_or_drift,seed,t,cum_reward\n\
         master,lock,ps-geometric,0.6,1,2,1.5\n\
         master,lock,ps-geometric,0.6,1,1,0.5\n",
    )
    .unwrap();

    let finals = read_results(&ours).unwrap();
    assert_eq!(finals.len(), 2);
    assert_eq!((finals[0].cum_reward, finals[0].cum_regret, finals[0].restarts), (1.0, 1.5, 1.0));
    assert!((finals[0].wall_ms_per_episode - 2.0).abs() < 1e-12);

    let rows = summarize_files(&[&ours, &ext]).unwrap();
    assert_eq!(rows.len(), 2);
    let d = rows.iter().find(|r| r.algorithm == "darling-toq").unwrap();
    assert_eq!((d.seeds, d.final_cum_reward_mean, d.final_cum_regret_mean), (2, 1.5, 0.875));
    assert_eq!(d.oracle_exact, "na");
    let m = rows.iter().find(|r| r.algorithm == "master").unwrap();
    assert_eq!((m.seeds, m.final_cum_reward_mean), (1, 1.5));
    assert!(m.final_cum_regret_mean.is_nan());
}

#[test]
fn schema_mismatch_names_the_column() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "seed,algorithm,env,t\n1,a,lock,1\n").unwrap();
    let err = read_results(&bad).unwrap_err().to_string();
    assert!(err.contains("protocol"), "{err}");
}
