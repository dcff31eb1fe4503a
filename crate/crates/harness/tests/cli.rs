use std::fs;
use std::process::Command;

fn darling() -> Command {
    Command::new(env!("CARGO_BIN_EXE_darling"))
}

const CFG: &str = r#"{
  "envs": [{ "kind": "lock" }],
  "protocols": [{ "kind": "ps-even", "changes": 2 }],
  "episodes": 90,
  "algorithms": [
    { "wrapper": "darling", "learner": { "kind": "toq" } },
    { "wrapper": "bare", "learner": { "kind": "toq" } }
  ],
  "seeds": [1],
  "timing": false
}"#;

#[test]
fn run_then_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, CFG).unwrap();
    let out = dir.path().join("out");
    let st = darling()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--seeds", "3,4", "--algo", "darling-toq", "--episodes", "60", "--threads", "2", "--regret-mode", "realized"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 2 * 60);
    assert!(results.lines().skip(1).all(|l| l.contains(",darling-toq,")));

    let merged = dir.path().join("merged");
    let st = darling().args(["summarize", "--in"]).arg(out.join("results.csv")).arg("--out").arg(&merged).output().unwrap();
    assert_eq!(st.status.code(), Some(0));
    let summary = fs::read_to_string(merged.join("summary.csv")).unwrap();
    assert!(summary.starts_with("env,protocol,xi_or_drift,algorithm,seeds,final_cum_reward_mean"));
    assert_eq!(summary.lines().count(), 2);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, CFG.replace("\"seeds\"", "\"seedz\"")).unwrap();
    let st = darling().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    let st = darling().args(["run", "--config"]).arg(dir.path().join("missing.json")).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    fs::write(&cfg, CFG).unwrap();
    let st = darling().args(["run", "--config"]).arg(&cfg).args(["--episodes", "2"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
}

#[test]
fn partial_failures_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, CFG).unwrap();
    let out = dir.path().join("out");
    fs::create_dir_all(out.join("cells/lock_ps-even0_bare-toq_s1.csv")).unwrap();
    let st = darling().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(st.status.code(), Some(3));
    assert_eq!(fs::read_to_string(out.join("results.csv")).unwrap().lines().count(), 1 + 90);
}
