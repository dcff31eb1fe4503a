//! Acceptance suite: one PASS/FAIL line per headline criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines always print.
//! Exits non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use darling_core::darling::{Darling, DarlingConfig};
use darling_core::detectors::{
    bernoulli_kl, glr_statistic, glr_test, ChangeDetector, DetectionOutcome, DetectorConfig, ScalarHistory,
    ThresholdRule, CLAMP_EPS,
};
use darling_core::envs::{
    build_bidirectional_lock, build_chain_lock, build_linear_hard_instance, build_tabular_hard_instance,
    lock_ps, ps_endpoint_swap, random_sign_vectors, reachable_probes, tree_depth, LockLinearSpec, LockTabularSpec,
    TildeRule,
};
use darling_core::learners::{TabularOptimisticQ, ToqConfig};
use darling_core::mdp::{optimal_values, simulate_episode, Agent, Environment, FeatureMap, SegmentModel};
use darling_core::probes::{classify_change, tabular_probes, Identifiability};
use darling_core::SimRng;
use darling_harness::{run_experiment, CellOutcome, ExperimentConfig, Protocol};
use rand::{Rng, SeedableRng};
use statrs::distribution::{Binomial, DiscreteCDF};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn main() {
    let criteria: Vec<(&str, fn() -> Verdict)> = vec![
        ("oracle correctness", oracle_correctness),
        ("detector false alarm", detector_false_alarm),
        ("detector latency", detector_latency),
        ("glr prefix scan", glr_prefix_scan),
        ("probe identifiability", probe_identifiability),
        ("hard-instance validity", hard_instance_validity),
        ("frozen learner and restart hygiene", frozen_learner_hygiene),
        ("end-to-end lock", e2e_lock),
        ("end-to-end chain lock", e2e_chain),
        ("regret monotone in changes", regret_monotonicity),
        ("runtime per episode", runtime),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let v = check();
        let secs = start.elapsed().as_secs_f64();
        println!("ACCEPTANCE {} {name} ({secs:.1}s): {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += !v.pass as usize;
    }
    if failed > 0 {
        println!("ACCEPTANCE {failed} criteria failed");
        std::process::exit(1);
    }
}

fn random_mdp(rng: &mut SimRng, s: usize, a: usize, h: usize) -> SegmentModel {
    let rewards = (0..h * s * a).map(|_| rng.random::<f64>()).collect();
    let mut trans = Vec::with_capacity(h * s * a * s);
    for _ in 0..h * s * a {
        let raw: Vec<f64> = (0..s).map(|_| rng.random::<f64>() + 1e-3).collect();
        let z: f64 = raw.iter().sum();
        let mut row: Vec<f64> = raw.iter().map(|x| x / z).collect();
        row[s - 1] = 1.0 - row[..s - 1].iter().sum::<f64>();
        trans.extend(row);
    }
    SegmentModel::tabular(s, a, h, rewards, trans).unwrap()
}

fn path_value(seg: &SegmentModel, actions: &[usize], h: usize, s: usize) -> f64 {
    if h == seg.horizon() {
        return 0.0;
    }
    let a = actions[h * seg.states() + s];
    let next: f64 = seg
        .transition_row(h, s, a)
        .iter()
        .enumerate()
        .map(|(n, &p)| if p > 0.0 { p * path_value(seg, actions, h + 1, n) } else { 0.0 })
        .sum();
    seg.reward(h, s, a) + next
}

fn oracle_correctness() -> Verdict {
    let start = Instant::now();
    let (ns, na, hz) = (3, 2, 3);
    let mut rng = SimRng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..25 {
        let seg = random_mdp(&mut rng, ns, na, hz);
        let table = optimal_values(&seg);
        let cells = ns * hz;
        for s1 in 0..ns {
            let best = (0..na.pow(cells as u32))
                .map(|code| {
                    let actions: Vec<usize> = (0..cells).map(|i| code / na.pow(i as u32) % na).collect();
                    path_value(&seg, &actions, 0, s1)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max((table.v(0, s1) - best).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(worst <= 1e-10 && secs < 5.0, format!("max |error| {worst:.2e} over 25 MDPs in {secs:.2}s"))
}

fn bernoulli_stream_alarm(rng: &mut SimRng, cfg: &DetectorConfig, len: usize, p: f64) -> bool {
    let mut h = ScalarHistory::new();
    for _ in 0..len {
        h.push((rng.random::<f64>() < p) as u8 as f64);
        if glr_test(&h, cfg).triggered {
            return true;
        }
    }
    false
}

fn detector_false_alarm() -> Verdict {
    let start = Instant::now();
    let cfg = DetectorConfig {
        threshold: ThresholdRule::Anytime,
        delta_f: 0.05,
        ..DetectorConfig::default()
    };
    let runs = 500u64;
    let alarms = (0..runs)
        .filter(|&i| bernoulli_stream_alarm(&mut SimRng::seed_from_u64(7_000 + i), &cfg, 5000, 0.3))
        .count() as u64;
    // reject "rate <= 0.05" when P(Bin(500, 0.05) >= alarms) < 0.05
    let bin = Binomial::new(0.05, runs).unwrap();
    let p_value = if alarms == 0 { 1.0 } else { bin.sf(alarms - 1) };
    let secs = start.elapsed().as_secs_f64();
    verdict(
        p_value >= 0.05 && secs < 60.0,
        format!("{alarms}/{runs} streams alarmed (one-sided p = {p_value:.3}) in {secs:.1}s"),
    )
}

fn detector_latency() -> Verdict {
    let start = Instant::now();
    let cfg = DetectorConfig::experimental(50_000);
    let mut hits = 0;
    for i in 0..200u64 {
        let mut rng = SimRng::seed_from_u64(9_000 + i);
        let mut h = ScalarHistory::new();
        for n in 0..250 {
            h.push((rng.random::<f64>() < if n < 200 { 0.2 } else { 0.8 }) as u8 as f64);
            if glr_test(&h, &cfg).triggered {
                hits += (n >= 200) as usize;
                break;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(hits >= 190 && secs < 30.0, format!("{hits}/200 detected within 50 post-change samples"))
}

fn direct_scan(xs: &[f64]) -> f64 {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mu = mean(xs);
    (1..xs.len())
        .map(|t| {
            t as f64 * bernoulli_kl(mean(&xs[..t]), mu, CLAMP_EPS)
                + (xs.len() - t) as f64 * bernoulli_kl(mean(&xs[t..]), mu, CLAMP_EPS)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn glr_prefix_scan() -> Verdict {
    let mut rng = SimRng::seed_from_u64(4242);
    let cfg = DetectorConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..=2000);
        let change = rng.random_range(1..=n);
        let (p, q) = (rng.random::<f64>(), rng.random::<f64>());
        let xs: Vec<f64> = (0..n)
            .map(|i| {
                let m = if i < change { p } else { q };
                if rng.random() { (rng.random::<f64>() < m) as u8 as f64 } else { m * rng.random::<f64>() }
            })
            .collect();
        let (fast, _) = glr_statistic(&ScalarHistory::from_values(&xs), &cfg);
        let slow = direct_scan(&xs);
        worst = worst.max((fast - slow).abs() / slow.abs().max(1.0));
    }
    verdict(worst <= 1e-12, format!("max relative gap {worst:.2e} over 100 streams"))
}

fn probe_identifiability() -> Verdict {
    let lock = build_chain_lock(&LockLinearSpec::default()).unwrap();
    let segs: Vec<&SegmentModel> = lock.bases.iter().map(|b| b.as_ref()).collect();
    let probes = reachable_probes(&lock.features, &segs, &lock.initial_states().distribution());
    let ranks = probes.ranks();
    let full = ranks.iter().all(|&r| r == lock.features.dim());

    let seg = build_bidirectional_lock(&LockTabularSpec::default()).unwrap();
    let sw = ps_endpoint_swap(&seg).unwrap();
    let fm = FeatureMap::one_hot(seg.states(), seg.actions()).unwrap();
    let lp = reachable_probes(&fm, &[&seg, &sw], &[(0, 1.0)]);
    let (reward, transition) = classify_change(&lp, &fm, &seg, &sw);
    let swap_ok = reward == Identifiability::Detectable && transition == Identifiability::Invisible;

    let switches_ok = (0..lock.bases.len()).all(|g| {
        let next = (g + 1) % lock.bases.len();
        classify_change(&probes, &lock.features, &lock.bases[g], &lock.bases[next]).1.is_detectable()
    });
    verdict(
        full && swap_ok && switches_ok,
        format!("ranks {ranks:?}; swap reward {reward:?} / transition {transition:?}; chain switches visible: {switches_ok}"),
    )
}

fn rows_stochastic(seg: &SegmentModel) -> bool {
    (0..seg.horizon()).all(|h| {
        (0..seg.states()).all(|s| {
            (0..seg.actions()).all(|a| {
                let row = seg.transition_row(h, s, a);
                row.iter().all(|&p| p >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-12
            })
        })
    })
}

fn hard_instance_validity() -> Verdict {
    let mut rng = SimRng::seed_from_u64(31337);
    let mut bad = Vec::new();
    for draw in 0..200 {
        let a: usize = rng.random_range(2..=4);
        let depth: u32 = rng.random_range(2..=3);
        let s = 3 + (a.pow(depth) - 1) / (a - 1);
        assert_eq!(tree_depth(s, a), Some(depth as usize));
        let h = 3 * depth as usize + rng.random_range(0..=6);
        let n = rng.random_range(0..=5);
        let t = rng.random_range(1..=400) * (n + 1);
        let index: Vec<bool> = (0..=n).map(|_| rng.random()).collect();
        match build_tabular_hard_instance(s, a, h, n, t, &index, &TildeRule::default()) {
            Ok(inst) => {
                let ok = inst.model.segments().iter().all(|g| rows_stochastic(g))
                    && inst.epsilons.iter().all(|&e| e <= 0.25);
                if !ok {
                    bad.push(format!("tabular draw {draw}"));
                }
            }
            Err(e) => bad.push(format!("tabular draw {draw}: {e}")),
        }

        let d: usize = rng.random_range(4..=7);
        let hz: usize = 2 * rng.random_range(2..=4);
        let n = rng.random_range(0..=4);
        let t = (((d - 1) * (d - 1) * hz).div_ceil(8) + rng.random_range(0..100)) * (n + 1);
        let signs = random_sign_vectors(d, hz, n, &mut rng);
        match build_linear_hard_instance(d, hz, t, n, signs) {
            Ok(inst) => {
                let means_ok = (0..=n).all(|k| {
                    (0..hz).all(|step| {
                        (0..inst.action_count()).all(|act| {
                            let q = inst.exit_probability(k, step, act);
                            q >= inst.iota / 2.0 - 1e-15 && q <= 1.5 * inst.iota + 1e-15
                        })
                    })
                });
                if !(means_ok && inst.model.segments().iter().all(|g| rows_stochastic(g))) {
                    bad.push(format!("linear draw {draw}"));
                }
            }
            Err(e) => bad.push(format!("linear draw {draw}: {e}")),
        }
    }
    verdict(bad.is_empty(), format!("400 instances, {} invalid {:?}", bad.len(), bad.iter().take(3).collect::<Vec<_>>()))
}

#[derive(Clone)]
struct Scripted(Arc<AtomicBool>);

impl ChangeDetector for Scripted {
    fn test(&mut self, _h: &ScalarHistory) -> DetectionOutcome {
        DetectionOutcome {
            triggered: self.0.load(Ordering::Relaxed),
            best_split: None,
            best_statistic: 0.0,
            threshold_used: 0.0,
            screened: false,
        }
    }
}

fn frozen_learner_hygiene() -> Verdict {
    // tiny budgets make probing frequent enough to script triggers
    let (mut probes, mut scripted, mut restarts, mut problems) = (0, 0, 0, Vec::new());
    for t_total in [4, 5, 9, 13, 24] {
        let switch = Arc::new(AtomicBool::new(false));
        let cfg = ToqConfig::default();
        let mut agent = Darling::new(
            TabularOptimisticQ::new(10, 2, 5, t_total, cfg),
            Scripted(Arc::clone(&switch)),
            Arc::new(FeatureMap::one_hot(10, 2).unwrap()),
            Arc::new(tabular_probes(10, 2, 5)),
            5,
            t_total,
            DarlingConfig::default(),
        )
        .unwrap();
        let env = lock_ps(&LockTabularSpec::default(), vec![t_total / 2 + 1], t_total).unwrap();
        let (mut e, mut g) = (SimRng::seed_from_u64(3), SimRng::seed_from_u64(4));
        let mut local = 0;
        for t in 1..=t_total {
            agent.begin_episode(t);
            let probing = agent.is_probing();
            // odd-numbered probes trigger
            let fire = probing && local % 2 == 0;
            switch.store(fire, Ordering::Relaxed);
            let before = agent.learner().clone();
            simulate_episode(&env.segment(t), env.initial_state(t), env.reward_noise(), &mut agent, &mut e, &mut g);
            if probing && *agent.learner() != before {
                problems.push(format!("T={t_total}: learner moved in probe {t}"));
            }
            let report = agent.end_episode(t);
            local += probing as usize;
            scripted += fire as usize;
            if report.restart.is_some() {
                if agent.total_samples() != 0 {
                    problems.push(format!("T={t_total}: histories not cleared at {t}"));
                }
                if *agent.learner() != TabularOptimisticQ::new(10, 2, 5, t_total, cfg) {
                    problems.push(format!("T={t_total}: learner not reset at {t}"));
                }
            }
            if report.restart.is_some() != fire {
                problems.push(format!("T={t_total}: restart/trigger mismatch at {t}"));
            }
        }
        probes += local;
        restarts += agent.restarts();
    }
    verdict(
        problems.is_empty() && restarts == scripted && scripted > 0 && probes > scripted,
        format!("{probes} probes, {scripted} scripted triggers, {restarts} restarts; issues {problems:?}"),
    )
}

fn shipped(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::load(&path).unwrap()
}

fn by_algorithm(cells: &[CellOutcome]) -> BTreeMap<String, Vec<&CellOutcome>> {
    let mut m: BTreeMap<String, Vec<&CellOutcome>> = BTreeMap::new();
    for c in cells {
        m.entry(c.algorithm.clone()).or_default().push(c);
    }
    m
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// DARLING beats `other` on final cumulative reward: higher mean and either
/// disjoint min-max bands or a mean gap of at least 5%.
fn beats(d: &[f64], other: &[f64]) -> (bool, String) {
    let (md, mo) = (mean(d), mean(other));
    let dmin = d.iter().copied().fold(f64::INFINITY, f64::min);
    let omax = other.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gap = (md - mo) / mo.abs();
    let ok = md >= mo && (dmin > omax || gap >= 0.05);
    (ok, format!("{md:.1} vs {mo:.1} (gap {:+.1}%, bands disjoint {})", 100.0 * gap, dmin > omax))
}

fn end_to_end(config: &str, darling: &str, rivals: &[&str], budget_s: f64) -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = shipped(config);
    cfg.out_dir = dir.path().to_path_buf();
    cfg.threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let start = Instant::now();
    let report = run_experiment(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let groups = by_algorithm(&report.cells);
    let finals = |name: &str| -> Vec<f64> { groups[name].iter().map(|c| c.final_cum_reward).collect() };
    let d = finals(darling);
    let mut pass = report.failed().is_empty() && secs < budget_s;
    let mut parts = vec![format!("T={} seeds={}", cfg.episodes, cfg.seeds.len())];
    for rival in rivals {
        let (ok, text) = beats(&d, &finals(rival));
        pass &= ok;
        parts.push(format!("vs {rival}: {text}"));
    }
    let restarts = mean(&groups[darling].iter().map(|c| c.restarts as f64).collect::<Vec<_>>());
    parts.push(format!("darling restarts/run {restarts:.1}"));
    verdict(pass, parts.join("; "))
}

fn e2e_lock() -> Verdict {
    end_to_end("lock_ps.json", "darling-toq", &["periodic-toq", "bare-toq"], 600.0)
}

fn e2e_chain() -> Verdict {
    end_to_end("chain_ps.json", "darling-lsvi", &["periodic-lsvi", "bare-lsvi"], 1800.0)
}

fn regret_monotonicity() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = shipped("lock_ps.json");
    cfg.out_dir = dir.path().to_path_buf();
    cfg.episodes = 20_000;
    cfg.protocols = [1, 4, 16].map(|changes| Protocol::PsEven { changes }).to_vec();
    cfg.algorithms.retain(|a| a.label() == "darling-toq");
    cfg.threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let report = run_experiment(&cfg).unwrap();
    let regret = |n: usize| -> f64 {
        let key = format!("even:{n}");
        mean(&report.cells.iter().filter(|c| c.xi_or_drift == key).map(|c| c.final_cum_regret).collect::<Vec<_>>())
    };
    let r = [regret(1), regret(4), regret(16)];
    verdict(
        report.failed().is_empty() && r[0] <= r[1] && r[1] <= r[2],
        format!("mean regret N=1: {:.1}, N=4: {:.1}, N=16: {:.1}", r[0], r[1], r[2]),
    )
}

fn runtime() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = shipped("lock_ps.json");
    cfg.out_dir = dir.path().to_path_buf();
    cfg.algorithms.retain(|a| a.label() == "darling-toq");
    cfg.threads = 1;
    cfg.timing = true;
    let report = run_experiment(&cfg).unwrap();
    let ms = mean(&report.cells.iter().map(|c| c.wall_ms_per_episode).collect::<Vec<_>>());
    let env = lock_ps(&LockTabularSpec::default(), vec![], 10).unwrap();
    let dims = env.dims();
    verdict(
        ms <= 5.0,
        format!("{ms:.4} ms/episode mean over {} runs (S={} A={} H={})", report.cells.len(), dims.states, dims.actions, dims.horizon),
    )
}

