use std::sync::Arc;

use darling_core::envs::{lock_ps, LockTabularSpec};
use darling_core::learners::*;
use darling_core::mdp::{
    run_agent, FeatureMap, InitialStates, MdpDims, PsModel, RegretMode, RewardNoise, RunOptions, SegmentModel,
};
use darling_core::SimRng;
use rand::{Rng, SeedableRng};

fn bandit(means: &[f64], episodes: usize) -> PsModel {
    let na = means.len();
    let seg = SegmentModel::tabular(1, na, 1, means.to_vec(), vec![1.0; na]).unwrap();
    PsModel::stationary(
        MdpDims::tabular(1, na, 1, episodes).unwrap(),
        Arc::new(FeatureMap::one_hot(1, na).unwrap()),
        seg,
        InitialStates::Fixed(0),
        RewardNoise::Bernoulli,
    )
    .unwrap()
}

fn run(env: &PsModel, agent: &mut dyn darling_core::mdp::Agent, episodes: usize, seed: u64) -> Vec<f64> {
    let opts = RunOptions { episodes, regret_mode: RegretMode::Expected, timing: false };
    let (mut e, mut g) = (SimRng::seed_from_u64(seed), SimRng::seed_from_u64(seed + 1000));
    let trace = run_agent(env, agent, &opts, &mut e, &mut g).unwrap();
    trace.records.iter().map(|r| r.cum_regret).collect()
}

#[test]
fn toq_settles_on_the_better_arm() {
    let t = 3000;
    let env = bandit(&[0.3, 0.7], t);
    let mut agent = Bare::new(TabularOptimisticQ::new(1, 2, 1, t, ToqConfig::default()));
    let cum = run(&env, &mut agent, t, 4);
    assert_eq!(agent.learner.select_action(0, 0), 1);
    // regret accrues mostly early
    let late = cum[t - 1] - cum[t / 2 - 1];
    let early = cum[t / 2 - 1];
    assert!(late < early, "early {early} late {late}");
    assert!(cum[t - 1] / (t as f64) < 0.1);
}

#[test]
fn toq_regret_on_stationary_lock_is_sublinear() {
    let t = 4000;
    let spec = LockTabularSpec::default();
    let env = lock_ps(&spec, vec![], t).unwrap();
    // a small bonus scale so the lock is cracked well inside the horizon
    let cfg = ToqConfig { c_b: 0.05, delta: None };
    let mut agent = Bare::new(TabularOptimisticQ::new(10, 2, 5, t, cfg));
    let cum = run(&env, &mut agent, t, 8);
    let q1 = cum[t / 4 - 1];
    let q4 = cum[t - 1] - cum[3 * t / 4 - 1];
    assert!(q4 < q1, "first quarter {q1}, last quarter {q4}");
}

/// Per-pair sample means with ridge shrinkage: the closed form of LSVI under
/// one-hot features.
fn tabular_ls_oracle(
    data: &[(usize, usize, usize, f64, usize)],
    ns: usize,
    na: usize,
    hz: usize,
    lambda: f64,
    beta: f64,
) -> Vec<f64> {
    let mut q = vec![0.0; hz * ns * na];
    let mut v_next = vec![0.0; ns];
    for h in (0..hz).rev() {
        for s in 0..ns {
            for a in 0..na {
                let here: Vec<_> = data.iter().filter(|d| d.0 == h && d.1 == s && d.2 == a).collect();
                let n = here.len() as f64;
                let sum: f64 = here.iter().map(|d| d.3 + v_next[d.4]).sum();
                let val = sum / (lambda + n) + beta / (lambda + n).sqrt();
                q[(h * ns + s) * na + a] = val.clamp(0.0, hz as f64);
            }
        }
        for s in 0..ns {
            v_next[s] = (0..na).map(|a| q[(h * ns + s) * na + a]).fold(f64::NEG_INFINITY, f64::max);
        }
    }
    q
}

#[test]
fn lsvi_matches_tabular_least_squares_under_one_hot_features() {
    let (ns, na, hz) = (3, 2, 3);
    let fm = Arc::new(FeatureMap::one_hot(ns, na).unwrap());
    let cfg = LsviConfig { lambda: 0.5, beta: Some(0.3), delta: None };
    let mut learner = LsviUcb::new(Arc::clone(&fm), hz, 100, cfg);
    let mut rng = SimRng::seed_from_u64(12);
    let mut data = Vec::new();
    for _ in 0..40 {
        for h in 0..hz {
            let d = (h, rng.random_range(0..ns), rng.random_range(0..na), rng.random::<f64>(), rng.random_range(0..ns));
            learner.observe(d.0, d.1, d.2, d.3, d.4);
            data.push(d);
        }
        learner.end_episode();
    }
    let want = tabular_ls_oracle(&data, ns, na, hz, 0.5, 0.3);
    for (x, y) in learner.q_table().iter().zip(&want) {
        assert!((x - y).abs() < 1e-10, "{x} vs {y}");
    }
}

#[test]
fn reset_restores_fresh_learners() {
    let fm = Arc::new(FeatureMap::from_latent_indices(4, 3, 5, &[0, 1, 2, 3, 4, 0, 1, 2, 3, 4, 0, 1]).unwrap());
    let fresh = LsviUcb::new(Arc::clone(&fm), 4, 500, LsviConfig::default());
    let mut used = fresh.clone();
    let fresh_q = TabularOptimisticQ::new(4, 3, 4, 500, ToqConfig::default());
    let mut used_q = fresh_q.clone();
    let mut rng = SimRng::seed_from_u64(1);
    for _ in 0..30 {
        let (h, s, a, r, n) = (rng.random_range(0..4), rng.random_range(0..4), rng.random_range(0..3), rng.random(), rng.random_range(0..4));
        used.observe(h, s, a, r, n);
        used_q.observe(h, s, a, r, n);
    }
    used.end_episode();
    assert!(used != fresh);
    used.reset();
    used_q.reset();
    assert!(used == fresh);
    assert_eq!(used_q, fresh_q);
}

#[test]
fn greedy_snapshot_agrees_with_action_selection() {
    let t = 300;
    let env = lock_ps(&LockTabularSpec::default(), vec![], t).unwrap();
    let fm = Arc::new(FeatureMap::one_hot(10, 2).unwrap());
    let mut toq = Bare::new(TabularOptimisticQ::new(10, 2, 5, t, ToqConfig::default()));
    let mut lsvi = Bare::new(LsviUcb::new(fm, 5, t, LsviConfig::default()));
    run(&env, &mut toq, t, 2);
    run(&env, &mut lsvi, t, 2);
    for h in 0..5 {
        for s in 0..10 {
            assert_eq!(toq.learner.greedy_policy().action(h, s), toq.learner.select_action(h, s));
            assert_eq!(lsvi.learner.greedy_policy().action(h, s), lsvi.learner.select_action(h, s));
        }
    }
}
