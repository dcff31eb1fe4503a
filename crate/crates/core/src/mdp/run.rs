use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{EpisodePolicy, Environment, MdpError, OracleCache, RegretMode, RewardNoise, SegmentModel};
use crate::SimRng;

/// Why a learner was reset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RestartCause {
    /// A change detector fired.
    Detection,
    /// A fixed restart period elapsed.
    Scheduled,
    /// A known change point was reached.
    Oracle,
}

/// Per-episode flags an agent reports back to the runner.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub probe: bool,
    pub restart: Option<RestartCause>,
    /// Restarts performed so far, including one in this episode.
    pub restart_count: usize,
    pub triggers: usize,
}

/// Anything that can play episodes: a bare learner or a wrapper around one.
pub trait Agent: Send {
    fn name(&self) -> String;
    fn begin_episode(&mut self, t: usize);
    /// The behaviour this episode will follow; called after `begin_episode`.
    fn episode_policy(&self) -> EpisodePolicy;
    fn act(&mut self, h: usize, s: usize, rng: &mut SimRng) -> usize;
    fn observe(&mut self, h: usize, s: usize, a: usize, reward: f64, next: usize);
    fn end_episode(&mut self, t: usize) -> EpisodeReport;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// `s_1 .. s_{H+1}`
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Plays the `H` steps of one episode, feeding every transition to the agent.
pub fn simulate_episode(
    seg: &SegmentModel,
    s1: usize,
    noise: RewardNoise,
    agent: &mut dyn Agent,
    env_rng: &mut SimRng,
    agent_rng: &mut SimRng,
) -> Trajectory {
    let horizon = seg.horizon();
    let mut traj = Trajectory {
        states: Vec::with_capacity(horizon + 1),
        actions: Vec::with_capacity(horizon),
        rewards: Vec::with_capacity(horizon),
    };
    let mut s = s1;
    traj.states.push(s);
    for h in 0..horizon {
        let a = agent.act(h, s, agent_rng);
        let (r, next) = seg.sample_step(h, s, a, noise, env_rng);
        agent.observe(h, s, a, r, next);
        traj.actions.push(a);
        traj.rewards.push(r);
        traj.states.push(next);
        s = next;
    }
    traj
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub t: usize,
    pub segment: usize,
    pub probe: bool,
    pub restart: Option<RestartCause>,
    pub restart_count: usize,
    pub triggers: usize,
    pub reward: f64,
    /// `V*_1(s_1)` of the model in force.
    pub oracle_value: f64,
    /// Expected value of the played policy, or the realized return.
    pub policy_value: f64,
    pub regret: f64,
    pub cum_reward: f64,
    pub cum_regret: f64,
    pub wall_ns: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub episodes: usize,
    pub regret_mode: RegretMode,
    /// When false, `wall_ns` is recorded as 0 so traces are reproducible byte for byte.
    pub timing: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    pub records: Vec<EpisodeRecord>,
    pub regret_mode: RegretMode,
    pub oracle_solves: usize,
}

impl RunTrace {
    pub fn final_cum_reward(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_reward)
    }

    pub fn final_cum_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_regret)
    }

    pub fn restarts(&self) -> usize {
        self.records.last().map_or(0, |r| r.restart_count)
    }

    pub fn mean_wall_ms(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.wall_ns as f64).sum::<f64>() / self.records.len() as f64 / 1e6
    }
}

/// Runs `agent` on `env` for `opts.episodes` episodes and accounts dynamic regret.
pub fn run_agent(
    env: &dyn Environment,
    agent: &mut dyn Agent,
    opts: &RunOptions,
    env_rng: &mut SimRng,
    agent_rng: &mut SimRng,
) -> Result<RunTrace, MdpError> {
    let episodes = opts.episodes.min(env.dims().episodes);
    let noise = env.reward_noise();
    let mut cache = OracleCache::new();
    let mut records = Vec::with_capacity(episodes);
    let (mut cum_reward, mut cum_regret) = (0.0, 0.0);
    for t in 1..=episodes {
        let (seg, table) = cache.lookup(env, t);
        let s1 = env.initial_state(t);

        // the policy snapshot is accounting, not agent work, so it is not timed
        let start = opts.timing.then(Instant::now);
        agent.begin_episode(t);
        let mut wall_ns = start.map_or(0, |s| s.elapsed().as_nanos() as u64);
        let policy = match opts.regret_mode {
            RegretMode::Expected => Some(agent.episode_policy()),
            RegretMode::Realized => None,
        };
        let start = opts.timing.then(Instant::now);
        let traj = simulate_episode(&seg, s1, noise, agent, env_rng, agent_rng);
        let report = agent.end_episode(t);
        wall_ns += start.map_or(0, |s| s.elapsed().as_nanos() as u64);

        let reward = traj.total_reward();
        let oracle_value = table.v(0, s1);
        let policy_value = match &policy {
            Some(p) => p.value(&seg, s1)?,
            None => reward,
        };
        let regret = oracle_value - policy_value;
        cum_reward += reward;
        cum_regret += regret;
        records.push(EpisodeRecord {
            t,
            segment: env.segment_key(t),
            probe: report.probe,
            restart: report.restart,
            restart_count: report.restart_count,
            triggers: report.triggers,
            reward,
            oracle_value,
            policy_value,
            regret,
            cum_reward,
            cum_regret,
            wall_ns,
        });
    }
    Ok(RunTrace {
        records,
        regret_mode: opts.regret_mode,
        oracle_solves: cache.solves(),
    })
}
