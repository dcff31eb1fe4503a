use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::mdp::{DriftModel, FeatureMap, InitialStates, MdpDims, PsModel, RewardNoise, SegmentModel};
use crate::SimRng;

/// Parameters of the linear chain lock.
///
/// States `0..chains` are the special states; chain `i` is "stay at state `i`".
/// The remaining states are normal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LockLinearSpec {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub dim: usize,
    pub chains: usize,
    /// Probability the good latent keeps the agent on its chain.
    pub keep: f64,
    pub dense_reward: [f64; 2],
    /// Mass on the first of the two random successors of a normal latent.
    pub normal_split: f64,
    pub seed: u64,
}

impl Default for LockLinearSpec {
    fn default() -> Self {
        Self {
            states: 15,
            actions: 7,
            horizon: 10,
            dim: 10,
            chains: 5,
            keep: 0.99,
            dense_reward: [0.005, 0.008],
            normal_split: 0.8,
            seed: 20_240_601,
        }
    }
}

impl LockLinearSpec {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::Spec(m.to_string()));
        if self.chains == 0 || self.dim < self.chains {
            return bad("chain lock needs 1 <= chains <= dim");
        }
        if self.states <= self.chains + 1 {
            return bad("chain lock needs at least two normal states");
        }
        if self.actions < 2 || self.horizon == 0 {
            return bad("chain lock needs A >= 2 and H >= 1");
        }
        // every latent has to show up among the special-state actions
        if self.chains * self.actions < self.dim {
            return bad("special states have too few actions to cover every latent");
        }
        let [lo, hi] = self.dense_reward;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return bad("dense reward range must satisfy 0 <= lo <= hi <= 1");
        }
        if !(0.0..=1.0).contains(&self.keep) || !(0.0..=1.0).contains(&self.normal_split) {
            return bad("chain lock probabilities must lie in [0, 1]");
        }
        Ok(())
    }
}

/// The shared feature map and one base model per good chain.
#[derive(Clone, Debug)]
pub struct ChainLock {
    pub spec: LockLinearSpec,
    pub features: Arc<FeatureMap>,
    /// `bases[g]` has chain `g` connected.
    pub bases: Vec<Arc<SegmentModel>>,
    /// Correct action of each special state.
    pub correct_actions: Vec<usize>,
    /// Where broken chains (and the good one, rarely) lead.
    pub off_chain: usize,
}

impl ChainLock {
    /// Episode `t` starts at special state `(t-1) mod chains`.
    pub fn initial_states(&self) -> InitialStates {
        InitialStates::Cycle((0..self.spec.chains).collect())
    }

    fn dims(&self, episodes: usize) -> Result<MdpDims, EnvError> {
        let s = &self.spec;
        Ok(MdpDims::new(s.states, s.actions, s.horizon, episodes, s.dim)?)
    }
}

pub fn build_chain_lock(spec: &LockLinearSpec) -> Result<ChainLock, EnvError> {
    spec.validate()?;
    let mut rng = SimRng::seed_from_u64(spec.seed);
    let (ns, na, d, nc, hz) = (spec.states, spec.actions, spec.dim, spec.chains, spec.horizon);

    let correct_actions: Vec<usize> = (0..nc).map(|_| rng.random_range(0..na)).collect();
    // resample until every latent occurs at some special state
    let latents = loop {
        let mut lat = vec![0usize; ns * na];
        for s in 0..ns {
            for a in 0..na {
                lat[s * na + a] = if s < nc && a == correct_actions[s] {
                    s
                } else if s < nc {
                    let j = rng.random_range(0..d - 1);
                    if j >= s {
                        j + 1
                    } else {
                        j
                    }
                } else {
                    rng.random_range(0..d)
                };
            }
        }
        let mut seen = vec![false; d];
        for &j in &lat[..nc * na] {
            seen[j] = true;
        }
        if seen.iter().all(|&x| x) {
            break lat;
        }
    };
    let features = Arc::new(FeatureMap::from_latent_indices(ns, na, d, &latents)?);

    let normal: Vec<usize> = (nc..ns).collect();
    let off_chain = *normal.choose(&mut rng).expect("normal states exist");
    // successors of normal latents, shared by all bases and steps
    let successors: Vec<(usize, usize)> = (nc..d)
        .map(|_| {
            let first = rng.random_range(0..ns);
            let mut second = rng.random_range(0..ns - 1);
            if second >= first {
                second += 1;
            }
            (first, second)
        })
        .collect();
    let [lo, hi] = spec.dense_reward;
    let dense: Vec<f64> = (0..hz * d).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect();

    let mut bases = Vec::with_capacity(nc);
    for g in 0..nc {
        let mut theta = dense.clone();
        let mut mu = vec![0.0; hz * d * ns];
        for h in 0..hz {
            theta[h * d + g] = if h + 1 == hz { 1.0 } else { 0.0 };
            for j in 0..d {
                let row = &mut mu[(h * d + j) * ns..(h * d + j + 1) * ns];
                if j < nc {
                    let stay = if j == g { spec.keep } else { 1.0 - spec.keep };
                    row[j] += stay;
                    row[off_chain] += 1.0 - stay;
                } else {
                    let (a, b) = successors[j - nc];
                    row[a] += spec.normal_split;
                    row[b] += 1.0 - spec.normal_split;
                }
            }
        }
        bases.push(Arc::new(SegmentModel::from_linear(&features, hz, theta, mu)?));
    }
    Ok(ChainLock {
        spec: spec.clone(),
        features,
        bases,
        correct_actions,
        off_chain,
    })
}

/// Abrupt protocol: segment `k` connects chain `k mod chains`.
pub fn ps_chain_switch(lock: &ChainLock, change_points: Vec<usize>, episodes: usize) -> Result<PsModel, EnvError> {
    let nc = lock.bases.len();
    let segments = (0..=change_points.len()).map(|k| Arc::clone(&lock.bases[k % nc])).collect();
    Ok(PsModel::new(
        lock.dims(episodes)?,
        Arc::clone(&lock.features),
        change_points,
        segments,
        lock.initial_states(),
        RewardNoise::Deterministic,
    )?)
}

/// Gradual protocol: keyframes every `window` episodes cycle through the bases,
/// with linear interpolation in between.
pub fn drift_linear(lock: &ChainLock, episodes: usize, window: usize) -> Result<DriftModel, EnvError> {
    if window == 0 {
        return Err(EnvError::Spec("drift window must be positive".into()));
    }
    let nc = lock.bases.len();
    let keyframes = (0..)
        .map(|i| (1 + i * window, Arc::clone(&lock.bases[i % nc])))
        .take_while(|(t, _)| *t < episodes + window)
        .collect();
    Ok(DriftModel::new(
        lock.dims(episodes)?,
        Arc::clone(&lock.features),
        keyframes,
        lock.initial_states(),
        RewardNoise::Deterministic,
    )?)
}
