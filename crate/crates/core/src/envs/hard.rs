//! Lower-bound instance generators. Both take equal segment lengths `T/(N_T+1)`.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::mdp::{FeatureMap, InitialStates, MdpDims, PsModel, RewardNoise, SegmentModel};

/// `(step, leaf, action)`, all 0-based. Steps range over `D..Hbar+D`, the
/// steps at which a leaf can be occupied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LeafTriple {
    pub h: usize,
    pub leaf: usize,
    pub action: usize,
}

/// Picks the boosted triple of segments with `i_k = 1`.
///
/// The adversary in the lower-bound argument picks the triple the evaluated
/// policy visits least; a generator cannot know that policy, so the choice is
/// supplied here.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TildeRule {
    /// Lexicographically least triple other than the good one.
    #[default]
    Lexicographic,
    Fixed(LeafTriple),
    /// One triple per segment.
    PerSegment(Vec<LeafTriple>),
}

/// The tree instance: waiting state, `A`-ary tree of depth `D-1`, good and
/// bad absorbing states.
///
/// State layout: `0` waiting, `1..=S-3` tree nodes in breadth-first order
/// (`1` is the root), `S-2` good, `S-1` bad.
#[derive(Clone, Debug)]
pub struct HardInstanceTabular {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub depth: usize,
    pub leaves: usize,
    /// `H/3`, rounded down.
    pub h_bar: usize,
    pub index: Vec<bool>,
    pub epsilons: Vec<f64>,
    pub tilde: Vec<Option<LeafTriple>>,
    pub model: PsModel,
}

impl HardInstanceTabular {
    pub fn waiting(&self) -> usize {
        0
    }

    pub fn root(&self) -> usize {
        1
    }

    pub fn good(&self) -> usize {
        self.states - 2
    }

    pub fn bad(&self) -> usize {
        self.states - 1
    }

    pub fn leaf_state(&self, leaf: usize) -> usize {
        1 + (self.states - 3 - self.leaves) + leaf
    }

    /// The triple boosted by `1/2 + eps` in every segment.
    pub fn good_triple(&self) -> LeafTriple {
        LeafTriple {
            h: self.depth,
            leaf: 0,
            action: 0,
        }
    }

    /// `(H - Hbar - D) (1/2 + eps)`, the optimal value of a segment with `i_k = 0`.
    pub fn closed_form_value(&self, k: usize) -> f64 {
        (self.horizon - self.h_bar - self.depth) as f64 * (0.5 + self.epsilons[k])
    }
}

/// `D` with `S - 3 = (A^D - 1)/(A - 1)`, if it exists.
pub fn tree_depth(states: usize, actions: usize) -> Option<usize> {
    if states < 6 || actions < 2 {
        return None;
    }
    let target = states - 3;
    let (mut total, mut level, mut depth) = (0usize, 1usize, 0usize);
    while total < target {
        total = total.checked_add(level)?;
        level = level.checked_mul(actions)?;
        depth += 1;
    }
    (total == target).then_some(depth)
}

/// `[16 + 8 L_k / (A L Hbar - 1)]^{-1/2}`
pub fn hard_epsilon(segment_len: usize, actions: usize, leaves: usize, h_bar: usize) -> f64 {
    let triples = (actions * leaves * h_bar) as f64 - 1.0;
    (16.0 + 8.0 * segment_len as f64 / triples).powf(-0.5)
}

fn equal_segments(episodes: usize, changes: usize) -> Result<(usize, Vec<usize>), EnvError> {
    let n = changes + 1;
    if episodes == 0 || !episodes.is_multiple_of(n) {
        return Err(EnvError::Spec(format!(
            "hard instances need T divisible by N_T + 1, got T={episodes} N_T={changes}"
        )));
    }
    let len = episodes / n;
    Ok((len, (1..n).map(|k| 1 + k * len).collect()))
}

pub fn build_tabular_hard_instance(
    states: usize,
    actions: usize,
    horizon: usize,
    changes: usize,
    episodes: usize,
    index: &[bool],
    tilde_rule: &TildeRule,
) -> Result<HardInstanceTabular, EnvError> {
    let depth = tree_depth(states, actions).ok_or_else(|| {
        EnvError::Spec(format!(
            "need S >= 6, A >= 2 and S - 3 = (A^D - 1)/(A - 1); got S={states} A={actions}"
        ))
    })?;
    if horizon < 3 * depth {
        return Err(EnvError::Spec(format!("need H >= 3D = {}, got H={horizon}", 3 * depth)));
    }
    if index.len() != changes + 1 {
        return Err(EnvError::Spec(format!(
            "index vector has {} entries, expected N_T + 1 = {}",
            index.len(),
            changes + 1
        )));
    }
    let (len, change_points) = equal_segments(episodes, changes)?;
    let leaves = actions.pow(depth as u32 - 1);
    let h_bar = horizon / 3;
    let (ns, na, hz) = (states, actions, horizon);
    let first_leaf = 1 + (states - 3 - leaves);
    let (good, bad) = (ns - 2, ns - 1);
    let good_triple = LeafTriple { h: depth, leaf: 0, action: 0 };
    let in_range = |t: &LeafTriple| {
        t.h >= depth && t.h < h_bar + depth && t.leaf < leaves && t.action < na && *t != good_triple
    };

    let mut rewards = vec![0.0; hz * ns * na];
    for h in h_bar + depth..hz {
        for a in 0..na {
            rewards[(h * ns + good) * na + a] = 1.0;
        }
    }
    // kernel without the leaf biases
    let mut base = vec![0.0; hz * ns * na * ns];
    for h in 0..hz {
        for s in 0..ns {
            for a in 0..na {
                let idx = (h * ns + s) * na + a;
                let row = &mut base[idx * ns..(idx + 1) * ns];
                if s == 0 {
                    // 1-based steps below Hbar may wait; step Hbar forces the move
                    if a == 0 || h + 1 >= h_bar {
                        row[1] = 1.0;
                    } else {
                        row[0] = 1.0;
                    }
                } else if s == good || s == bad {
                    row[s] = 1.0;
                } else if s >= first_leaf {
                    row[good] = 0.5;
                    row[bad] = 0.5;
                } else {
                    // tree node n = s - 1 has children A n + 1 + a
                    row[1 + na * (s - 1) + 1 + a] = 1.0;
                }
            }
        }
    }
    let set_leaf = |trans: &mut [f64], t: LeafTriple, eps: f64| {
        let idx = (t.h * ns + first_leaf + t.leaf) * na + t.action;
        trans[idx * ns + good] = 0.5 + eps;
        trans[idx * ns + bad] = 0.5 - eps;
    };

    let mut epsilons = Vec::with_capacity(index.len());
    let mut tilde = Vec::with_capacity(index.len());
    let mut segments: Vec<Arc<SegmentModel>> = Vec::with_capacity(index.len());
    for (k, &bit) in index.iter().enumerate() {
        let eps = hard_epsilon(len, na, leaves, h_bar);
        let mut trans = base.clone();
        set_leaf(&mut trans, good_triple, eps);
        let boosted = if bit {
            let t = match tilde_rule {
                TildeRule::Lexicographic => LeafTriple { h: depth, leaf: 0, action: 1 },
                TildeRule::Fixed(t) => *t,
                TildeRule::PerSegment(ts) => *ts.get(k).ok_or_else(|| {
                    EnvError::Spec(format!("tilde rule lists {} triples, need {}", ts.len(), index.len()))
                })?,
            };
            if !in_range(&t) {
                return Err(EnvError::Spec(format!("tilde triple {t:?} is not a non-good leaf triple")));
            }
            set_leaf(&mut trans, t, 2.0 * eps);
            Some(t)
        } else {
            None
        };
        let seg = SegmentModel::tabular(ns, na, hz, rewards.clone(), trans)?;
        // identical consecutive segments share storage
        match segments.last() {
            Some(prev) if **prev == seg => segments.push(Arc::clone(prev)),
            _ => segments.push(Arc::new(seg)),
        }
        epsilons.push(eps);
        tilde.push(boosted);
    }
    let dims = MdpDims::tabular(ns, na, hz, episodes)?;
    let model = PsModel::new(
        dims,
        Arc::new(FeatureMap::one_hot(ns, na)?),
        change_points,
        segments,
        InitialStates::Fixed(0),
        RewardNoise::Deterministic,
    )?;
    Ok(HardInstanceTabular {
        states,
        actions,
        horizon,
        depth,
        leaves,
        h_bar,
        index: index.to_vec(),
        epsilons,
        tilde,
        model,
    })
}

/// The linear-bandit chain: `x_1..x_H` then absorbing `x_{H+1}` (no reward)
/// and `x_{H+2}` (reward 1), stored as states `0..H+2`.
///
/// Features have dimension `d + 2`: `(1, a)/sqrt(d)` on chain states and one
/// indicator per absorbing state. This is exactly linear; it differs from the
/// textbook kernel only at chain states off their own step, which `x_1`
/// never reaches.
#[derive(Clone, Debug)]
pub struct HardInstanceLinear {
    pub d: usize,
    pub horizon: usize,
    pub iota: f64,
    pub delta: f64,
    /// `signs[k][h][j]` for `h < H/2`, `j < d-1`.
    pub signs: Vec<Vec<Vec<bool>>>,
    pub features: Arc<FeatureMap>,
    pub model: PsModel,
}

impl HardInstanceLinear {
    pub fn action_count(&self) -> usize {
        1 << (self.d - 1)
    }

    /// `iota + <mu_h^{(k)}, a>`
    pub fn exit_probability(&self, k: usize, h: usize, action: usize) -> f64 {
        self.iota + mu_dot(&self.signs[k], self.delta, h, action, self.d)
    }
}

/// Action index bit `j` set means coordinate `j` is `+1`.
pub fn action_vector(action: usize, d: usize) -> Vec<f64> {
    (0..d - 1).map(|j| if action >> j & 1 == 1 { 1.0 } else { -1.0 }).collect()
}

fn mu_dot(signs: &[Vec<bool>], delta: f64, h: usize, action: usize, d: usize) -> f64 {
    let Some(row) = signs.get(h) else {
        return 0.0;
    };
    action_vector(action, d)
        .iter()
        .zip(row)
        .map(|(x, &s)| x * if s { delta } else { -delta })
        .sum()
}

/// `(1/(4 sqrt 2)) sqrt((N_T+1)/(H T))`
pub fn linear_amplitude(horizon: usize, episodes: usize, changes: usize) -> f64 {
    ((changes + 1) as f64 / (horizon * episodes) as f64).sqrt() / (4.0 * 2f64.sqrt())
}

pub fn random_sign_vectors<R: Rng + ?Sized>(d: usize, horizon: usize, changes: usize, rng: &mut R) -> Vec<Vec<Vec<bool>>> {
    (0..=changes)
        .map(|_| (0..horizon / 2).map(|_| (0..d - 1).map(|_| rng.random()).collect()).collect())
        .collect()
}

pub fn build_linear_hard_instance(
    d: usize,
    horizon: usize,
    episodes: usize,
    changes: usize,
    signs: Vec<Vec<Vec<bool>>>,
) -> Result<HardInstanceLinear, EnvError> {
    if d < 4 || horizon < 4 || !horizon.is_multiple_of(2) {
        return Err(EnvError::Spec(format!("need d >= 4 and even H >= 4, got d={d} H={horizon}")));
    }
    if d > 20 {
        return Err(EnvError::Spec(format!("2^(d-1) actions is too many for d={d}")));
    }
    // T >= (d-1)^2 H (N_T+1) / 8, kept in integers
    if 8 * episodes < (d - 1) * (d - 1) * horizon * (changes + 1) {
        return Err(EnvError::Spec(format!(
            "need T >= (d-1)^2 H (N_T+1)/8 = {}, got T={episodes}",
            ((d - 1) * (d - 1) * horizon * (changes + 1)) as f64 / 8.0
        )));
    }
    let shape_ok = signs.len() == changes + 1
        && signs.iter().all(|k| k.len() == horizon / 2 && k.iter().all(|h| h.len() == d - 1));
    if !shape_ok {
        return Err(EnvError::Spec("sign vectors must be (N_T+1) x H/2 x (d-1)".into()));
    }
    let (_, change_points) = equal_segments(episodes, changes)?;
    let iota = 1.0 / horizon as f64;
    let delta = linear_amplitude(horizon, episodes, changes);
    let na = 1usize << (d - 1);
    let ns = horizon + 2;
    let dim = d + 2;
    let (absorb, goal) = (horizon, horizon + 1);

    let scale = 1.0 / (d as f64).sqrt();
    let mut rows = vec![0.0; ns * na * dim];
    for s in 0..ns {
        for a in 0..na {
            let phi = &mut rows[(s * na + a) * dim..(s * na + a + 1) * dim];
            if s == absorb {
                phi[d] = 1.0;
            } else if s == goal {
                phi[d + 1] = 1.0;
            } else {
                phi[0] = scale;
                for (j, x) in action_vector(a, d).into_iter().enumerate() {
                    phi[1 + j] = x * scale;
                }
            }
        }
    }
    let features = Arc::new(FeatureMap::new(ns, na, dim, rows)?);
    let root_d = (d as f64).sqrt();

    let mut segments = Vec::with_capacity(changes + 1);
    for seg_signs in &signs {
        let mut theta = vec![0.0; horizon * dim];
        let mut mu = vec![0.0; horizon * dim * ns];
        for h in 0..horizon {
            theta[h * dim + d + 1] = 1.0;
            let block = &mut mu[h * dim * ns..(h + 1) * dim * ns];
            block[h + 1] = root_d * (1.0 - iota);
            block[goal] = root_d * iota;
            if let Some(row) = seg_signs.get(h) {
                for (j, &sg) in row.iter().enumerate() {
                    let m = if sg { delta } else { -delta };
                    block[(1 + j) * ns + goal] = root_d * m;
                    block[(1 + j) * ns + h + 1] = -root_d * m;
                }
            }
            block[d * ns + absorb] = 1.0;
            block[(d + 1) * ns + goal] = 1.0;
        }
        segments.push(Arc::new(SegmentModel::from_linear(&features, horizon, theta, mu)?));
    }
    let dims = MdpDims::new(ns, na, horizon, episodes, dim)?;
    let model = PsModel::new(
        dims,
        Arc::clone(&features),
        change_points,
        segments,
        InitialStates::Fixed(0),
        RewardNoise::Deterministic,
    )?;
    Ok(HardInstanceLinear {
        d,
        horizon,
        iota,
        delta,
        signs,
        features,
        model,
    })
}
