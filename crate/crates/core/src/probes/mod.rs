//! Probe collections, identifiability checks and separation diagnostics.

mod reach;
mod separation;

pub use reach::{estimate_reachability, ReachabilityReport};
pub use separation::{separation_requirements, SeparationInputs, SeparationReport};

use serde::{Deserialize, Serialize};

use crate::mdp::{FeatureMap, SegmentModel};

/// Pivot tolerance for numerical rank.
pub const RANK_TOL: f64 = 1e-9;
/// Smallest visible change in a probed mean.
pub const VISIBLE_TOL: f64 = 1e-9;

/// Probed pairs at one step, with the exploration supports they induce.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSlice {
    pub h: usize,
    pairs: Vec<(usize, usize)>,
    rank: usize,
    /// `(s, A_{e,h}^s)` in order of first appearance.
    supports: Vec<(usize, Vec<usize>)>,
    /// Dense `state -> index into supports`.
    support_index: Vec<Option<usize>>,
}

impl ProbeSlice {
    /// A slice from pairs whose features are assumed independent.
    fn from_pairs(h: usize, states: usize, pairs: Vec<(usize, usize)>, rank: usize) -> Self {
        let mut supports: Vec<(usize, Vec<usize>)> = Vec::new();
        let mut support_index: Vec<Option<usize>> = vec![None; states];
        for &(s, a) in &pairs {
            match support_index[s] {
                Some(i) => supports[i].1.push(a),
                None => {
                    support_index[s] = Some(supports.len());
                    supports.push((s, vec![a]));
                }
            }
        }
        Self {
            h,
            pairs,
            rank,
            supports,
            support_index,
        }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// `rho_h`
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `S_{e,h}` with their action sets.
    pub fn supports(&self) -> &[(usize, Vec<usize>)] {
        &self.supports
    }

    /// `A_{e,h}^s` if `s` is in the exploration support.
    #[inline]
    pub fn actions_at(&self, s: usize) -> Option<&[usize]> {
        self.support_index
            .get(s)
            .copied()
            .flatten()
            .map(|i| self.supports[i].1.as_slice())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeCollection {
    slices: Vec<ProbeSlice>,
}

impl ProbeCollection {
    pub fn new(slices: Vec<ProbeSlice>) -> Self {
        Self { slices }
    }

    pub fn slices(&self) -> &[ProbeSlice] {
        &self.slices
    }

    pub fn slice(&self, h: usize) -> &ProbeSlice {
        &self.slices[h]
    }

    /// `|P| = sum_h rho_h`
    pub fn total_pairs(&self) -> usize {
        self.slices.iter().map(|s| s.pairs.len()).sum()
    }

    /// `N_e = max_{h,s} |A_{e,h}^s|`
    pub fn n_e(&self) -> usize {
        self.slices
            .iter()
            .flat_map(|sl| sl.supports.iter().map(|(_, a)| a.len()))
            .max()
            .unwrap_or(0)
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.slices.iter().map(|s| s.rank).collect()
    }
}

/// Full coverage `P_h = S x A` under one-hot features.
pub fn tabular_probes(states: usize, actions: usize, horizon: usize) -> ProbeCollection {
    let pairs: Vec<(usize, usize)> = (0..states).flat_map(|s| (0..actions).map(move |a| (s, a))).collect();
    let slices = (0..horizon)
        .map(|h| ProbeSlice::from_pairs(h, states, pairs.clone(), states * actions))
        .collect();
    ProbeCollection::new(slices)
}

/// Incremental row-echelon basis used for rank tests.
#[derive(Clone, Debug, Default)]
struct EchelonBasis {
    rows: Vec<(usize, Vec<f64>)>,
}

impl EchelonBasis {
    /// Adds `v` if it is independent of the basis; returns whether it was added.
    fn insert(&mut self, v: &[f64]) -> bool {
        let mut r = v.to_vec();
        for (p, row) in &self.rows {
            let f = r[*p] / row[*p];
            if f != 0.0 {
                for (x, y) in r.iter_mut().zip(row) {
                    *x -= f * y;
                }
            }
        }
        let (mut pivot, mut size) = (0, 0.0);
        for (j, &x) in r.iter().enumerate() {
            if x.abs() > size {
                size = x.abs();
                pivot = j;
            }
        }
        if size > RANK_TOL {
            self.rows.push((pivot, r));
            true
        } else {
            false
        }
    }
}

/// Numerical rank of a set of vectors (Gaussian elimination with partial pivoting).
pub fn matrix_rank(rows: &[&[f64]]) -> usize {
    let mut basis = EchelonBasis::default();
    rows.iter().filter(|r| basis.insert(r)).count()
}

/// Keeps each candidate whose feature strictly increases the rank of those kept,
/// stopping at rank `d`.
pub fn greedy_probe_selection(features: &FeatureMap, candidates: &[(usize, usize)], h: usize) -> ProbeSlice {
    let mut basis = EchelonBasis::default();
    let mut kept = Vec::new();
    for &(s, a) in candidates {
        if kept.len() == features.dim() {
            break;
        }
        if basis.insert(features.phi(s, a)) {
            kept.push((s, a));
        }
    }
    let rank = kept.len();
    ProbeSlice::from_pairs(h, features.states(), kept, rank)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Identifiability {
    Detectable,
    Invisible,
}

impl Identifiability {
    fn from_bool(visible: bool) -> Self {
        if visible {
            Identifiability::Detectable
        } else {
            Identifiability::Invisible
        }
    }

    pub fn is_detectable(&self) -> bool {
        *self == Identifiability::Detectable
    }
}

/// A reward-parameter change `delta` is visible iff some probed pair has
/// `|phi(s, a)^T delta| > tol`.
pub fn check_reward_identifiability(slice: &ProbeSlice, features: &FeatureMap, delta: &[f64]) -> Identifiability {
    Identifiability::from_bool(slice.pairs.iter().any(|&(s, a)| {
        let v: f64 = features.phi(s, a).iter().zip(delta).map(|(x, y)| x * y).sum();
        v.abs() > VISIBLE_TOL
    }))
}

/// Whether the reward means of two segments differ on a probed pair.
pub fn reward_change_visible(slice: &ProbeSlice, before: &SegmentModel, after: &SegmentModel) -> Identifiability {
    Identifiability::from_bool(
        slice
            .pairs
            .iter()
            .any(|&(s, a)| (before.reward(slice.h, s, a) - after.reward(slice.h, s, a)).abs() > VISIBLE_TOL),
    )
}

/// `E[phi(s', a')]` under `P_h(. | s, a)`.
fn successor_feature(features: &FeatureMap, seg: &SegmentModel, h: usize, s: usize, a: usize, a_ref: usize) -> Vec<f64> {
    let mut out = vec![0.0; features.dim()];
    for (next, &p) in seg.transition_row(h, s, a).iter().enumerate() {
        if p != 0.0 {
            for (o, x) in out.iter_mut().zip(features.phi(next, a_ref)) {
                *o += p * x;
            }
        }
    }
    out
}

/// A kernel change is visible iff some probed pair, coordinate `j` and
/// reference action `a'` see a different expected successor feature.
pub fn check_transition_identifiability(
    slice: &ProbeSlice,
    features: &FeatureMap,
    before: &SegmentModel,
    after: &SegmentModel,
    reference_actions: &[usize],
) -> Identifiability {
    Identifiability::from_bool(slice.pairs.iter().any(|&(s, a)| {
        reference_actions.iter().any(|&a_ref| {
            let x = successor_feature(features, before, slice.h, s, a, a_ref);
            let y = successor_feature(features, after, slice.h, s, a, a_ref);
            x.iter().zip(&y).any(|(p, q)| (p - q).abs() > VISIBLE_TOL)
        })
    }))
}

/// Reward and transition visibility of a change over every slice of a collection.
pub fn classify_change(
    probes: &ProbeCollection,
    features: &FeatureMap,
    before: &SegmentModel,
    after: &SegmentModel,
) -> (Identifiability, Identifiability) {
    let refs: Vec<usize> = (0..features.actions()).collect();
    let reward = probes
        .slices
        .iter()
        .any(|sl| reward_change_visible(sl, before, after).is_detectable());
    let transition = probes
        .slices
        .iter()
        .any(|sl| check_transition_identifiability(sl, features, before, after, &refs).is_detectable());
    (Identifiability::from_bool(reward), Identifiability::from_bool(transition))
}
