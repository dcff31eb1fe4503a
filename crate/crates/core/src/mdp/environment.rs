use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{FeatureMap, MdpDims, MdpError, RewardNoise, SegmentModel};

/// Start state of each episode, fixed in advance (oblivious adversary).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialStates {
    Fixed(usize),
    /// Episode `t` (1-based) starts in `states[(t - 1) % len]`.
    Cycle(Vec<usize>),
}

impl InitialStates {
    pub fn at(&self, t: usize) -> usize {
        match self {
            InitialStates::Fixed(s) => *s,
            InitialStates::Cycle(states) => states[(t.max(1) - 1) % states.len()],
        }
    }

    /// Distinct start states with their long-run frequencies.
    pub fn distribution(&self) -> Vec<(usize, f64)> {
        match self {
            InitialStates::Fixed(s) => vec![(*s, 1.0)],
            InitialStates::Cycle(states) => {
                let mut out: Vec<(usize, f64)> = Vec::new();
                let w = 1.0 / states.len() as f64;
                for &s in states {
                    match out.iter_mut().find(|(x, _)| *x == s) {
                        Some(entry) => entry.1 += w,
                        None => out.push((s, w)),
                    }
                }
                out
            }
        }
    }

    fn validate(&self, states: usize) -> Result<(), MdpError> {
        let bad = match self {
            InitialStates::Fixed(s) => (*s >= states).then_some(*s),
            InitialStates::Cycle(list) => {
                if list.is_empty() {
                    return Err(MdpError::InvalidParameter("empty initial-state cycle".into()));
                }
                list.iter().copied().find(|&s| s >= states)
            }
        };
        match bad {
            Some(index) => Err(MdpError::IndexOutOfRange {
                what: "initial state",
                index,
                bound: states,
            }),
            None => Ok(()),
        }
    }
}

/// A non-stationary episodic environment, as seen by runners and the regret oracle.
///
/// Episodes are 1-based. `segment_key(t)` changes exactly when the model changes,
/// so oracle values can be cached per key.
pub trait Environment: Send + Sync {
    fn dims(&self) -> MdpDims;
    fn features(&self) -> &FeatureMap;
    fn segment(&self, t: usize) -> Arc<SegmentModel>;
    fn segment_key(&self, t: usize) -> usize;
    fn initial_state(&self, t: usize) -> usize;
    fn initial_states(&self) -> &InitialStates;
    fn reward_noise(&self) -> RewardNoise;
    /// Ground-truth abrupt change episodes; empty for drifting environments.
    fn change_points(&self) -> &[usize];
    /// Distinct models an oracle must solve over the full horizon.
    fn distinct_models(&self) -> usize;
}

fn check_segment(seg: &SegmentModel, dims: &MdpDims) -> Result<(), MdpError> {
    if (seg.states(), seg.actions(), seg.horizon()) != (dims.states, dims.actions, dims.horizon) {
        return Err(MdpError::ShapeMismatch {
            what: "segment dimensions",
            expected: dims.states * dims.actions * dims.horizon,
            got: seg.states() * seg.actions() * seg.horizon(),
        });
    }
    Ok(())
}

/// Piecewise-stationary model: change points `nu_1 < ... < nu_N` in `[2, T]` and
/// one segment per stationary piece.
#[derive(Clone, Debug)]
pub struct PsModel {
    dims: MdpDims,
    change_points: Vec<usize>,
    segments: Vec<Arc<SegmentModel>>,
    initial_states: InitialStates,
    reward_noise: RewardNoise,
    features: Arc<FeatureMap>,
}

impl PsModel {
    pub fn new(
        dims: MdpDims,
        features: Arc<FeatureMap>,
        change_points: Vec<usize>,
        segments: Vec<Arc<SegmentModel>>,
        initial_states: InitialStates,
        reward_noise: RewardNoise,
    ) -> Result<Self, MdpError> {
        if segments.len() != change_points.len() + 1 {
            return Err(MdpError::SegmentCount {
                segments: segments.len(),
                change_points: change_points.len(),
            });
        }
        let mut prev = 1;
        for &nu in &change_points {
            if nu <= prev || nu > dims.episodes {
                return Err(MdpError::ChangePoints(format!(
                    "change points must be strictly increasing within [2, {}], got {:?}",
                    dims.episodes, change_points
                )));
            }
            prev = nu;
        }
        if (features.states(), features.actions(), features.dim())
            != (dims.states, dims.actions, dims.feature_dim)
        {
            return Err(MdpError::ShapeMismatch {
                what: "feature map",
                expected: dims.pairs() * dims.feature_dim,
                got: features.states() * features.actions() * features.dim(),
            });
        }
        for seg in &segments {
            check_segment(seg, &dims)?;
        }
        initial_states.validate(dims.states)?;
        Ok(Self {
            dims,
            change_points,
            segments,
            initial_states,
            reward_noise,
            features,
        })
    }

    /// A single-segment model.
    pub fn stationary(
        dims: MdpDims,
        features: Arc<FeatureMap>,
        segment: SegmentModel,
        initial_states: InitialStates,
        reward_noise: RewardNoise,
    ) -> Result<Self, MdpError> {
        Self::new(dims, features, Vec::new(), vec![Arc::new(segment)], initial_states, reward_noise)
    }

    /// 0-based index `k` with `nu_k <= t < nu_{k+1}` (`nu_0 = 1`).
    pub fn segment_index(&self, t: usize) -> usize {
        self.change_points.partition_point(|&nu| nu <= t)
    }

    pub fn segments(&self) -> &[Arc<SegmentModel>] {
        &self.segments
    }

    pub fn with_initial_states(mut self, initial_states: InitialStates) -> Result<Self, MdpError> {
        initial_states.validate(self.dims.states)?;
        self.initial_states = initial_states;
        Ok(self)
    }
}

impl Environment for PsModel {
    fn dims(&self) -> MdpDims {
        self.dims
    }

    fn features(&self) -> &FeatureMap {
        &self.features
    }

    fn segment(&self, t: usize) -> Arc<SegmentModel> {
        Arc::clone(&self.segments[self.segment_index(t)])
    }

    fn segment_key(&self, t: usize) -> usize {
        self.segment_index(t)
    }

    fn initial_state(&self, t: usize) -> usize {
        self.initial_states.at(t)
    }

    fn initial_states(&self) -> &InitialStates {
        &self.initial_states
    }

    fn reward_noise(&self) -> RewardNoise {
        self.reward_noise
    }

    fn change_points(&self) -> &[usize] {
        &self.change_points
    }

    fn distinct_models(&self) -> usize {
        self.segments.len()
    }
}

/// Gradually drifting model: piecewise-linear interpolation between keyframe
/// segments placed at increasing episodes. Before the first keyframe and after
/// the last one the model is constant.
#[derive(Clone, Debug)]
pub struct DriftModel {
    dims: MdpDims,
    keyframes: Vec<(usize, Arc<SegmentModel>)>,
    initial_states: InitialStates,
    reward_noise: RewardNoise,
    features: Arc<FeatureMap>,
}

impl DriftModel {
    pub fn new(
        dims: MdpDims,
        features: Arc<FeatureMap>,
        keyframes: Vec<(usize, Arc<SegmentModel>)>,
        initial_states: InitialStates,
        reward_noise: RewardNoise,
    ) -> Result<Self, MdpError> {
        if keyframes.is_empty() {
            return Err(MdpError::InvalidParameter("drift needs at least one keyframe".into()));
        }
        if keyframes.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(MdpError::InvalidParameter(
                "drift keyframes must be strictly increasing".into(),
            ));
        }
        for (_, seg) in &keyframes {
            check_segment(seg, &dims)?;
        }
        initial_states.validate(dims.states)?;
        Ok(Self {
            dims,
            keyframes,
            initial_states,
            reward_noise,
            features,
        })
    }

    fn locate(&self, t: usize) -> (usize, f64) {
        let i = self.keyframes.partition_point(|(at, _)| *at <= t);
        if i == 0 {
            return (0, 0.0);
        }
        if i == self.keyframes.len() {
            return (i - 1, 0.0);
        }
        let (t0, t1) = (self.keyframes[i - 1].0, self.keyframes[i].0);
        (i - 1, (t - t0) as f64 / (t1 - t0) as f64)
    }
}

impl Environment for DriftModel {
    fn dims(&self) -> MdpDims {
        self.dims
    }

    fn features(&self) -> &FeatureMap {
        &self.features
    }

    fn segment(&self, t: usize) -> Arc<SegmentModel> {
        let (i, lambda) = self.locate(t);
        if lambda == 0.0 {
            return Arc::clone(&self.keyframes[i].1);
        }
        let mixed = self.keyframes[i]
            .1
            .convex_combination(&self.keyframes[i + 1].1, lambda)
            .expect("convex combination of valid segments is valid");
        Arc::new(mixed)
    }

    fn segment_key(&self, t: usize) -> usize {
        let first = self.keyframes[0].0;
        let last = self.keyframes[self.keyframes.len() - 1].0;
        t.clamp(first, last)
    }

    fn initial_state(&self, t: usize) -> usize {
        self.initial_states.at(t)
    }

    fn initial_states(&self) -> &InitialStates {
        &self.initial_states
    }

    fn reward_noise(&self) -> RewardNoise {
        self.reward_noise
    }

    fn change_points(&self) -> &[usize] {
        &[]
    }

    fn distinct_models(&self) -> usize {
        let first = self.keyframes[0].0;
        let last = self.keyframes[self.keyframes.len() - 1].0;
        let end = self.dims.episodes.clamp(first, last);
        let start = 1usize.clamp(first, last);
        end - start + 1
    }
}
