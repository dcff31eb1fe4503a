use serde::{Deserialize, Serialize};

use super::MdpError;

/// Sizes of an episodic MDP experiment.
///
/// `feature_dim` equals `states * actions` whenever the one-hot map is used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MdpDims {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub episodes: usize,
    pub feature_dim: usize,
}

impl MdpDims {
    pub fn new(
        states: usize,
        actions: usize,
        horizon: usize,
        episodes: usize,
        feature_dim: usize,
    ) -> Result<Self, MdpError> {
        if states == 0 || actions == 0 || horizon == 0 || episodes == 0 || feature_dim == 0 {
            return Err(MdpError::ZeroDimension);
        }
        Ok(Self {
            states,
            actions,
            horizon,
            episodes,
            feature_dim,
        })
    }

    /// Dimensions for a tabular model viewed through the one-hot feature map.
    pub fn tabular(
        states: usize,
        actions: usize,
        horizon: usize,
        episodes: usize,
    ) -> Result<Self, MdpError> {
        Self::new(states, actions, horizon, episodes, states * actions)
    }

    pub fn pairs(&self) -> usize {
        self.states * self.actions
    }
}

/// A total feature map `(state, action) -> R^d` over a finite state-action space.
///
/// Rows are stored densely in row-major `(s, a)` order. Identical rows share a
/// class id so learners can evaluate each distinct feature once.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    states: usize,
    actions: usize,
    dim: usize,
    rows: Vec<f64>,
    class_of: Vec<usize>,
    class_reps: Vec<usize>,
    one_hot: bool,
}

const NORM_TOL: f64 = 1e-12;

impl FeatureMap {
    /// Builds a map from a dense `(S*A) x d` row-major matrix.
    pub fn new(states: usize, actions: usize, dim: usize, rows: Vec<f64>) -> Result<Self, MdpError> {
        if states == 0 || actions == 0 || dim == 0 {
            return Err(MdpError::ZeroDimension);
        }
        if rows.len() != states * actions * dim {
            return Err(MdpError::ShapeMismatch {
                what: "feature rows",
                expected: states * actions * dim,
                got: rows.len(),
            });
        }
        for (pair, row) in rows.chunks_exact(dim).enumerate() {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !norm.is_finite() || norm > 1.0 + NORM_TOL {
                return Err(MdpError::FeatureNorm {
                    state: pair / actions,
                    action: pair % actions,
                    norm,
                });
            }
        }
        let one_hot = dim == states * actions
            && rows
                .chunks_exact(dim)
                .enumerate()
                .all(|(pair, row)| row.iter().enumerate().all(|(j, &x)| x == if j == pair { 1.0 } else { 0.0 }));

        let mut class_of = Vec::with_capacity(states * actions);
        let mut class_reps: Vec<usize> = Vec::new();
        for pair in 0..states * actions {
            let row = &rows[pair * dim..(pair + 1) * dim];
            let found = class_reps
                .iter()
                .position(|&rep| &rows[rep * dim..(rep + 1) * dim] == row);
            match found {
                Some(c) => class_of.push(c),
                None => {
                    class_of.push(class_reps.len());
                    class_reps.push(pair);
                }
            }
        }
        Ok(Self {
            states,
            actions,
            dim,
            rows,
            class_of,
            class_reps,
            one_hot,
        })
    }

    /// The canonical tabular map `phi(s, a) = e_{s*A + a}`.
    pub fn one_hot(states: usize, actions: usize) -> Result<Self, MdpError> {
        let pairs = states * actions;
        let latents: Vec<usize> = (0..pairs).collect();
        Self::from_latent_indices(states, actions, pairs, &latents)
    }

    /// Each pair selects a single latent coordinate: `phi(s, a) = e_{latent[s*A + a]}`.
    pub fn from_latent_indices(
        states: usize,
        actions: usize,
        dim: usize,
        latents: &[usize],
    ) -> Result<Self, MdpError> {
        if latents.len() != states * actions {
            return Err(MdpError::ShapeMismatch {
                what: "latent indices",
                expected: states * actions,
                got: latents.len(),
            });
        }
        let mut rows = vec![0.0; states * actions * dim];
        for (pair, &j) in latents.iter().enumerate() {
            if j >= dim {
                return Err(MdpError::IndexOutOfRange {
                    what: "latent index",
                    index: j,
                    bound: dim,
                });
            }
            rows[pair * dim + j] = 1.0;
        }
        Self::new(states, actions, dim, rows)
    }

    #[inline]
    pub fn phi(&self, state: usize, action: usize) -> &[f64] {
        let pair = state * self.actions + action;
        &self.rows[pair * self.dim..(pair + 1) * self.dim]
    }

    #[inline]
    pub fn pair_index(&self, state: usize, action: usize) -> usize {
        state * self.actions + action
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    /// True when this is exactly the identity map over `(s, a)` pairs.
    pub fn is_one_hot(&self) -> bool {
        self.one_hot
    }

    /// Id of the distinct feature row used by `(s, a)`.
    #[inline]
    pub fn class_of(&self, state: usize, action: usize) -> usize {
        self.class_of[state * self.actions + action]
    }

    pub fn class_count(&self) -> usize {
        self.class_reps.len()
    }

    /// Feature row of a class.
    pub fn class_row(&self, class: usize) -> &[f64] {
        let pair = self.class_reps[class];
        &self.rows[pair * self.dim..(pair + 1) * self.dim]
    }

    /// If every row is a standard basis vector, its coordinate per pair.
    pub fn latent_indices(&self) -> Option<Vec<usize>> {
        self.rows
            .chunks_exact(self.dim)
            .map(|row| {
                let mut hit = None;
                for (j, &x) in row.iter().enumerate() {
                    if x == 1.0 && hit.is_none() {
                        hit = Some(j);
                    } else if x != 0.0 {
                        return None;
                    }
                }
                hit
            })
            .collect()
    }
}
