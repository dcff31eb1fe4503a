use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::SimRng;

/// Where change points come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChangeSchedule {
    /// Given change episodes, strictly increasing in `[2, T]`.
    Explicit { change_points: Vec<usize> },
    /// `n` changes spread as evenly as possible.
    Even { changes: usize },
    /// Segment lengths i.i.d. geometric with `p = T^{-xi}`.
    Geometric { xi: f64 },
}

impl ChangeSchedule {
    pub fn change_points(&self, episodes: usize, rng: &mut SimRng) -> Result<Vec<usize>, EnvError> {
        let cps = match self {
            ChangeSchedule::Explicit { change_points } => change_points.clone(),
            ChangeSchedule::Even { changes } => evenly_spaced_changepoints(episodes, *changes)?,
            ChangeSchedule::Geometric { xi } => sample_geometric_changepoints(episodes, *xi, rng)?,
        };
        check_changepoints(&cps, episodes)?;
        Ok(cps)
    }
}

pub fn check_changepoints(cps: &[usize], episodes: usize) -> Result<(), EnvError> {
    let mut prev = 1;
    for &nu in cps {
        if nu <= prev || nu > episodes {
            return Err(EnvError::Spec(format!(
                "change points must be strictly increasing within [2, {episodes}]"
            )));
        }
        prev = nu;
    }
    Ok(())
}

/// `nu_k = 1 + floor(k T / (n+1))`, so segment lengths differ by at most one.
pub fn evenly_spaced_changepoints(episodes: usize, changes: usize) -> Result<Vec<usize>, EnvError> {
    if changes >= episodes {
        return Err(EnvError::Spec(format!("{changes} changes do not fit in {episodes} episodes")));
    }
    Ok((1..=changes).map(|k| 1 + k * episodes / (changes + 1)).collect())
}

/// Geometric segment-length parameter `T^{-xi}`.
pub fn geometric_parameter(episodes: usize, xi: f64) -> f64 {
    (episodes as f64).powf(-xi).min(1.0)
}

/// Accumulates i.i.d. `Geometric(p)` lengths (support `>= 1`) from episode 1 and
/// keeps the boundaries that land inside `[2, T]`.
pub fn sample_geometric_changepoints<R: Rng + ?Sized>(
    episodes: usize,
    xi: f64,
    rng: &mut R,
) -> Result<Vec<usize>, EnvError> {
    if episodes == 0 || !xi.is_finite() || xi < 0.0 {
        return Err(EnvError::Spec(format!("geometric schedule needs T >= 1 and xi >= 0, got T={episodes} xi={xi}")));
    }
    let p = geometric_parameter(episodes, xi);
    let geo = Geometric::new(p).map_err(|e| EnvError::Spec(e.to_string()))?;
    let mut cps = Vec::new();
    let mut start = 1usize;
    loop {
        let len = geo.sample(rng).saturating_add(1);
        start = start.saturating_add(len as usize);
        if start > episodes {
            break;
        }
        cps.push(start);
    }
    Ok(cps)
}
