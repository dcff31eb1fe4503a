use serde::{Deserialize, Serialize};

use super::ProbeCollection;
use crate::mdp::SegmentModel;

/// State occupancies under the uniform probing policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachabilityReport {
    /// `occupancy[segment][h][s]`
    pub occupancy: Vec<Vec<Vec<f64>>>,
    /// `(segment, h, s, occupancy)` for every `s` in `S_{e,h}`.
    pub required: Vec<(usize, usize, usize, f64)>,
    /// Smallest required occupancy (1 when nothing is required).
    pub p_m: f64,
    /// Every required state is reached with positive probability.
    pub holds: bool,
}

impl ReachabilityReport {
    /// States reached with positive probability at step `h` in any segment.
    pub fn reachable_states(&self, h: usize) -> Vec<usize> {
        let states = self.occupancy.first().map_or(0, |o| o[h].len());
        (0..states)
            .filter(|&s| self.occupancy.iter().any(|seg| seg[h][s] > 0.0))
            .collect()
    }
}

/// Exact forward propagation of the state distribution from `initial` under
/// `pi_U`: uniform over `A_{e,h}^s` on the probe support, uniform over all
/// actions elsewhere (everywhere when `probes` is `None`).
pub fn estimate_reachability(
    segments: &[&SegmentModel],
    initial: &[(usize, f64)],
    probes: Option<&ProbeCollection>,
) -> ReachabilityReport {
    let mut occupancy = Vec::with_capacity(segments.len());
    let mut required = Vec::new();
    for (k, seg) in segments.iter().enumerate() {
        let (states, actions, horizon) = (seg.states(), seg.actions(), seg.horizon());
        let all: Vec<usize> = (0..actions).collect();
        let mut dist = vec![0.0; states];
        for &(s, w) in initial {
            dist[s] += w;
        }
        let mut per_step = Vec::with_capacity(horizon);
        for h in 0..horizon {
            let mut next = vec![0.0; states];
            for s in 0..states {
                let w = dist[s];
                if w == 0.0 {
                    continue;
                }
                let acts = probes.and_then(|p| p.slice(h).actions_at(s)).unwrap_or(&all);
                let share = w / acts.len() as f64;
                for &a in acts {
                    for (n, &p) in next.iter_mut().zip(seg.transition_row(h, s, a)) {
                        *n += share * p;
                    }
                }
            }
            if let Some(p) = probes {
                for (s, _) in p.slice(h).supports() {
                    required.push((k, h, *s, dist[*s]));
                }
            }
            per_step.push(std::mem::replace(&mut dist, next));
        }
        occupancy.push(per_step);
    }
    let p_m = required.iter().map(|r| r.3).fold(1.0, f64::min);
    ReachabilityReport {
        occupancy,
        holds: p_m > 0.0,
        required,
        p_m,
    }
}
