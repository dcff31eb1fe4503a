use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{optimal_values, EpisodePolicy, Environment, MdpError, SegmentModel, ValueTable};

/// How the per-episode regret term is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegretMode {
    /// `V*_1(s1) - V^pi_1(s1)` for the episode's policy snapshot.
    #[default]
    Expected,
    /// `V*_1(s1) - realized return`.
    Realized,
}

impl RegretMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegretMode::Expected => "expected",
            RegretMode::Realized => "realized",
        }
    }
}

/// Optimal values for the current model, recomputed only when the
/// environment's segment key changes.
#[derive(Debug, Default)]
pub struct OracleCache {
    key: Option<usize>,
    segment: Option<Arc<SegmentModel>>,
    table: Option<Arc<ValueTable>>,
    solves: usize,
}

impl OracleCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// The segment in force at episode `t` together with its optimal values.
    pub fn lookup(&mut self, env: &dyn Environment, t: usize) -> (Arc<SegmentModel>, Arc<ValueTable>) {
        let key = env.segment_key(t);
        if self.key != Some(key) {
            let seg = env.segment(t);
            self.table = Some(Arc::new(optimal_values(&seg)));
            self.segment = Some(seg);
            self.key = Some(key);
            self.solves += 1;
        }
        (
            Arc::clone(self.segment.as_ref().unwrap()),
            Arc::clone(self.table.as_ref().unwrap()),
        )
    }

    /// Number of `optimal_values` invocations so far.
    pub fn solves(&self) -> usize {
        self.solves
    }
}

/// Cumulative expected dynamic regret of a sequence of episode policies
/// `(t, policy)`; the start state of episode `t` comes from the environment.
pub fn dynamic_regret<'a, I>(env: &dyn Environment, episodes: I) -> Result<Vec<f64>, MdpError>
where
    I: IntoIterator<Item = (usize, &'a EpisodePolicy)>,
{
    let mut cache = OracleCache::new();
    let mut total = 0.0;
    let mut out = Vec::new();
    for (t, policy) in episodes {
        let (seg, table) = cache.lookup(env, t);
        let s1 = env.initial_state(t);
        total += table.v(0, s1) - policy.value(&seg, s1)?;
        out.push(total);
    }
    Ok(out)
}
