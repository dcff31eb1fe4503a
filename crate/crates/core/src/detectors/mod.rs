//! Univariate sequential mean-shift detection (GLR and Shiryaev-Roberts).

mod divergence;
mod glr;
mod history;

pub use divergence::{
    bernoulli_kl, gaussian_kl, threshold_anytime, threshold_experimental, CLAMP_EPS, DEFAULT_VARIANCE,
};
pub use glr::{glr_statistic, glr_test, gsr_test, run_test, split_statistic, threshold};
pub use history::ScalarHistory;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DetectorError {
    #[error("{name} = {value} must lie in (0, 1)")]
    Level { name: &'static str, value: f64 },
    #[error("split stride must be at least 1")]
    Stride,
    #[error("Gaussian variance must be positive, got {0}")]
    Variance(f64),
    #[error("clamp epsilon must lie in (0, 1/2), got {0}")]
    Clamp(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Divergence {
    Bernoulli,
    Gaussian { variance: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdRule {
    Anytime,
    Experimental,
}

impl ThresholdRule {
    pub fn value(&self, n: usize, delta: f64) -> f64 {
        match self {
            ThresholdRule::Anytime => threshold_anytime(n, delta),
            ThresholdRule::Experimental => threshold_experimental(n, delta),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    Glr,
    Gsr,
}

/// Which splits `t in 1..n` the statistic is maximised over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitGrid {
    Exhaustive,
    /// Multiples of the stride, plus `n - 1`.
    Stride(usize),
    /// `{n-1, n-2, n-4, ...}`.
    Geometric,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub divergence: Divergence,
    pub threshold: ThresholdRule,
    pub test: TestKind,
    /// False-alarm level.
    pub delta_f: f64,
    /// Detection-reliability level; only used by separation diagnostics.
    pub delta_d: f64,
    pub grid: SplitGrid,
    pub clamp_eps: f64,
    /// Skip the exact scan when a chi-square bound already rules out a trigger.
    /// Trigger decisions are unaffected.
    pub screening: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            divergence: Divergence::Bernoulli,
            threshold: ThresholdRule::Anytime,
            test: TestKind::Glr,
            delta_f: 0.01,
            delta_d: 0.01,
            grid: SplitGrid::Exhaustive,
            clamp_eps: CLAMP_EPS,
            screening: true,
        }
    }
}

impl DetectorConfig {
    /// Experimental profile: `ln(n^{3/2} / delta_F)` with `delta_F = 1/sqrt(T)`, `delta_D = 1/T`.
    pub fn experimental(episodes: usize) -> Self {
        let t = episodes as f64;
        Self {
            threshold: ThresholdRule::Experimental,
            delta_f: 1.0 / t.sqrt(),
            delta_d: 1.0 / t,
            ..Self::default()
        }
    }

    /// Anytime threshold with `delta_F = delta_D = T^{-gamma}`.
    pub fn theory(episodes: usize, gamma: f64) -> Self {
        let delta = (episodes as f64).powf(-gamma);
        Self {
            threshold: ThresholdRule::Anytime,
            delta_f: delta,
            delta_d: delta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        for (name, value) in [("delta_f", self.delta_f), ("delta_d", self.delta_d)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(DetectorError::Level { name, value });
            }
        }
        if self.grid == SplitGrid::Stride(0) {
            return Err(DetectorError::Stride);
        }
        if let Divergence::Gaussian { variance } = self.divergence {
            if !(variance > 0.0) {
                return Err(DetectorError::Variance(variance));
            }
        }
        if !(self.clamp_eps > 0.0 && self.clamp_eps < 0.5) {
            return Err(DetectorError::Clamp(self.clamp_eps));
        }
        Ok(())
    }
}

/// Result of one sequential test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub triggered: bool,
    pub best_split: Option<usize>,
    /// The test statistic, or an upper bound on it below the threshold when `screened`.
    pub best_statistic: f64,
    pub threshold_used: f64,
    pub screened: bool,
}

impl DetectionOutcome {
    fn quiet(threshold_used: f64) -> Self {
        Self {
            triggered: false,
            best_split: None,
            best_statistic: 0.0,
            threshold_used,
            screened: false,
        }
    }

    fn decide(best_statistic: f64, best_split: Option<usize>, threshold_used: f64) -> Self {
        Self {
            triggered: best_statistic >= threshold_used,
            best_split,
            best_statistic,
            threshold_used,
            screened: false,
        }
    }
}

/// A sequential test run on a history each time it grows.
pub trait ChangeDetector: Send {
    fn test(&mut self, history: &ScalarHistory) -> DetectionOutcome;
}

/// The configured GLR or GSR test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detector {
    cfg: DetectorConfig,
}

impl Detector {
    pub fn new(cfg: DetectorConfig) -> Result<Self, DetectorError> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }
}

impl ChangeDetector for Detector {
    fn test(&mut self, history: &ScalarHistory) -> DetectionOutcome {
        run_test(history, &self.cfg)
    }
}
