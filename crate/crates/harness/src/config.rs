//! Experiment configuration: a single JSON document, validated on load.

use std::path::{Path, PathBuf};

use darling_core::darling::DarlingConfig;
use darling_core::detectors::DetectorConfig;
use darling_core::envs::{LockLinearSpec, LockTabularSpec, TildeRule};
use darling_core::learners::{LsviConfig, ToqConfig};
use darling_core::mdp::RegretMode;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub envs: Vec<EnvEntry>,
    pub protocols: Vec<Protocol>,
    /// Episode budget `T`.
    pub episodes: usize,
    pub algorithms: Vec<AlgorithmSpec>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub detector: DetectorProfile,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub regret_mode: RegretMode,
    #[serde(default = "default_threads")]
    pub threads: usize,
    /// Record per-episode wall time. Off makes result files byte-identical across runs.
    #[serde(default = "default_true")]
    pub timing: bool,
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

fn default_threads() -> usize {
    1
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvEntry {
    /// Bidirectional diabolical lock.
    Lock {
        label: Option<String>,
        #[serde(default)]
        params: LockTabularSpec,
    },
    /// Linear chain combination lock.
    Chain {
        label: Option<String>,
        #[serde(default)]
        params: LockLinearSpec,
    },
    /// Tabular lower-bound instance; needs the `ps-even` protocol.
    HardTabular {
        label: Option<String>,
        states: usize,
        actions: usize,
        horizon: usize,
        /// Per-segment boost indicators; drawn per seed when absent.
        index: Option<Vec<bool>>,
        #[serde(default)]
        tilde: TildeRule,
    },
    /// Linear lower-bound instance; needs the `ps-even` protocol. Signs are drawn per seed.
    HardLinear {
        label: Option<String>,
        d: usize,
        horizon: usize,
    },
}

impl EnvEntry {
    pub fn label(&self) -> String {
        let (label, kind) = match self {
            EnvEntry::Lock { label, .. } => (label, "lock"),
            EnvEntry::Chain { label, .. } => (label, "chain"),
            EnvEntry::HardTabular { label, .. } => (label, "hard-tabular"),
            EnvEntry::HardLinear { label, .. } => (label, "hard-linear"),
        };
        label.clone().unwrap_or_else(|| kind.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Protocol {
    /// Geometric segment lengths with parameter `T^{-xi}`, redrawn per seed.
    PsGeometric { xi: f64 },
    PsExplicit { change_points: Vec<usize> },
    PsEven { changes: usize },
    /// Gradual drift. `window` spaces the chain lock's keyframes; the tabular
    /// lock drifts once across the whole budget.
    Drift {
        #[serde(default = "default_window")]
        window: usize,
    },
}

fn default_window() -> usize {
    100
}

impl Protocol {
    pub fn label(&self) -> &'static str {
        match self {
            Protocol::PsGeometric { .. } => "ps-geometric",
            Protocol::PsExplicit { .. } => "ps-explicit",
            Protocol::PsEven { .. } => "ps-even",
            Protocol::Drift { .. } => "drift",
        }
    }

    /// Value of the `xi_or_drift` result column.
    pub fn xi_or_drift(&self) -> String {
        match self {
            Protocol::PsGeometric { xi } => format!("{xi}"),
            Protocol::Drift { .. } => "drift".into(),
            Protocol::PsExplicit { change_points } => format!("explicit:{}", change_points.len()),
            Protocol::PsEven { changes } => format!("even:{changes}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Wrapper {
    Bare,
    Darling,
    Periodic,
    Oracle,
}

impl Wrapper {
    pub fn as_str(&self) -> &'static str {
        match self {
            Wrapper::Bare => "bare",
            Wrapper::Darling => "darling",
            Wrapper::Periodic => "periodic",
            Wrapper::Oracle => "oracle",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LearnerSpec {
    Toq {
        #[serde(default)]
        params: ToqConfig,
    },
    Lsvi {
        #[serde(default)]
        params: LsviConfig,
    },
}

impl LearnerSpec {
    pub fn as_str(&self) -> &'static str {
        match self {
            LearnerSpec::Toq { .. } => "toq",
            LearnerSpec::Lsvi { .. } => "lsvi",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    /// Defaults to `<wrapper>-<learner>`.
    pub label: Option<String>,
    pub wrapper: Wrapper,
    pub learner: LearnerSpec,
    /// Periodic restart window; the budget rule `ceil(c sqrt(T/(N_T+1)))` when absent.
    pub window: Option<usize>,
    #[serde(default = "default_window_c")]
    pub window_c: f64,
    #[serde(default)]
    pub darling: DarlingConfig,
}

fn default_window_c() -> f64 {
    1.0
}

impl AlgorithmSpec {
    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| format!("{}-{}", self.wrapper.as_str(), self.learner.as_str()))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DetectorProfile {
    /// `delta_F = 1/sqrt(T)` with the experimental threshold.
    #[default]
    Experimental,
    /// Anytime threshold with `delta = T^{-gamma}`.
    Theory { gamma: f64 },
    Custom { config: DetectorConfig },
}

impl DetectorProfile {
    pub fn resolve(&self, episodes: usize) -> DetectorConfig {
        match self {
            DetectorProfile::Experimental => DetectorConfig::experimental(episodes),
            DetectorProfile::Theory { gamma } => DetectorConfig::theory(episodes, *gamma),
            DetectorProfile::Custom { config } => *config,
        }
    }
}

/// Command-line overrides, applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seeds: Option<Vec<u64>>,
    /// Keep only algorithms with these labels.
    pub algos: Option<Vec<String>>,
    /// Keep only environments with these labels.
    pub envs: Option<Vec<String>>,
    /// Replace every protocol by a single geometric one.
    pub xi: Option<f64>,
    pub episodes: Option<usize>,
    pub regret_mode: Option<RegretMode>,
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), HarnessError> {
        if let Some(out) = &o.out {
            self.out_dir = out.clone();
        }
        if let Some(seeds) = &o.seeds {
            self.seeds = seeds.clone();
        }
        if let Some(keep) = &o.algos {
            for want in keep {
                if !self.algorithms.iter().any(|a| &a.label() == want) {
                    return Err(HarnessError::Config(format!("no algorithm labelled {want:?}")));
                }
            }
            self.algorithms.retain(|a| keep.contains(&a.label()));
        }
        if let Some(keep) = &o.envs {
            for want in keep {
                if !self.envs.iter().any(|e| &e.label() == want) {
                    return Err(HarnessError::Config(format!("no environment labelled {want:?}")));
                }
            }
            self.envs.retain(|e| keep.contains(&e.label()));
        }
        if let Some(xi) = o.xi {
            self.protocols = vec![Protocol::PsGeometric { xi }];
        }
        if let Some(t) = o.episodes {
            self.episodes = t;
        }
        if let Some(m) = o.regret_mode {
            self.regret_mode = m;
        }
        if let Some(n) = o.threads {
            self.threads = n;
        }
        Ok(())
    }

    /// Checks that do not need to build anything.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.episodes < 3 {
            return bad(format!("episodes must be at least 3, got {}", self.episodes));
        }
        if self.envs.is_empty() || self.protocols.is_empty() || self.algorithms.is_empty() || self.seeds.is_empty() {
            return bad("envs, protocols, algorithms and seeds must all be non-empty".into());
        }
        if self.threads == 0 {
            return bad("threads must be positive".into());
        }
        unique(self.envs.iter().map(EnvEntry::label), "environment")?;
        unique(self.algorithms.iter().map(AlgorithmSpec::label), "algorithm")?;
        unique(self.seeds.iter().map(|s| s.to_string()), "seed")?;
        for p in &self.protocols {
            match p {
                Protocol::PsGeometric { xi } if !(xi.is_finite() && *xi >= 0.0) => {
                    return bad(format!("xi must be finite and non-negative, got {xi}"))
                }
                Protocol::Drift { window: 0 } => return bad("drift window must be positive".into()),
                _ => {}
            }
        }
        for a in &self.algorithms {
            if a.window == Some(0) || !(a.window_c > 0.0) {
                return bad(format!("{}: restart window must be positive", a.label()));
            }
        }
        unique(self.protocols.iter().map(|p| format!("{} {}", p.label(), p.xi_or_drift())), "protocol")?;
        for e in &self.envs {
            let hard = matches!(e, EnvEntry::HardTabular { .. } | EnvEntry::HardLinear { .. });
            if hard && self.protocols.iter().any(|p| !matches!(p, Protocol::PsEven { .. })) {
                return bad(format!("{} only supports the ps-even protocol", e.label()));
            }
        }
        self.detector
            .resolve(self.episodes)
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }
}

fn unique(items: impl Iterator<Item = String>, what: &str) -> Result<(), HarnessError> {
    let mut seen = std::collections::BTreeSet::new();
    for item in items {
        if !seen.insert(item.clone()) {
            return Err(HarnessError::Config(format!("duplicate {what} {item:?}")));
        }
    }
    Ok(())
}
