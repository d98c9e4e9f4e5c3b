use std::fmt;
use std::path::Path;
use std::str::FromStr;

use critgen_core::actions::SpawnConfig;
use critgen_core::ads::AdsParams;
use critgen_core::agent::{Ablation, DdqnConfig};
use critgen_core::world::LayoutId;
use critgen_core::SafetyParams64;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Which policy drives the action choices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// The learned DDQN agent.
    #[default]
    Agent,
    /// Uniform choice among legal actions.
    Random,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Agent => "agent",
            PolicyKind::Random => "random",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "agent" | "ddqn" | "avastra" => Ok(PolicyKind::Agent),
            "random" | "random_search" | "random-search" => Ok(PolicyKind::Random),
            other => Err(HarnessError::Validation(format!("unknown policy '{other}'"))),
        }
    }
}

/// Which episode traces get kept.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    None,
    #[default]
    Collisions,
    All,
}

/// Parameters that fully determine one episode given its seed and layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeSettings {
    pub otp_seconds: f64,
    pub max_actions: usize,
    pub r_col: f64,
    pub ablation: Ablation,
    pub ads: AdsParams,
    pub spawn: SpawnConfig,
    pub safety: SafetyParams64,
}

impl Default for EpisodeSettings {
    fn default() -> Self {
        EpisodeSettings {
            otp_seconds: 6.0,
            max_actions: 12,
            r_col: 2.0,
            ablation: Ablation::Full,
            ads: AdsParams::default(),
            spawn: SpawnConfig::default(),
            safety: SafetyParams64::default(),
        }
    }
}

impl EpisodeSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Validation(m));
        if !(self.otp_seconds > 0.0 && self.otp_seconds.is_finite()) {
            return bad(format!("otp_seconds must be positive, got {}", self.otp_seconds));
        }
        if self.ticks_per_action() == 0 {
            return bad("otp_seconds shorter than one simulation tick".into());
        }
        if self.max_actions == 0 {
            return bad("max_actions must be positive".into());
        }
        if !(self.r_col > 1.0 && self.r_col.is_finite()) {
            return bad(format!("r_col must exceed 1, got {}", self.r_col));
        }
        if !self.ads.perception.is_valid() {
            return bad("perception multipliers must lie in (0, 1]".into());
        }
        self.safety.validate()?;
        Ok(())
    }

    pub fn ticks_per_action(&self) -> usize {
        (self.otp_seconds / critgen_core::world::TICK_DT).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Layouts cycled through during training.
    pub train_layouts: Vec<LayoutId>,
    /// Layouts evaluated, each for `eval_episodes` episodes.
    pub eval_layouts: Vec<LayoutId>,
    /// Training episodes.
    pub episodes: usize,
    pub eval_episodes: usize,
    pub policy: PolicyKind,
    /// Exploration rate held during evaluation.
    pub eval_epsilon: f64,
    /// Gradient steps per environment step during training.
    pub updates_per_step: usize,
    pub episode: EpisodeSettings,
    pub agent: DdqnConfig,
    pub traces: TraceMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            train_layouts: vec![DEFAULT_LAYOUT],
            eval_layouts: vec![DEFAULT_LAYOUT],
            episodes: 200,
            eval_episodes: 100,
            policy: PolicyKind::Agent,
            eval_epsilon: 0.1,
            updates_per_step: 1,
            episode: EpisodeSettings::default(),
            agent: DdqnConfig::default(),
            traces: TraceMode::Collisions,
        }
    }
}

/// Layout used when none is given.
pub const DEFAULT_LAYOUT: LayoutId = LayoutId::LShapedJunction;

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::Validation(m.to_string()));
        if self.episodes == 0 {
            return bad("episodes must be positive");
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be positive");
        }
        if self.train_layouts.is_empty() || self.eval_layouts.is_empty() {
            return bad("layout lists must not be empty");
        }
        if !(0.0..=1.0).contains(&self.eval_epsilon) {
            return bad("eval_epsilon must lie in [0, 1]");
        }
        if self.updates_per_step == 0 {
            return bad("updates_per_step must be positive");
        }
        self.episode.validate()?;
        self.agent.validate()?;
        if self.agent.input_dim != critgen_core::agent::STATE_DIM
            || self.agent.n_actions != critgen_core::actions::ACTION_COUNT
        {
            return bad("agent dimensions must match the state and action spaces");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Mixes `parts` into a seed (splitmix64 finalizer per step).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}
