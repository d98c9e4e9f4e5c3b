//! Experiment harness: episode runner, policies, training and evaluation,
//! JSON-lines traces with replay, and metric reports.

pub mod config;
pub mod episode;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod policy;
pub mod replay;
pub mod stats;
pub mod trace;

pub use config::{EpisodeSettings, ExperimentConfig, PolicyKind};
pub use episode::run_episode;
pub use error::{HarnessError, Result};
pub use experiment::{run_evaluation, run_training};
pub use metrics::{compare, MetricsReport};
pub use replay::{replay, Divergence};
pub use trace::{EpisodeTrace, TerminalCause};
