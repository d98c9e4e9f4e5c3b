//! Simulation core for reinforcement-learning driven critical scenario
//! generation: a 2D driving world, a rule-based driving stack under test,
//! collision-probability metrics, the scenario action space and a DDQN
//! learner with prioritized replay.

pub mod actions;
pub mod ads;
pub mod agent;
pub mod error;
pub mod geometry;
pub mod safety;
pub mod scalar;
pub mod world;

pub use error::{Error, Result};
pub use scalar::Real;

/// Safety parameters in double precision.
pub type SafetyParams64 = safety::SafetyParams<f64>;

/// Q-network used by the scenario generator.
pub type QNetwork = agent::Mlp<f64>;
/// Single-precision Q-network.
pub type QNetwork32 = agent::Mlp<f32>;
/// Scenario-generation agent in double precision.
pub type Agent = agent::DdqnAgent<f64>;
