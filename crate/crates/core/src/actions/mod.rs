//! The discrete scenario action space and its application to the world.

mod catalog;
mod env;
mod spawn;

pub use catalog::{action, enumerate_actions, Action, ActionKind, ACTION_COUNT, FIRST_NPC_ACTION, FIRST_PEDESTRIAN_ACTION};
pub use env::{
    legal_time_successors, CrossingDirection, DistMode, EnvironmentConfig, LaneRel, Level, NpcBehavior, NpcSpec,
    PedestrianSpec, TimeOfDay, VehicleColor, VehicleSize, VehicleType, WeatherPhenomenon, MAX_WALKING_SPEED,
};
pub use spawn::{
    apply_action, legal_action_mask, on_map, required_deceleration, spawn_distance, validate_realism, ActionOutcome,
    DistanceTable, Realism, RealismBudget, RejectReason, SpawnCandidate, SpawnConfig, SpawnWeights, SpawnedActor,
};
