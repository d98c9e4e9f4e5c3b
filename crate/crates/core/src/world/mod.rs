//! Deterministic 2D road world: layouts, kinematic actors, collisions.

pub mod actor;
pub mod collision;
pub mod road;
pub mod traffic;

pub use actor::{step_actor, ActorId, ActorKind, ActorState, Control, VehicleLimits, TICK_DT};
pub use collision::{detect_collision, trajectory_intersection, RayCrossing};
pub use road::{build_road, CrossStreet, Corridor, Lane, LaneId, LayoutId, RoadNetwork, LANE_WIDTH};
pub use traffic::{Contact, Participant, RailPlan, World};
