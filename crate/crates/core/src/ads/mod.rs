//! Rule-based driving stack standing in for the system under test.

mod perception;
mod planner;

pub use perception::PerceptionModel;
pub use planner::{plan_control, Hazard, HazardKind, Plan, PlannerParams};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::actions::EnvironmentConfig;
use crate::error::Result;
use crate::geometry::{Polyline, Vec2};
use crate::world::{ActorState, Control, VehicleLimits, World};

/// Injected localization error larger than this marks localization as lost.
pub const LOCALIZATION_TOLERANCE: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdsParams {
    pub perception: PerceptionModel,
    pub planner: PlannerParams,
    pub vehicle: VehicleLimits,
    /// Per-axis localization noise half-range in clear weather, m.
    pub localization_noise_base: f64,
    /// Extra half-range per rain level step, m.
    pub localization_noise_rain: f64,
    /// Extra half-range per fog level step, m.
    pub localization_noise_fog: f64,
}

impl Default for AdsParams {
    fn default() -> Self {
        AdsParams {
            perception: PerceptionModel::default(),
            planner: PlannerParams::default(),
            vehicle: VehicleLimits::default(),
            localization_noise_base: 0.1,
            localization_noise_rain: 0.15,
            localization_noise_fog: 0.1,
        }
    }
}

impl AdsParams {
    /// Vehicle limits with braking reduced by road wetness.
    pub fn effective_vehicle(&self, env: &EnvironmentConfig) -> VehicleLimits {
        VehicleLimits {
            max_brake: self.vehicle.max_brake * self.perception.braking_multiplier(env),
            ..self.vehicle
        }
    }

    pub fn localization_half_range(&self, env: &EnvironmentConfig) -> f64 {
        self.localization_noise_base
            + self.localization_noise_rain * env.rain.ordinal() as f64
            + self.localization_noise_fog * env.fog.ordinal() as f64
    }
}

/// The twelve internal variables of the driving stack.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InternalState {
    /// m/s
    pub speed: f64,
    /// m/s²
    pub acceleration: f64,
    /// rad, route tangent to vehicle heading
    pub heading_error: f64,
    pub throttle: f64,
    pub brake: f64,
    pub steer: f64,
    /// m, positive to the left of the route
    pub lane_offset: f64,
    /// fraction of the route covered, monotone within an episode
    pub route_progress: f64,
    pub localization_ok: bool,
    /// effective / base sensing range
    pub perception_range_frac: f64,
    pub plan_feasible: bool,
    /// m
    pub control_error: f64,
}

impl InternalState {
    pub const LEN: usize = 12;

    pub fn to_array(&self) -> [f64; Self::LEN] {
        [
            self.speed,
            self.acceleration,
            self.heading_error,
            self.throttle,
            self.brake,
            self.steer,
            self.lane_offset,
            self.route_progress,
            f64::from(u8::from(self.localization_ok)),
            self.perception_range_frac,
            f64::from(u8::from(self.plan_feasible)),
            self.control_error,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Stateful wrapper around [`plan_control`] that owns the route, injects
/// localization noise, and tracks the internal state.
#[derive(Clone, Debug)]
pub struct RuleBasedAds {
    pub params: AdsParams,
    route: Polyline,
    progress: f64,
    last: Option<InternalState>,
}

impl RuleBasedAds {
    pub fn new(params: AdsParams, route: Polyline) -> Self {
        RuleBasedAds {
            params,
            route,
            progress: 0.0,
            last: None,
        }
    }

    pub fn route(&self) -> &Polyline {
        &self.route
    }

    /// One perceive-plan cycle. Consumes two uniform draws for localization
    /// noise, then one per other actor for detection.
    pub fn tick<R: Rng + ?Sized>(&mut self, world: &World, env: &EnvironmentConfig, rng: &mut R) -> Result<Control> {
        let half = self.params.localization_half_range(env);
        let noise = Vec2::new(rng.gen_range(-half..=half), rng.gen_range(-half..=half));
        let others = world.others();
        let perceived = self.params.perception.sense(&others, env, &world.ego, rng);
        let believed = ActorState {
            position: world.ego.position + noise,
            ..world.ego
        };
        let vehicle = self.params.vehicle;
        let plan = plan_control(
            &perceived,
            &self.route,
            &believed,
            world.road.speed_limit,
            &vehicle,
            &self.params.planner,
        )?;
        let usable_brake = self.params.effective_vehicle(env).max_brake;
        self.progress = self.progress.max((plan.route_s / self.route.length()).clamp(0.0, 1.0));
        self.last = Some(InternalState {
            speed: world.ego.speed,
            acceleration: world.ego.acceleration,
            heading_error: plan.heading_error,
            throttle: plan.control.throttle,
            brake: plan.control.brake,
            steer: plan.control.steer,
            lane_offset: plan.lane_offset,
            route_progress: self.progress,
            localization_ok: noise.norm() <= LOCALIZATION_TOLERANCE,
            perception_range_frac: self.params.perception.range_multiplier(env),
            plan_feasible: plan.hazard.is_none_or(|h| h.required_decel <= usable_brake),
            control_error: plan.cross_track,
        });
        Ok(plan.control)
    }

    /// Internal state after the most recent [`tick`](Self::tick); all zeros
    /// with nominal flags before the first one.
    pub fn internal_state(&self) -> InternalState {
        self.last.unwrap_or(InternalState {
            localization_ok: true,
            plan_feasible: true,
            perception_range_frac: 1.0,
            ..InternalState::default()
        })
    }

    pub fn route_progress(&self) -> f64 {
        self.progress
    }
}
