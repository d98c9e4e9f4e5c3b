use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::geometry::Vec2;
use crate::world::road::{LaneId, RoadNetwork};

/// Fixed simulation tick, seconds.
pub const TICK_DT: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActorId(pub u32);

impl ActorId {
    pub const EGO: ActorId = ActorId(0);
}

impl fmt::Display for ActorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorKind {
    Ego,
    NpcSmall,
    NpcLarge,
    Pedestrian,
}

impl ActorKind {
    /// (half_length, half_width) in meters.
    pub fn footprint(self) -> (f64, f64) {
        match self {
            ActorKind::Ego | ActorKind::NpcSmall => (2.3, 0.9),
            ActorKind::NpcLarge => (5.0, 1.25),
            ActorKind::Pedestrian => (0.3, 0.3),
        }
    }

    pub fn is_vehicle(self) -> bool {
        !matches!(self, ActorKind::Pedestrian)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActorState {
    pub id: ActorId,
    pub kind: ActorKind,
    pub position: Vec2,
    /// radians, counter-clockwise from +x
    pub heading: f64,
    /// m/s, never negative
    pub speed: f64,
    /// m/s²
    pub acceleration: f64,
    /// `None` when the actor is off every lane (pedestrian on a sidewalk).
    pub lane_id: Option<LaneId>,
    pub half_length: f64,
    pub half_width: f64,
}

impl ActorState {
    pub fn new(id: ActorId, kind: ActorKind, position: Vec2, heading: f64, speed: f64) -> Self {
        let (half_length, half_width) = kind.footprint();
        ActorState {
            id,
            kind,
            position,
            heading,
            speed,
            acceleration: 0.0,
            lane_id: None,
            half_length,
            half_width,
        }
    }

    pub fn direction(&self) -> Vec2 {
        Vec2::from_angle(self.heading)
    }

    pub fn velocity(&self) -> Vec2 {
        self.direction() * self.speed
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite()
            && self.heading.is_finite()
            && self.speed.is_finite()
            && self.acceleration.is_finite()
            && self.half_length.is_finite()
            && self.half_width.is_finite()
    }

    pub fn with_lane(mut self, road: &RoadNetwork) -> Self {
        self.lane_id = road.lane_at(self.position, self.half_width);
        self
    }
}

/// Actuator command: throttle and brake in [0, 1], steer in [-1, 1].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Control {
    pub throttle: f64,
    pub brake: f64,
    pub steer: f64,
}

impl Control {
    pub const COAST: Control = Control {
        throttle: 0.0,
        brake: 0.0,
        steer: 0.0,
    };

    pub fn full_brake(steer: f64) -> Self {
        Control {
            throttle: 0.0,
            brake: 1.0,
            steer,
        }
    }
}

/// Kinematic bicycle model limits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleLimits {
    /// Peak acceleration at full throttle, m/s².
    pub max_accel: f64,
    /// Peak deceleration at full brake, m/s².
    pub max_brake: f64,
    pub wheelbase: f64,
    /// Steering angle at |steer| = 1, radians.
    pub max_steer: f64,
    pub speed_cap: f64,
}

impl Default for VehicleLimits {
    fn default() -> Self {
        VehicleLimits {
            max_accel: 3.0,
            max_brake: 6.0,
            wheelbase: 2.7,
            max_steer: 0.6,
            speed_cap: 30.0,
        }
    }
}

/// Advances a vehicle one step with the kinematic bicycle model, then
/// re-resolves its lane against `road`.
pub fn step_actor(
    state: &ActorState,
    control: Control,
    dt: f64,
    limits: &VehicleLimits,
    road: &RoadNetwork,
) -> Result<ActorState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::NumericDomain(format!("dt must be positive, got {dt}")));
    }
    ensure_finite("control", &[control.throttle, control.brake, control.steer])?;
    if !state.is_finite() {
        return Err(Error::NumericDomain(format!("actor {} state is not finite", state.id)));
    }
    let throttle = control.throttle.clamp(0.0, 1.0);
    let brake = control.brake.clamp(0.0, 1.0);
    let steer = control.steer.clamp(-1.0, 1.0);

    let accel_cmd = throttle * limits.max_accel - brake * limits.max_brake;
    let speed = (state.speed + accel_cmd * dt).clamp(0.0, limits.speed_cap);
    let yaw_rate = state.speed / limits.wheelbase * (steer * limits.max_steer).tan();
    let heading = state.heading + yaw_rate * dt;
    let mid_heading = 0.5 * (state.heading + heading);
    let avg_speed = 0.5 * (state.speed + speed);
    let position = state.position + Vec2::from_angle(mid_heading) * (avg_speed * dt);

    let next = ActorState {
        position,
        heading,
        speed,
        acceleration: (speed - state.speed) / dt,
        ..*state
    };
    Ok(next.with_lane(road))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::road::{build_road, LayoutId};

    fn ego_at_origin(speed: f64) -> (ActorState, RoadNetwork) {
        let road = build_road(LayoutId::MultiLaneCrossroad);
        let s = ActorState::new(ActorId::EGO, ActorKind::Ego, road.origin, 0.0, speed).with_lane(&road);
        (s, road)
    }

    #[test]
    fn coasting_keeps_speed() {
        let (s, road) = ego_at_origin(10.0);
        let n = step_actor(&s, Control::COAST, 1.0, &VehicleLimits::default(), &road).unwrap();
        assert_eq!(n.speed, 10.0);
        assert_eq!(n.position, s.position + Vec2::new(10.0, 0.0));
        assert_eq!(n.acceleration, 0.0);
    }

    #[test]
    fn braking_at_rest_stays_at_rest() {
        let (s, road) = ego_at_origin(0.0);
        let n = step_actor(&s, Control::full_brake(0.0), 1.0, &VehicleLimits::default(), &road).unwrap();
        assert_eq!(n.speed, 0.0);
        assert_eq!(n.position, s.position);
    }

    #[test]
    fn half_second_full_brake_from_ten() {
        let (s, road) = ego_at_origin(10.0);
        let n = step_actor(&s, Control::full_brake(0.0), 0.5, &VehicleLimits::default(), &road).unwrap();
        assert_eq!(n.speed, 7.0);
    }

    #[test]
    fn speed_is_capped() {
        let (s, road) = ego_at_origin(29.9);
        let c = Control { throttle: 1.0, ..Control::COAST };
        let n = step_actor(&s, c, 1.0, &VehicleLimits::default(), &road).unwrap();
        assert_eq!(n.speed, 30.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (s, road) = ego_at_origin(5.0);
        let lim = VehicleLimits::default();
        assert!(step_actor(&s, Control::COAST, 0.0, &lim, &road).is_err());
        let c = Control { steer: f64::NAN, ..Control::COAST };
        assert!(step_actor(&s, c, 0.1, &lim, &road).is_err());
        let bad = ActorState { heading: f64::INFINITY, ..s };
        assert!(matches!(
            step_actor(&bad, Control::COAST, 0.1, &lim, &road),
            Err(Error::NumericDomain(_))
        ));
    }

    #[test]
    fn steering_turns_left() {
        let (s, road) = ego_at_origin(10.0);
        let c = Control { steer: 0.5, ..Control::COAST };
        let n = step_actor(&s, c, 0.1, &VehicleLimits::default(), &road).unwrap();
        assert!(n.heading > 0.0);
    }
}
