use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{wrap_angle, Polyline};
use crate::safety::{losd, SafetyParams};
use crate::world::{trajectory_intersection, ActorId, ActorState, Control, VehicleLimits};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    /// Arrival-time gap below which a crossing actor triggers braking, s.
    pub crossing_gap_s: f64,
    /// How far ahead crossing conflicts are considered, s.
    pub crossing_horizon_s: f64,
    pub lookahead_min: f64,
    /// Lookahead seconds at current speed for pure pursuit.
    pub lookahead_time: f64,
    /// Comfortable lateral acceleration in curves, m/s².
    pub lateral_accel_max: f64,
    /// Comfortable deceleration when anticipating curves, m/s².
    pub comfort_decel: f64,
    pub throttle_gain: f64,
    pub brake_gain: f64,
    pub safety: SafetyParams<f64>,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams {
            crossing_gap_s: 1.5,
            crossing_horizon_s: 8.0,
            lookahead_min: 6.0,
            lookahead_time: 0.8,
            lateral_accel_max: 2.5,
            comfort_decel: 2.0,
            throttle_gain: 0.5,
            brake_gain: 0.3,
            safety: SafetyParams::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HazardKind {
    /// Same-lane leader closer than the longitudinal safety distance.
    Leader,
    /// Crossing actor arriving at the conflict point close in time.
    Crossing,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hazard {
    pub obstacle: ActorId,
    pub kind: HazardKind,
    /// Constant deceleration the ego needs to avoid contact, m/s².
    pub required_decel: f64,
}

/// One planning cycle's output plus the diagnostics the internal state
/// exposes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plan {
    pub control: Control,
    pub target_speed: f64,
    pub heading_error: f64,
    /// Signed lateral offset from the route, positive to the left, m.
    pub lane_offset: f64,
    /// Lateral miss of the pure-pursuit target if the heading were held, m.
    pub cross_track: f64,
    /// Arc length of the ego along the route.
    pub route_s: f64,
    pub hazard: Option<Hazard>,
}

fn target_speed(route: &Polyline, s: f64, v: f64, speed_limit: f64, p: &PlannerParams) -> f64 {
    let window = v * v / (2.0 * p.comfort_decel) + 20.0;
    route
        .curvature_samples(s, window)
        .into_iter()
        .filter(|&(_, k)| k > 1e-6)
        .map(|(at, k)| (p.lateral_accel_max / k + 2.0 * p.comfort_decel * (at - s).max(0.0)).sqrt())
        .fold(speed_limit, f64::min)
}

fn worst_hazard(perceived: &[ActorState], ego: &ActorState, p: &PlannerParams) -> Result<Option<Hazard>> {
    let fwd = ego.direction();
    let mut worst: Option<Hazard> = None;
    let mut consider = |h: Hazard| {
        if worst.is_none_or(|w| h.required_decel > w.required_decel) {
            worst = Some(h);
        }
    };
    for o in perceived {
        let rel = o.position - ego.position;
        let ahead = rel.dot(fwd);
        let same_lane = ego.lane_id.is_some() && o.lane_id == ego.lane_id;
        if same_lane && ahead > 0.0 {
            // bumper-to-bumper gap along the ego heading
            let of = o.direction();
            let extent = o.half_length * of.dot(fwd).abs() + o.half_width * of.cross(fwd).abs();
            let gap = ahead - ego.half_length - extent;
            let leader_speed = (o.speed * of.dot(fwd)).max(0.0);
            if gap < losd(ego.speed, leader_speed, &p.safety)? {
                let closing = ego.speed - leader_speed;
                let required_decel = if closing <= 0.0 {
                    0.0
                } else {
                    closing * closing / (2.0 * gap.max(0.01))
                };
                consider(Hazard {
                    obstacle: o.id,
                    kind: HazardKind::Leader,
                    required_decel,
                });
            }
            continue;
        }
        if let Some(c) = trajectory_intersection(ego, o, p.crossing_horizon_s) {
            if (c.t_a - c.t_b).abs() < p.crossing_gap_s {
                let room = c.t_a * ego.speed - ego.half_length - o.half_width;
                consider(Hazard {
                    obstacle: o.id,
                    kind: HazardKind::Crossing,
                    required_decel: ego.speed * ego.speed / (2.0 * room.max(0.01)),
                });
            }
        }
    }
    Ok(worst)
}

/// Rule-based control: pure pursuit along `route`, curve-aware speed
/// tracking, and full braking for leader or crossing hazards. Throttle and
/// brake are never both positive.
pub fn plan_control(
    perceived: &[ActorState],
    route: &Polyline,
    ego: &ActorState,
    speed_limit: f64,
    vehicle: &VehicleLimits,
    p: &PlannerParams,
) -> Result<Plan> {
    let proj = route.project(ego.position);
    let v = ego.speed;
    let lookahead = (p.lookahead_time * v).max(p.lookahead_min);
    let target = route.point_at(proj.s + lookahead);
    let to_target = target - ego.position;
    let alpha = wrap_angle(to_target.angle() - ego.heading);
    let dist = to_target.norm().max(1e-3);
    let delta = (2.0 * vehicle.wheelbase * alpha.sin() / dist).atan();
    let steer = (delta / vehicle.max_steer).clamp(-1.0, 1.0);

    let target_speed = target_speed(route, proj.s, v, speed_limit, p);
    let hazard = worst_hazard(perceived, ego, p)?;
    let control = if hazard.is_some() {
        Control::full_brake(steer)
    } else {
        let err = target_speed - v;
        if err > 0.0 {
            Control {
                throttle: (err * p.throttle_gain).min(1.0),
                brake: 0.0,
                steer,
            }
        } else if err < -0.3 {
            Control {
                throttle: 0.0,
                brake: (-err * p.brake_gain).min(1.0),
                steer,
            }
        } else {
            Control {
                steer,
                ..Control::COAST
            }
        }
    };
    Ok(Plan {
        control,
        target_speed,
        heading_error: wrap_angle(ego.heading - route.heading_at(proj.s)),
        lane_offset: proj.lateral,
        cross_track: dist * alpha.sin().abs(),
        route_s: proj.s,
        hazard,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use crate::world::{build_road, ActorKind, LayoutId, RoadNetwork};
    use std::f64::consts::FRAC_PI_2;

    fn setup(speed: f64) -> (RoadNetwork, ActorState) {
        let road = build_road(LayoutId::MultiLaneCrossroad);
        let ego = ActorState::new(ActorId::EGO, ActorKind::Ego, road.origin, 0.0, speed).with_lane(&road);
        (road, ego)
    }

    fn plan(perceived: &[ActorState], road: &RoadNetwork, ego: &ActorState) -> Plan {
        plan_control(
            perceived,
            road.route_path(),
            ego,
            road.speed_limit,
            &VehicleLimits::default(),
            &PlannerParams::default(),
        )
        .unwrap()
    }

    #[test]
    fn free_road_accelerates() {
        let (road, ego) = setup(5.0);
        let p = plan(&[], &road, &ego);
        assert!(p.control.throttle > 0.0);
        assert_eq!(p.control.brake, 0.0);
        assert!(p.hazard.is_none());
    }

    #[test]
    fn at_limit_holds_without_throttle() {
        let (road, ego) = setup(road_limit());
        let p = plan(&[], &road, &ego);
        assert_eq!(p.control.throttle, 0.0);
        assert_eq!(p.control.brake, 0.0);
    }

    fn road_limit() -> f64 {
        build_road(LayoutId::MultiLaneCrossroad).speed_limit
    }

    #[test]
    fn close_leader_triggers_full_brake() {
        let (road, ego) = setup(15.0);
        // LoSD(15, 5) = (225 - 25)/12 + 5 = 21.67; bumper gap 10 - 4.6 = 5.4
        let leader = ActorState::new(ActorId(1), ActorKind::NpcSmall, ego.position + Vec2::new(10.0, 0.0), 0.0, 5.0)
            .with_lane(&road);
        let p = plan(&[leader], &road, &ego);
        assert_eq!(p.control.brake, 1.0);
        assert_eq!(p.control.throttle, 0.0);
        assert_eq!(p.hazard.unwrap().kind, HazardKind::Leader);
    }

    #[test]
    fn distant_leader_is_ignored() {
        let (road, ego) = setup(15.0);
        let leader = ActorState::new(ActorId(1), ActorKind::NpcSmall, ego.position + Vec2::new(50.0, 0.0), 0.0, 15.0)
            .with_lane(&road);
        assert!(plan(&[leader], &road, &ego).hazard.is_none());
    }

    #[test]
    fn crossing_actor_with_close_arrival_brakes() {
        let (road, ego) = setup(10.0);
        // ego reaches x+30 in 3 s; crosser reaches the same point in 2.5 s
        let crosser = ActorState::new(
            ActorId(2),
            ActorKind::NpcSmall,
            ego.position + Vec2::new(30.0, -25.0),
            FRAC_PI_2,
            10.0,
        )
        .with_lane(&road);
        let p = plan(&[crosser], &road, &ego);
        assert_eq!(p.hazard.unwrap().kind, HazardKind::Crossing);
        assert_eq!(p.control.brake, 1.0);
    }

    #[test]
    fn curve_ahead_lowers_target_speed() {
        let road = build_road(LayoutId::LShapedJunction);
        let route = road.route_path();
        let pos = route.point_at(250.0);
        let ego = ActorState::new(ActorId::EGO, ActorKind::Ego, pos, 0.0, 13.0).with_lane(&road);
        let p = plan(&[], &road, &ego);
        assert!(p.target_speed < 11.5, "target {}", p.target_speed);
    }
}
