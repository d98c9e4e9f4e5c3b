use std::fmt;

use serde::{Deserialize, Serialize};

use crate::world::ActorId;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    #[default]
    None,
    Light,
    Moderate,
    High,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::None, Level::Light, Level::Moderate, Level::High];

    pub fn ordinal(self) -> u8 {
        self as u8
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeOfDay {
    #[default]
    Morning,
    Noon,
    Night,
}

impl TimeOfDay {
    pub fn ordinal(self) -> u8 {
        self as u8
    }

    /// The only non-identity move allowed from `self`.
    pub fn advanced(self) -> TimeOfDay {
        match self {
            TimeOfDay::Morning => TimeOfDay::Noon,
            TimeOfDay::Noon => TimeOfDay::Night,
            TimeOfDay::Night => TimeOfDay::Morning,
        }
    }
}

/// Times of day reachable in one step from `t` (including staying put).
pub fn legal_time_successors(t: TimeOfDay) -> [TimeOfDay; 2] {
    [t, t.advanced()]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeatherPhenomenon {
    Rain,
    Fog,
    Wetness,
}

impl WeatherPhenomenon {
    pub const ALL: [WeatherPhenomenon; 3] = [
        WeatherPhenomenon::Rain,
        WeatherPhenomenon::Fog,
        WeatherPhenomenon::Wetness,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NpcBehavior {
    DriveAhead,
    Overtake,
    DriveOpposite,
    CrossRoad,
    LaneChange,
}

impl NpcBehavior {
    pub const ALL: [NpcBehavior; 5] = [
        NpcBehavior::DriveAhead,
        NpcBehavior::Overtake,
        NpcBehavior::DriveOpposite,
        NpcBehavior::CrossRoad,
        NpcBehavior::LaneChange,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneRel {
    Current,
    Left,
    Right,
}

impl LaneRel {
    pub const ALL: [LaneRel; 3] = [LaneRel::Current, LaneRel::Left, LaneRel::Right];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistMode {
    Near,
    Far,
}

impl DistMode {
    pub const ALL: [DistMode; 2] = [DistMode::Near, DistMode::Far];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleSize {
    Small,
    Large,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleType {
    Jeep,
    Sedan,
    Suv,
    Hatchback,
    BoxTruck,
    SchoolBus,
}

impl VehicleType {
    pub const ALL: [VehicleType; 6] = [
        VehicleType::Jeep,
        VehicleType::Sedan,
        VehicleType::Suv,
        VehicleType::Hatchback,
        VehicleType::BoxTruck,
        VehicleType::SchoolBus,
    ];

    pub fn size(self) -> VehicleSize {
        match self {
            VehicleType::BoxTruck | VehicleType::SchoolBus => VehicleSize::Large,
            _ => VehicleSize::Small,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleColor {
    White,
    Black,
    Red,
    Blue,
    Silver,
    Yellow,
}

impl VehicleColor {
    pub const ALL: [VehicleColor; 6] = [
        VehicleColor::White,
        VehicleColor::Black,
        VehicleColor::Red,
        VehicleColor::Blue,
        VehicleColor::Silver,
        VehicleColor::Yellow,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingDirection {
    LeftToRight,
    RightToLeft,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NpcSpec {
    pub actor_id: ActorId,
    pub behavior: NpcBehavior,
    pub lane_rel: LaneRel,
    pub dist_mode: DistMode,
    pub size: VehicleSize,
    pub vehicle_type: VehicleType,
    pub color: VehicleColor,
    /// m/s, within [10, 20] and the road speed limit
    pub speed: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PedestrianSpec {
    pub actor_id: ActorId,
    pub crossing_direction: CrossingDirection,
    /// m/s, within (0, 1.4]
    pub speed: f64,
    pub spawn_distance_ahead: f64,
}

/// Walking pace ceiling for pedestrians, m/s.
pub const MAX_WALKING_SPEED: f64 = 1.4;

/// External parameter assignment: weather, daylight and the active roster.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentConfig {
    pub rain: Level,
    pub fog: Level,
    pub wetness: Level,
    pub time_of_day: TimeOfDay,
    pub npcs: Vec<NpcSpec>,
    pub pedestrians: Vec<PedestrianSpec>,
}

impl EnvironmentConfig {
    pub fn level(&self, phenomenon: WeatherPhenomenon) -> Level {
        match phenomenon {
            WeatherPhenomenon::Rain => self.rain,
            WeatherPhenomenon::Fog => self.fog,
            WeatherPhenomenon::Wetness => self.wetness,
        }
    }

    pub fn set_level(&mut self, phenomenon: WeatherPhenomenon, level: Level) {
        match phenomenon {
            WeatherPhenomenon::Rain => self.rain = level,
            WeatherPhenomenon::Fog => self.fog = level,
            WeatherPhenomenon::Wetness => self.wetness = level,
        }
    }

    /// Drops roster entries whose actors are no longer in the world.
    pub fn retain_alive(&mut self, alive: impl Fn(ActorId) -> bool) {
        self.npcs.retain(|n| alive(n.actor_id));
        self.pedestrians.retain(|p| alive(p.actor_id));
    }

    /// Checks value invariants against roster caps.
    pub fn check(&self, max_npcs: usize, max_pedestrians: usize, speed_limit: f64) -> Result<(), String> {
        if self.npcs.len() > max_npcs {
            return Err(format!("{} NPCs exceed cap {max_npcs}", self.npcs.len()));
        }
        if self.pedestrians.len() > max_pedestrians {
            return Err(format!(
                "{} pedestrians exceed cap {max_pedestrians}",
                self.pedestrians.len()
            ));
        }
        for n in &self.npcs {
            if !(10.0..=20.0).contains(&n.speed) || n.speed > speed_limit {
                return Err(format!("NPC {} speed {} out of bounds", n.actor_id, n.speed));
            }
            if n.vehicle_type.size() != n.size {
                return Err(format!("NPC {} type/size mismatch", n.actor_id));
            }
        }
        for p in &self.pedestrians {
            if !(p.speed > 0.0 && p.speed <= MAX_WALKING_SPEED) {
                return Err(format!("pedestrian {} speed {} out of bounds", p.actor_id, p.speed));
            }
        }
        Ok(())
    }
}

impl fmt::Display for EnvironmentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rain={:?} fog={:?} wetness={:?} time={:?} npcs={} peds={}",
            self.rain,
            self.fog,
            self.wetness,
            self.time_of_day,
            self.npcs.len(),
            self.pedestrians.len()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chronological_successors() {
        assert_eq!(legal_time_successors(TimeOfDay::Morning), [TimeOfDay::Morning, TimeOfDay::Noon]);
        assert_eq!(legal_time_successors(TimeOfDay::Noon), [TimeOfDay::Noon, TimeOfDay::Night]);
        assert_eq!(legal_time_successors(TimeOfDay::Night), [TimeOfDay::Night, TimeOfDay::Morning]);
        assert!(!legal_time_successors(TimeOfDay::Noon).contains(&TimeOfDay::Morning));
    }

    #[test]
    fn large_types() {
        let large: Vec<_> = VehicleType::ALL
            .into_iter()
            .filter(|t| t.size() == VehicleSize::Large)
            .collect();
        assert_eq!(large, vec![VehicleType::BoxTruck, VehicleType::SchoolBus]);
    }

    #[test]
    fn default_env_is_clear_morning() {
        let env = EnvironmentConfig::default();
        assert_eq!(env.rain, Level::None);
        assert_eq!(env.time_of_day, TimeOfDay::Morning);
        assert!(env.check(6, 2, 15.0).is_ok());
    }
}
