use std::fmt;

use serde::{Deserialize, Serialize};

use super::env::{CrossingDirection, DistMode, Level, LaneRel, NpcBehavior, WeatherPhenomenon};

/// Number of discrete actions.
pub const ACTION_COUNT: usize = 45;

/// First NPC spawn index; indices below it configure weather and time.
pub const FIRST_NPC_ACTION: usize = 13;
/// First pedestrian spawn index.
pub const FIRST_PEDESTRIAN_ACTION: usize = 43;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ActionKind {
    SetWeather {
        phenomenon: WeatherPhenomenon,
        level: Level,
    },
    AdvanceTime,
    SpawnNpc {
        behavior: NpcBehavior,
        lane_rel: LaneRel,
        dist_mode: DistMode,
    },
    SpawnPedestrian {
        direction: CrossingDirection,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub index: usize,
    pub kind: ActionKind,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ActionKind::SetWeather { phenomenon, level } => {
                write!(f, "{:>2} set {phenomenon:?} to {level:?}", self.index)
            }
            ActionKind::AdvanceTime => write!(f, "{:>2} advance time of day", self.index),
            ActionKind::SpawnNpc {
                behavior,
                lane_rel,
                dist_mode,
            } => write!(
                f,
                "{:>2} spawn NPC {behavior:?} on {lane_rel:?} lane at {dist_mode:?} distance",
                self.index
            ),
            ActionKind::SpawnPedestrian { direction } => {
                write!(f, "{:>2} spawn pedestrian crossing {direction:?}", self.index)
            }
        }
    }
}

impl Action {
    pub fn is_spawn_npc(&self) -> bool {
        matches!(self.kind, ActionKind::SpawnNpc { .. })
    }

    pub fn is_spawn_pedestrian(&self) -> bool {
        matches!(self.kind, ActionKind::SpawnPedestrian { .. })
    }
}

/// The full action list in its stable order:
///
/// * 0–11: weather, phenomenon-major (Rain, Fog, Wetness) then level
///   (None, Light, Moderate, High)
/// * 12: advance time of day
/// * 13–42: NPC spawns, index `13 + 6·behavior + 2·lane_rel + dist_mode`
///   with behaviors (DriveAhead, Overtake, DriveOpposite, CrossRoad,
///   LaneChange), lanes (Current, Left, Right), distances (Near, Far)
/// * 43, 44: pedestrian crossing left-to-right, right-to-left
pub fn enumerate_actions() -> Vec<Action> {
    let mut kinds = Vec::with_capacity(ACTION_COUNT);
    for phenomenon in WeatherPhenomenon::ALL {
        for level in Level::ALL {
            kinds.push(ActionKind::SetWeather { phenomenon, level });
        }
    }
    kinds.push(ActionKind::AdvanceTime);
    for behavior in NpcBehavior::ALL {
        for lane_rel in LaneRel::ALL {
            for dist_mode in DistMode::ALL {
                kinds.push(ActionKind::SpawnNpc {
                    behavior,
                    lane_rel,
                    dist_mode,
                });
            }
        }
    }
    kinds.push(ActionKind::SpawnPedestrian {
        direction: CrossingDirection::LeftToRight,
    });
    kinds.push(ActionKind::SpawnPedestrian {
        direction: CrossingDirection::RightToLeft,
    });
    kinds
        .into_iter()
        .enumerate()
        .map(|(index, kind)| Action { index, kind })
        .collect()
}

/// Looks up an action by index.
pub fn action(index: usize) -> Option<Action> {
    (index < ACTION_COUNT).then(|| enumerate_actions()[index])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn forty_five_unique_actions() {
        let all = enumerate_actions();
        assert_eq!(all.len(), 45);
        let kinds: HashSet<_> = all.iter().map(|a| a.kind).collect();
        assert_eq!(kinds.len(), 45);
        assert!(all.iter().enumerate().all(|(i, a)| a.index == i));
    }

    #[test]
    fn partition_13_30_2() {
        let all = enumerate_actions();
        let npc = all.iter().filter(|a| a.is_spawn_npc()).count();
        let ped = all.iter().filter(|a| a.is_spawn_pedestrian()).count();
        assert_eq!((45 - npc - ped, npc, ped), (13, 30, 2));
        assert!(all[43].is_spawn_pedestrian() && all[44].is_spawn_pedestrian());
        assert!(all[13..43].iter().all(Action::is_spawn_npc));
    }

    #[test]
    fn documented_npc_index_formula() {
        let a = action(13 + 6 * 3 + 2 * 0 + 0).unwrap();
        assert_eq!(
            a.kind,
            ActionKind::SpawnNpc {
                behavior: NpcBehavior::CrossRoad,
                lane_rel: LaneRel::Current,
                dist_mode: DistMode::Near
            }
        );
        assert_eq!(action(12).unwrap().kind, ActionKind::AdvanceTime);
        assert!(action(45).is_none());
    }
}
