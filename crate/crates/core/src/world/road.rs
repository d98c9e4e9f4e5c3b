//! Road networks: lanes, adjacency, and the four built-in layouts.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PathBuilder, Polyline, Vec2};

/// Lane width used by every built-in layout, meters.
pub const LANE_WIDTH: f64 = 3.5;

/// Width of the strip beyond the outermost lane where pedestrians wait and
/// curb-side vehicles start, meters.
pub const SIDEWALK_OFFSET: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LaneId(pub u32);

impl fmt::Display for LaneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lane{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutId {
    LShapedJunction,
    CornerIntersection,
    MultiLaneCrossroad,
    CurvedBoulevard,
}

impl LayoutId {
    pub const ALL: [LayoutId; 4] = [
        LayoutId::LShapedJunction,
        LayoutId::CornerIntersection,
        LayoutId::MultiLaneCrossroad,
        LayoutId::CurvedBoulevard,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LayoutId::LShapedJunction => "l_shaped_junction",
            LayoutId::CornerIntersection => "corner_intersection",
            LayoutId::MultiLaneCrossroad => "multi_lane_crossroad",
            LayoutId::CurvedBoulevard => "curved_boulevard",
        }
    }
}

impl fmt::Display for LayoutId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LayoutId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        LayoutId::ALL
            .into_iter()
            .find(|l| l.as_str() == norm)
            .or(match norm.as_str() {
                "1" | "road1" => Some(LayoutId::LShapedJunction),
                "2" | "road2" => Some(LayoutId::CornerIntersection),
                "3" | "road3" => Some(LayoutId::MultiLaneCrossroad),
                "4" | "road4" => Some(LayoutId::CurvedBoulevard),
                _ => None,
            })
            .ok_or_else(|| Error::Invalid(format!("unknown layout '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub id: LaneId,
    /// Centerline ordered in the direction of travel.
    pub centerline: Polyline,
    pub width: f64,
    /// +1 for lanes travelling with the ego road direction (or toward the
    /// ego's left on a cross street), -1 otherwise.
    pub direction_sign: i8,
    pub left_neighbor: Option<LaneId>,
    pub right_neighbor: Option<LaneId>,
}

/// The main road the ego drives on: a reference (center) line with forward
/// lanes on its right and opposing lanes on its left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    pub reference: Polyline,
    /// Forward lanes, rightmost first.
    pub forward: Vec<LaneId>,
    /// Opposing lanes, nearest the center line first.
    pub opposing: Vec<LaneId>,
}

/// A side street crossing the corridor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossStreet {
    /// Arc length along the corridor reference where the streets meet.
    pub s_on_reference: f64,
    pub lanes: Vec<LaneId>,
    pub half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadNetwork {
    pub layout_id: LayoutId,
    pub lanes: Vec<Lane>,
    /// m/s
    pub speed_limit: f64,
    pub origin: Vec2,
    pub destination: Vec2,
    /// Ordered lane ids the ego follows from origin to destination.
    pub route: Vec<LaneId>,
    pub corridor: Corridor,
    pub cross_street: Option<CrossStreet>,
}

struct LayoutRecipe {
    reference: Polyline,
    n_forward: usize,
    n_opposing: usize,
    ego_lane_index: usize,
    speed_limit: f64,
    cross: Option<(f64, usize)>,
}

fn recipe(layout: LayoutId) -> LayoutRecipe {
    let start = PathBuilder::new(Vec2::ZERO, 0.0);
    match layout {
        LayoutId::LShapedJunction => LayoutRecipe {
            reference: start.straight(260.0).arc(25.0, FRAC_PI_2).straight(260.0).build().expect("built-in reference line"),
            n_forward: 2,
            n_opposing: 2,
            ego_lane_index: 0,
            speed_limit: 13.9,
            cross: None,
        },
        LayoutId::CornerIntersection => LayoutRecipe {
            reference: start.straight(240.0).arc(22.0, -FRAC_PI_2).straight(260.0).build().expect("built-in reference line"),
            n_forward: 2,
            n_opposing: 2,
            ego_lane_index: 0,
            speed_limit: 13.9,
            cross: Some((130.0, 1)),
        },
        LayoutId::MultiLaneCrossroad => LayoutRecipe {
            reference: start.straight(560.0).build().expect("built-in reference line"),
            n_forward: 3,
            n_opposing: 3,
            ego_lane_index: 1,
            speed_limit: 16.7,
            cross: Some((280.0, 2)),
        },
        LayoutId::CurvedBoulevard => LayoutRecipe {
            reference: start
                .straight(90.0)
                .arc(140.0, 50f64.to_radians())
                .arc(140.0, -50f64.to_radians())
                .straight(220.0)
                .build().expect("built-in reference line"),
            n_forward: 2,
            n_opposing: 2,
            ego_lane_index: 0,
            speed_limit: 16.7,
            cross: None,
        },
    }
}

/// Builds one of the four built-in layouts. Deterministic.
pub fn build_road(layout: LayoutId) -> RoadNetwork {
    let r = recipe(layout);
    let w = LANE_WIDTH;
    let mut lanes = Vec::new();

    let mut forward = Vec::new();
    for k in 0..r.n_forward {
        let id = LaneId(lanes.len() as u32);
        let offset = -((r.n_forward - k) as f64 - 0.5) * w;
        lanes.push(Lane {
            id,
            centerline: r.reference.offset(offset).expect("lane offset"),
            width: w,
            direction_sign: 1,
            left_neighbor: (k + 1 < r.n_forward).then(|| LaneId(id.0 + 1)),
            right_neighbor: (k > 0).then(|| LaneId(id.0 - 1)),
        });
        forward.push(id);
    }
    let mut opposing = Vec::new();
    for j in 0..r.n_opposing {
        let id = LaneId(lanes.len() as u32);
        let offset = (j as f64 + 0.5) * w;
        lanes.push(Lane {
            id,
            centerline: r.reference.offset(offset).expect("lane offset").reversed(),
            width: w,
            direction_sign: -1,
            left_neighbor: (j > 0).then(|| LaneId(id.0 - 1)),
            right_neighbor: (j + 1 < r.n_opposing).then(|| LaneId(id.0 + 1)),
        });
        opposing.push(id);
    }

    let cross_street = r.cross.map(|(s_x, per_dir)| {
        let center = r.reference.point_at(s_x);
        let t = r.reference.tangent_at(s_x);
        let n = t.perp();
        let reach = 90.0;
        let mut ids = Vec::new();
        // lanes travelling +n sit on the +t side (right-hand traffic), and -n on -t
        for (dir, side, sign) in [(n, t, 1i8), (-n, -t, -1i8)] {
            let first = lanes.len() as u32;
            for i in 0..per_dir {
                let id = LaneId(lanes.len() as u32);
                let c = center + side * ((i as f64 + 0.5) * w);
                lanes.push(Lane {
                    id,
                    centerline: Polyline::new(vec![c - dir * reach, c + dir * reach])
                        .expect("straight lane"),
                    width: w,
                    direction_sign: sign,
                    left_neighbor: (i > 0).then(|| LaneId(id.0 - 1)),
                    right_neighbor: (i + 1 < per_dir).then(|| LaneId(first + i as u32 + 1)),
                });
                ids.push(id);
            }
        }
        CrossStreet {
            s_on_reference: s_x,
            lanes: ids,
            half_width: per_dir as f64 * w,
        }
    });

    let ego_lane = forward[r.ego_lane_index];
    let center = &lanes[ego_lane.0 as usize].centerline;
    let origin = center.point_at(10.0);
    let destination = center.point_at(center.length() - 10.0);
    RoadNetwork {
        layout_id: layout,
        lanes,
        speed_limit: r.speed_limit,
        origin,
        destination,
        route: vec![ego_lane],
        corridor: Corridor {
            reference: r.reference,
            forward,
            opposing,
        },
        cross_street,
    }
}

impl RoadNetwork {
    pub fn lane(&self, id: LaneId) -> Option<&Lane> {
        self.lanes.get(id.0 as usize).filter(|l| l.id == id)
    }

    /// Centerline of the ego route.
    pub fn route_path(&self) -> &Polyline {
        &self
            .lane(self.route[0])
            .expect("route lane exists")
            .centerline
    }

    pub fn route_lane(&self) -> LaneId {
        self.route[0]
    }

    /// Lane containing `p`: the nearest centerline within half lane width
    /// plus `half_width`; ties go to the lowest lane id.
    pub fn lane_at(&self, p: Vec2, half_width: f64) -> Option<LaneId> {
        let mut best: Option<(f64, LaneId)> = None;
        for lane in &self.lanes {
            let d = lane.centerline.project(p).distance;
            if d <= 0.5 * lane.width + half_width && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, lane.id));
            }
        }
        best.map(|(_, id)| id)
    }

    /// Whether a disc of radius `half_width` at `p` overlaps the lane ribbon.
    pub fn in_lane_ribbon(&self, lane: LaneId, p: Vec2, half_width: f64) -> bool {
        self.lane(lane)
            .is_some_and(|l| l.centerline.project(p).distance <= 0.5 * l.width + half_width)
    }

    /// Distance from the corridor reference line to the outer edge of the
    /// forward (`right = true`) or opposing carriageway.
    pub fn edge_offset(&self, right: bool) -> f64 {
        let n = if right {
            self.corridor.forward.len()
        } else {
            self.corridor.opposing.len()
        };
        n as f64 * LANE_WIDTH
    }

    pub fn validate(&self) -> Result<()> {
        for (i, lane) in self.lanes.iter().enumerate() {
            if lane.id.0 as usize != i {
                return Err(Error::Invalid(format!("lane {} stored at index {i}", lane.id)));
            }
            if !(lane.width > 0.0) {
                return Err(Error::Invalid(format!("{} has non-positive width", lane.id)));
            }
            for n in [lane.left_neighbor, lane.right_neighbor].into_iter().flatten() {
                if self.lane(n).is_none() {
                    return Err(Error::Invalid(format!("{} references missing {n}", lane.id)));
                }
            }
            if let Some(l) = lane.left_neighbor {
                if self.lanes[l.0 as usize].right_neighbor != Some(lane.id) {
                    return Err(Error::Invalid(format!("adjacency {}/{l} not symmetric", lane.id)));
                }
            }
            if let Some(r) = lane.right_neighbor {
                if self.lanes[r.0 as usize].left_neighbor != Some(lane.id) {
                    return Err(Error::Invalid(format!("adjacency {}/{r} not symmetric", lane.id)));
                }
            }
        }
        if self.route.is_empty() || self.route.iter().any(|id| self.lane(*id).is_none()) {
            return Err(Error::Invalid("route references missing lanes".into()));
        }
        for (name, p) in [("origin", self.origin), ("destination", self.destination)] {
            let on_lane = self
                .lanes
                .iter()
                .any(|l| l.centerline.project(p).distance <= 0.5);
            if !on_lane {
                return Err(Error::Invalid(format!("{name} is not on a lane centerline")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("road network serializes")
    }

    pub fn from_json(text: &str) -> Result<RoadNetwork> {
        let road: RoadNetwork =
            serde_json::from_str(text).map_err(|e| Error::Invalid(format!("road json: {e}")))?;
        road.validate()?;
        Ok(road)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angle_between;

    #[test]
    fn all_layouts_validate() {
        for layout in LayoutId::ALL {
            let road = build_road(layout);
            road.validate().unwrap();
            assert!(road.route_path().length() > 400.0, "{layout}");
        }
    }

    #[test]
    fn l_shaped_has_one_right_angle_and_two_lanes_each_way() {
        let road = build_road(LayoutId::LShapedJunction);
        assert_eq!(road.corridor.forward.len(), 2);
        assert_eq!(road.corridor.opposing.len(), 2);
        assert!(road.cross_street.is_none());
        let p = road.route_path();
        let turn = angle_between(p.heading_at(0.0), p.heading_at(p.length()));
        assert!((turn - FRAC_PI_2).abs() < 1e-6);
    }

    #[test]
    fn multi_lane_crossroad_has_three_parallel_lanes() {
        let road = build_road(LayoutId::MultiLaneCrossroad);
        let same_dir = road.lanes.iter().filter(|l| l.direction_sign == 1).count();
        assert!(same_dir >= 3);
        assert!(road.cross_street.is_some());
        let ego = road.lane(road.route_lane()).unwrap();
        assert!(ego.left_neighbor.is_some() && ego.right_neighbor.is_some());
    }

    #[test]
    fn build_is_deterministic() {
        for layout in LayoutId::ALL {
            assert_eq!(build_road(layout), build_road(layout));
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let road = build_road(LayoutId::CurvedBoulevard);
        let back = RoadNetwork::from_json(&road.to_json()).unwrap();
        assert_eq!(road, back);
    }

    #[test]
    fn asymmetric_adjacency_is_rejected() {
        let mut road = build_road(LayoutId::LShapedJunction);
        road.lanes[0].left_neighbor = None;
        assert!(road.validate().is_err());
    }

    #[test]
    fn lane_membership_prefers_nearest() {
        let road = build_road(LayoutId::MultiLaneCrossroad);
        let ego = road.route_lane();
        assert_eq!(road.lane_at(road.origin, 0.9), Some(ego));
        assert_eq!(road.lane_at(road.origin + Vec2::new(0.0, 40.0), 0.9), None);
    }

    #[test]
    fn layout_names_parse() {
        for l in LayoutId::ALL {
            assert_eq!(l.as_str().parse::<LayoutId>().unwrap(), l);
        }
        assert_eq!("road2".parse::<LayoutId>().unwrap(), LayoutId::CornerIntersection);
        assert!("nowhere".parse::<LayoutId>().is_err());
    }
}
