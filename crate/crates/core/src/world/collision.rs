//! Footprint overlap tests and constant-velocity ray intersection.

use crate::geometry::Vec2;
use crate::world::actor::{ActorKind, ActorState};

enum Shape {
    Rect {
        center: Vec2,
        axes: [Vec2; 2],
        half: [f64; 2],
    },
    Circle {
        center: Vec2,
        radius: f64,
    },
}

fn shape(a: &ActorState) -> Shape {
    if a.kind == ActorKind::Pedestrian {
        Shape::Circle {
            center: a.position,
            radius: a.half_width,
        }
    } else {
        let f = a.direction();
        Shape::Rect {
            center: a.position,
            axes: [f, f.perp()],
            half: [a.half_length, a.half_width],
        }
    }
}

/// Radius of a circle containing the footprint.
pub(crate) fn bounding_radius(a: &ActorState) -> f64 {
    if a.kind == ActorKind::Pedestrian {
        a.half_width
    } else {
        a.half_length.hypot(a.half_width)
    }
}

fn rect_radius_on(axes: &[Vec2; 2], half: &[f64; 2], axis: Vec2) -> f64 {
    half[0] * axes[0].dot(axis).abs() + half[1] * axes[1].dot(axis).abs()
}

/// True iff the two footprints overlap (touching counts as overlap).
/// Vehicles are oriented rectangles, pedestrians discs.
pub fn detect_collision(a: &ActorState, b: &ActorState) -> bool {
    let reach = bounding_radius(a) + bounding_radius(b) + 1e-9;
    if a.position.distance(b.position) > reach {
        return false;
    }
    match (shape(a), shape(b)) {
        (
            Shape::Rect {
                center: ca,
                axes: xa,
                half: ha,
            },
            Shape::Rect {
                center: cb,
                axes: xb,
                half: hb,
            },
        ) => {
            let d = cb - ca;
            xa.iter().chain(xb.iter()).all(|&axis| {
                d.dot(axis).abs() <= rect_radius_on(&xa, &ha, axis) + rect_radius_on(&xb, &hb, axis)
            })
        }
        (Shape::Circle { center, radius }, Shape::Rect { center: c, axes, half })
        | (Shape::Rect { center: c, axes, half }, Shape::Circle { center, radius }) => {
            let d = center - c;
            let lx = d.dot(axes[0]).clamp(-half[0], half[0]);
            let ly = d.dot(axes[1]).clamp(-half[1], half[1]);
            let closest = c + axes[0] * lx + axes[1] * ly;
            center.distance(closest) <= radius
        }
        (
            Shape::Circle {
                center: ca,
                radius: ra,
            },
            Shape::Circle {
                center: cb,
                radius: rb,
            },
        ) => ca.distance(cb) <= ra + rb,
    }
}

/// Where two constant-velocity rays cross, and when each actor gets there.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayCrossing {
    pub point: Vec2,
    pub t_a: f64,
    pub t_b: f64,
}

/// Intersects the forward rays of `a` and `b` (position + heading, moving
/// at current speed). Returns `None` for parallel or collinear rays, for
/// crossings behind either actor, for a stationary actor, and when either
/// arrival time exceeds `horizon`.
pub fn trajectory_intersection(a: &ActorState, b: &ActorState, horizon: f64) -> Option<RayCrossing> {
    if !(horizon > 0.0) || a.speed <= 0.0 || b.speed <= 0.0 {
        return None;
    }
    let da = a.direction();
    let db = b.direction();
    let denom = da.cross(db);
    if denom.abs() < 1e-12 {
        return None;
    }
    let w = b.position - a.position;
    // distances travelled along each ray to the crossing
    let u = w.cross(db) / denom;
    let v = w.cross(da) / denom;
    if u < 0.0 || v < 0.0 {
        return None;
    }
    let t_a = u / a.speed;
    let t_b = v / b.speed;
    if t_a > horizon || t_b > horizon {
        return None;
    }
    // symmetric in (a, b) so swapping arguments yields the identical point
    let point = ((a.position + da * u) + (b.position + db * v)) * 0.5;
    Some(RayCrossing { point, t_a, t_b })
}
