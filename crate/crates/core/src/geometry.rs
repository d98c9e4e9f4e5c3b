//! Planar vectors and arc-length parameterized polylines.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point or displacement in the road plane, meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector pointing along `angle` (radians, counter-clockwise from +x).
    pub fn from_angle(angle: f64) -> Self {
        Vec2::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            Vec2::ZERO
        }
    }

    /// Left-hand normal (rotated +90°).
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Smallest absolute angle between two headings, in `[0, π]`.
pub fn angle_between(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Result of projecting a point onto a polyline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    /// Arc length of the foot point.
    pub s: f64,
    pub foot: Vec2,
    /// Signed lateral offset; positive on the left of the travel direction.
    pub lateral: f64,
    pub distance: f64,
}

/// Polyline with cached cumulative arc length. Always has at least two
/// distinct points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec2>", into = "Vec<Vec2>")]
pub struct Polyline {
    points: Vec<Vec2>,
    cum: Vec<f64>,
    /// Bounding boxes `[min_x, min_y, max_x, max_y]` of consecutive runs of
    /// `CHUNK` segments, used to prune projection.
    boxes: Vec<[f64; 4]>,
}

const CHUNK: usize = 16;

impl TryFrom<Vec<Vec2>> for Polyline {
    type Error = Error;
    fn try_from(points: Vec<Vec2>) -> Result<Self> {
        Polyline::new(points)
    }
}

impl From<Polyline> for Vec<Vec2> {
    fn from(p: Polyline) -> Self {
        p.points
    }
}

impl Polyline {
    /// Builds a polyline, dropping consecutive duplicate points.
    pub fn new(raw: Vec<Vec2>) -> Result<Self> {
        if raw.iter().any(|p| !p.is_finite()) {
            return Err(Error::Invalid("polyline point is not finite".into()));
        }
        let mut points: Vec<Vec2> = Vec::with_capacity(raw.len());
        for p in raw {
            if points.last().is_none_or(|q| q.distance(p) > 1e-9) {
                points.push(p);
            }
        }
        if points.len() < 2 {
            return Err(Error::Invalid(
                "polyline needs at least two distinct points".into(),
            ));
        }
        let mut cum = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for w in points.windows(2) {
            acc += w[0].distance(w[1]);
            cum.push(acc);
        }
        let boxes = (0..points.len() - 1)
            .step_by(CHUNK)
            .map(|first| {
                let last = (first + CHUNK).min(points.len() - 1);
                points[first..=last].iter().fold(
                    [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
                    |b, q| [b[0].min(q.x), b[1].min(q.y), b[2].max(q.x), b[3].max(q.y)],
                )
            })
            .collect();
        Ok(Polyline { points, cum, boxes })
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().expect("non-empty")
    }

    pub fn start(&self) -> Vec2 {
        self.points[0]
    }

    pub fn end(&self) -> Vec2 {
        *self.points.last().expect("non-empty")
    }

    fn segment_at(&self, s: f64) -> usize {
        let n = self.points.len() - 1;
        match self.cum.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        }
    }

    /// Point at arc length `s`, clamped to the ends.
    pub fn point_at(&self, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.length());
        let i = self.segment_at(s);
        let seg = self.cum[i + 1] - self.cum[i];
        let t = if seg > 0.0 { (s - self.cum[i]) / seg } else { 0.0 };
        self.points[i].lerp(self.points[i + 1], t)
    }

    /// Unit tangent at arc length `s`.
    pub fn tangent_at(&self, s: f64) -> Vec2 {
        let i = self.segment_at(s.clamp(0.0, self.length()));
        (self.points[i + 1] - self.points[i]).normalized()
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        self.tangent_at(s).angle()
    }

    pub fn project(&self, p: Vec2) -> Projection {
        // squared distances in the scan, one sqrt at the end
        let (mut best_i, mut best_t, mut best_d2) = (0usize, 0.0, f64::INFINITY);
        let segments = self.points.len() - 1;
        for (c, b) in self.boxes.iter().enumerate() {
            let dx = (b[0] - p.x).max(p.x - b[2]).max(0.0);
            let dy = (b[1] - p.y).max(p.y - b[3]).max(0.0);
            // margin keeps rounding in the bound from hiding a closer segment
            if dx * dx + dy * dy > best_d2 * (1.0 + 1e-9) + 1e-18 {
                continue;
            }
            for i in c * CHUNK..((c + 1) * CHUNK).min(segments) {
                let (a, e) = (self.points[i], self.points[i + 1]);
                let d = e - a;
                let t = ((p - a).dot(d) / d.dot(d)).clamp(0.0, 1.0);
                let r = p - (a + d * t);
                let d2 = r.dot(r);
                if d2 < best_d2 {
                    (best_i, best_t, best_d2) = (i, t, d2);
                }
            }
        }
        let (a, e) = (self.points[best_i], self.points[best_i + 1]);
        let d = e - a;
        let foot = a + d * best_t;
        Projection {
            s: self.cum[best_i] + best_t * (self.cum[best_i + 1] - self.cum[best_i]),
            foot,
            lateral: d.normalized().cross(p - foot),
            distance: best_d2.sqrt(),
        }
    }

    /// Parallel curve offset to the left by `d` (negative offsets go right).
    pub fn offset(&self, d: f64) -> Result<Polyline> {
        let n = self.points.len();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let prev = if i > 0 {
                Some((self.points[i] - self.points[i - 1]).normalized())
            } else {
                None
            };
            let next = if i + 1 < n {
                Some((self.points[i + 1] - self.points[i]).normalized())
            } else {
                None
            };
            let normal = match (prev, next) {
                (Some(a), Some(b)) => {
                    let m = (a + b).normalized();
                    // miter length keeps parallel segments at distance |d|
                    let cos_half = m.dot(a).max(0.2);
                    m.perp() * (1.0 / cos_half)
                }
                (Some(a), None) => a.perp(),
                (None, Some(b)) => b.perp(),
                (None, None) => unreachable!("polyline has two points"),
            };
            out.push(self.points[i] + normal * d);
        }
        Polyline::new(out)
    }

    pub fn reversed(&self) -> Polyline {
        let mut pts = self.points.clone();
        pts.reverse();
        Polyline::new(pts).expect("reversal keeps validity")
    }

    /// Sub-curve between arc lengths `from` and `to` (clamped, `from < to`).
    pub fn slice(&self, from: f64, to: f64) -> Result<Polyline> {
        let from = from.clamp(0.0, self.length());
        let to = to.clamp(0.0, self.length());
        if to - from < 1e-6 {
            return Err(Error::Invalid("empty polyline slice".into()));
        }
        let mut pts = vec![self.point_at(from)];
        for (p, c) in self.points.iter().zip(&self.cum) {
            if *c > from && *c < to {
                pts.push(*p);
            }
        }
        pts.push(self.point_at(to));
        Polyline::new(pts)
    }

    /// Curvature samples `(arc_length, |κ|)` at interior vertices within
    /// `[s, s + window]`, estimated from the heading change per unit length.
    pub fn curvature_samples(&self, s: f64, window: f64) -> Vec<(f64, f64)> {
        let end = s + window;
        let mut out = Vec::new();
        for i in 1..self.points.len() - 1 {
            if self.cum[i] < s || self.cum[i] > end {
                continue;
            }
            let a = (self.points[i] - self.points[i - 1]).angle();
            let b = (self.points[i + 1] - self.points[i]).angle();
            let span = 0.5 * (self.cum[i + 1] - self.cum[i - 1]);
            if span > 0.0 {
                out.push((self.cum[i], wrap_angle(b - a).abs() / span));
            }
        }
        out
    }

    /// Maximum absolute curvature (rad/m) over `[s, s + window]`.
    pub fn max_curvature(&self, s: f64, window: f64) -> f64 {
        self.curvature_samples(s, window)
            .into_iter()
            .fold(0.0, |m, (_, k)| m.max(k))
    }

    /// Concatenates `other` after `self`.
    pub fn join(&self, other: &Polyline) -> Result<Polyline> {
        let mut pts = self.points.clone();
        pts.extend_from_slice(&other.points);
        Polyline::new(pts)
    }
}

/// Incremental builder for road reference lines made of straights and arcs.
#[derive(Clone, Debug)]
pub struct PathBuilder {
    points: Vec<Vec2>,
    heading: f64,
    step: f64,
}

impl PathBuilder {
    pub fn new(start: Vec2, heading: f64) -> Self {
        PathBuilder {
            points: vec![start],
            heading,
            step: 1.0,
        }
    }

    fn cursor(&self) -> Vec2 {
        *self.points.last().expect("non-empty")
    }

    pub fn straight(mut self, length: f64) -> Self {
        let n = (length / self.step).ceil().max(1.0) as usize;
        let start = self.cursor();
        let dir = Vec2::from_angle(self.heading);
        for k in 1..=n {
            self.points.push(start + dir * (length * k as f64 / n as f64));
        }
        self
    }

    /// Circular arc; positive `angle` turns left.
    pub fn arc(mut self, radius: f64, angle: f64) -> Self {
        let start = self.cursor();
        let sign = angle.signum();
        let center = start + Vec2::from_angle(self.heading).perp() * (radius * sign);
        let start_angle = (start - center).angle();
        let n = ((radius * angle.abs()) / self.step).ceil().max(1.0) as usize;
        for k in 1..=n {
            let a = start_angle + angle * k as f64 / n as f64;
            self.points.push(center + Vec2::from_angle(a) * radius);
        }
        self.heading += angle;
        self
    }

    pub fn build(self) -> Result<Polyline> {
        Polyline::new(self.points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_and_arc_length() {
        let p = Polyline::new(vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0), Vec2::new(10.0, 10.0)])
            .unwrap();
        assert_eq!(p.length(), 20.0);
        assert_eq!(p.point_at(15.0), Vec2::new(10.0, 5.0));
        let pr = p.project(Vec2::new(5.0, 2.0));
        assert_eq!(pr.s, 5.0);
        assert_eq!(pr.lateral, 2.0);
        let pr = p.project(Vec2::new(12.0, 5.0));
        assert_eq!(pr.s, 15.0);
        assert_eq!(pr.lateral, -2.0);
    }

    #[test]
    fn offset_straight_line_is_parallel() {
        let p = Polyline::new(vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)]).unwrap();
        let left = p.offset(3.5).unwrap();
        assert_eq!(left.start(), Vec2::new(0.0, 3.5));
        assert_eq!(left.end(), Vec2::new(10.0, 3.5));
    }

    #[test]
    fn arc_offset_keeps_distance() {
        let p = PathBuilder::new(Vec2::ZERO, 0.0)
            .straight(20.0)
            .arc(25.0, std::f64::consts::FRAC_PI_2)
            .straight(20.0)
            .build()
            .unwrap();
        let o = p.offset(-5.25).unwrap();
        for k in 0..=50 {
            let q = o.point_at(o.length() * k as f64 / 50.0);
            let d = p.project(q).distance;
            assert!((d - 5.25).abs() < 0.05, "offset distance {d}");
        }
        // outer radius 30.25 m on the quarter turn
        assert!((o.length() - (40.0 + 30.25 * std::f64::consts::FRAC_PI_2)).abs() < 0.2);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(Polyline::new(vec![Vec2::ZERO, Vec2::ZERO]).is_err());
        assert!(Polyline::new(vec![Vec2::ZERO, Vec2::new(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((angle_between(0.1, -0.1) - 0.2).abs() < 1e-12);
    }
}
