//! Plane geometry for strokes: points, conformal linear maps, reflections.
//!
//! Canvas coordinates are y-down: the top-left corner of the default
//! viewport is (-0.5, -0.5) and y grows toward the bottom of the image.
//! Every map we build is conformal (rotation, uniform scale, translation,
//! mirror), so circles stay circles and the radius scale of a map is
//! `sqrt(|det|)` of its linear part.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

pub const fn v(x: f64, y: f64) -> Vec2 {
    Vec2 { x, y }
}

impl Vec2 {
    pub fn add(self, o: Vec2) -> Vec2 {
        v(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Vec2) -> Vec2 {
        v(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, k: f64) -> Vec2 {
        v(self.x * k, self.y * k)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(self, o: Vec2) -> f64 {
        self.sub(o).norm()
    }
}

/// Affine map `p -> M p + t` with conformal `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinMap {
    /// Row-major 2x2 linear part.
    pub m: [f64; 4],
    pub t: Vec2,
}

impl LinMap {
    pub const IDENTITY: LinMap = LinMap {
        m: [1.0, 0.0, 0.0, 1.0],
        t: Vec2 { x: 0.0, y: 0.0 },
    };

    pub fn rotation(theta: f64) -> LinMap {
        let (s, c) = theta.sin_cos();
        LinMap {
            m: [c, -s, s, c],
            t: v(0.0, 0.0),
        }
    }

    /// Mirror across the line through the origin at angle `theta`.
    pub fn reflection(theta: f64) -> LinMap {
        let (s2, c2) = (2.0 * theta).sin_cos();
        LinMap {
            m: [c2, s2, s2, -c2],
            t: v(0.0, 0.0),
        }
    }

    pub fn translation(t: Vec2) -> LinMap {
        LinMap {
            m: [1.0, 0.0, 0.0, 1.0],
            t,
        }
    }

    pub fn scaling(k: f64) -> LinMap {
        LinMap {
            m: [k, 0.0, 0.0, k],
            t: v(0.0, 0.0),
        }
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        v(
            self.m[0] * p.x + self.m[1] * p.y + self.t.x,
            self.m[2] * p.x + self.m[3] * p.y + self.t.y,
        )
    }

    /// `self . other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &LinMap) -> LinMap {
        let a = &self.m;
        let b = &other.m;
        LinMap {
            m: [
                a[0] * b[0] + a[1] * b[2],
                a[0] * b[1] + a[1] * b[3],
                a[2] * b[0] + a[3] * b[2],
                a[2] * b[1] + a[3] * b[3],
            ],
            t: self.apply(other.t),
        }
    }

    pub fn det(&self) -> f64 {
        self.m[0] * self.m[3] - self.m[1] * self.m[2]
    }

    /// How the map scales lengths (valid because all our maps are conformal).
    pub fn radius_scale(&self) -> f64 {
        self.det().abs().sqrt()
    }
}

/// A single pen stroke: a line segment or a full circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Stroke {
    Line { a: Vec2, b: Vec2 },
    Circle { c: Vec2, r: f64 },
}

impl Stroke {
    pub fn map(&self, f: &LinMap) -> Stroke {
        match *self {
            Stroke::Line { a, b } => Stroke::Line {
                a: f.apply(a),
                b: f.apply(b),
            },
            Stroke::Circle { c, r } => Stroke::Circle {
                c: f.apply(c),
                r: r * f.radius_scale(),
            },
        }
    }

    /// Distance from a point to the stroke's curve (not its interior).
    pub fn curve_dist(&self, p: Vec2) -> f64 {
        match *self {
            Stroke::Line { a, b } => {
                let ab = b.sub(a);
                let len2 = ab.dot(ab);
                if len2 == 0.0 {
                    return p.dist(a);
                }
                let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
                p.dist(a.add(ab.scale(t)))
            }
            Stroke::Circle { c, r } => (p.dist(c) - r).abs(),
        }
    }

    /// Axis-aligned bounding box of the curve.
    pub fn bbox(&self) -> (Vec2, Vec2) {
        match *self {
            Stroke::Line { a, b } => (
                v(a.x.min(b.x), a.y.min(b.y)),
                v(a.x.max(b.x), a.y.max(b.y)),
            ),
            Stroke::Circle { c, r } => (v(c.x - r, c.y - r), v(c.x + r, c.y + r)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rotation_quarter_turn_maps_unit_x_to_unit_y() {
        let r = LinMap::rotation(std::f64::consts::FRAC_PI_2);
        let p = r.apply(v(1.0, 0.0));
        assert_relative_eq!(p.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reflection_across_diagonal_swaps_axes() {
        let f = LinMap::reflection(std::f64::consts::FRAC_PI_4);
        let p = f.apply(v(1.0, 0.0));
        assert_relative_eq!(p.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, 1.0, epsilon = 1e-12);
        // Involution.
        let q = f.apply(p);
        assert_relative_eq!(q.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(q.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn compose_applies_right_map_first() {
        let scale = LinMap::scaling(2.0);
        let shift = LinMap::translation(v(1.0, 0.0));
        // Scale first, then shift.
        let m = shift.compose(&scale);
        let p = m.apply(v(1.0, 1.0));
        assert_relative_eq!(p.x, 3.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn circle_radius_follows_conformal_scale() {
        let m = LinMap::rotation(1.0).compose(&LinMap::scaling(0.5));
        let s = Stroke::Circle { c: v(1.0, 0.0), r: 1.0 };
        match s.map(&m) {
            Stroke::Circle { r, .. } => assert_relative_eq!(r, 0.5, epsilon = 1e-12),
            _ => panic!("circle must stay a circle"),
        }
    }

    #[test]
    fn reflection_keeps_circle_radius() {
        let m = LinMap::reflection(0.3);
        let s = Stroke::Circle { c: v(1.0, 2.0), r: 0.7 };
        match s.map(&m) {
            Stroke::Circle { r, .. } => assert_relative_eq!(r, 0.7, epsilon = 1e-12),
            _ => panic!("circle must stay a circle"),
        }
    }

    #[test]
    fn segment_distance_clamps_to_endpoints() {
        let s = Stroke::Line { a: v(0.0, 0.0), b: v(1.0, 0.0) };
        assert_relative_eq!(s.curve_dist(v(0.5, 1.0)), 1.0);
        assert_relative_eq!(s.curve_dist(v(2.0, 0.0)), 1.0);
        assert_relative_eq!(s.curve_dist(v(-3.0, 4.0)), 5.0);
    }
}
