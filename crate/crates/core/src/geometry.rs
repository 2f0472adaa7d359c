//! Planar primitives shared by the world, the roadmap and the risk builders.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Distance below which two segments count as touching.
pub const TOUCH_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn lerp(self, other: Point2, s: f64) -> Point2 {
        Point2::new(self.x + (other.x - self.x) * s, self.y + (other.y - self.y) * s)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point2,
    pub b: Point2,
}

impl Segment {
    pub const fn new(a: Point2, b: Point2) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    pub fn point_at(&self, s: f64) -> Point2 {
        self.a.lerp(self.b, s)
    }

    pub fn bounding_box(&self) -> Rect {
        Rect {
            min: Point2::new(self.a.x.min(self.b.x), self.a.y.min(self.b.y)),
            max: Point2::new(self.a.x.max(self.b.x), self.a.y.max(self.b.y)),
        }
    }

    pub fn distance_to_point(&self, p: Point2) -> f64 {
        let ab = self.b - self.a;
        let len2 = ab.dot(ab);
        if len2 == 0.0 {
            return self.a.distance(p);
        }
        let s = ((p - self.a).dot(ab) / len2).clamp(0.0, 1.0);
        self.point_at(s).distance(p)
    }

    /// Euclidean distance between two closed segments. Zero when they cross.
    pub fn distance_to_segment(&self, other: &Segment) -> f64 {
        let o1 = orientation(self.a, self.b, other.a);
        let o2 = orientation(self.a, self.b, other.b);
        let o3 = orientation(other.a, other.b, self.a);
        let o4 = orientation(other.a, other.b, self.b);
        if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
            return 0.0;
        }
        self.distance_to_point(other.a)
            .min(self.distance_to_point(other.b))
            .min(other.distance_to_point(self.a))
            .min(other.distance_to_point(self.b))
    }

    /// Proper crossing or touch within [`TOUCH_EPS`].
    pub fn touches(&self, other: &Segment) -> bool {
        self.distance_to_segment(other) <= TOUCH_EPS
    }

    /// Whether the segment meets the closed rectangle (grown by [`TOUCH_EPS`]).
    pub fn intersects_rect(&self, rect: &Rect) -> bool {
        let min = Point2::new(rect.min.x - TOUCH_EPS, rect.min.y - TOUCH_EPS);
        let max = Point2::new(rect.max.x + TOUCH_EPS, rect.max.y + TOUCH_EPS);
        let d = self.b - self.a;
        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        // Liang-Barsky slab clipping.
        for (p0, dp, bmin, bmax) in [(self.a.x, d.x, min.x, max.x), (self.a.y, d.y, min.y, max.y)] {
            if dp == 0.0 {
                if p0 < bmin || p0 > bmax {
                    return false;
                }
                continue;
            }
            let mut s0 = (bmin - p0) / dp;
            let mut s1 = (bmax - p0) / dp;
            if s0 > s1 {
                std::mem::swap(&mut s0, &mut s1);
            }
            lo = lo.max(s0);
            hi = hi.min(s1);
            if lo > hi {
                return false;
            }
        }
        true
    }
}

/// Axis-aligned closed rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point2,
    pub max: Point2,
}

impl Rect {
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn overlaps(&self, other: &Rect) -> bool {
        self.min.x <= other.max.x + TOUCH_EPS
            && other.min.x <= self.max.x + TOUCH_EPS
            && self.min.y <= other.max.y + TOUCH_EPS
            && other.min.y <= self.max.y + TOUCH_EPS
    }
}

/// Twice the signed area of the triangle (a, b, c).
pub fn orientation(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}
