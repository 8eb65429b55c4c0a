//! Planar geometry shared by the map, value layers and simulator.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

/// A point in world coordinates, meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_sq(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    /// Bearing of `other` as seen from `self`, in `[0, 2π)`.
    pub fn bearing_to(self, other: Point) -> f64 {
        normalize_angle((other.y - self.y).atan2(other.x - self.x))
    }

    pub fn offset(self, heading: f64, dist: f64) -> Point {
        Point::new(self.x + dist * heading.cos(), self.y + dist * heading.sin())
    }
}

/// Agent pose. The heading is kept in `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading: normalize_angle(heading) }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn rotated(&self, delta: f64) -> Pose {
        Pose::new(self.x, self.y, self.heading + delta)
    }

    /// Signed angle of `target` off the optical axis, in `(-π, π]`.
    pub fn relative_bearing(&self, target: Point) -> f64 {
        angle_diff(self.position().bearing_to(target), self.heading)
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let wrapped = theta.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs.
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}

/// Signed difference `a - b` wrapped into `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heading_is_normalized() {
        assert_eq!(Pose::new(0.0, 0.0, -PI / 2.0).heading, 1.5 * PI);
        assert_eq!(Pose::new(0.0, 0.0, TAU).heading, 0.0);
        assert!(normalize_angle(-1e-18) < TAU);
    }

    #[test]
    fn angle_diff_wraps() {
        assert!((angle_diff(0.1, TAU - 0.1) - 0.2).abs() < 1e-12);
        assert!((angle_diff(TAU - 0.1, 0.1) + 0.2).abs() < 1e-12);
        assert_eq!(angle_diff(PI, 0.0), PI);
    }
}
