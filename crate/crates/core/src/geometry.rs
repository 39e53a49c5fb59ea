//! Planar points and small triangle/segment helpers.

use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn polar(radius: f64, angle: f64) -> Self {
        Point::new(radius * angle.cos(), radius * angle.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn lerp(self, other: Point, s: f64) -> Point {
        self + (other - self) * s
    }

    pub fn midpoint(self, other: Point) -> Point {
        self.lerp(other, 0.5)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

/// Signed area, positive for counterclockwise `a, b, c`.
pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * (b - a).cross(c - a)
}

/// Signed area of a closed polygon (shoelace).
pub fn polygon_signed_area(points: &[Point]) -> f64 {
    let n = points.len();
    let mut s = 0.0;
    for i in 0..n {
        s += points[i].cross(points[(i + 1) % n]);
    }
    0.5 * s
}

/// Constant gradient of the linear interpolant of `values` over triangle `p`.
pub fn linear_gradient(p: [Point; 3], values: [f64; 3]) -> Point {
    let two_area = (p[1] - p[0]).cross(p[2] - p[0]);
    let gx = values[0] * (p[1].y - p[2].y) + values[1] * (p[2].y - p[0].y) + values[2] * (p[0].y - p[1].y);
    let gy = values[0] * (p[2].x - p[1].x) + values[1] * (p[0].x - p[2].x) + values[2] * (p[1].x - p[0].x);
    Point::new(gx / two_area, gy / two_area)
}

/// Proper intersection test for segments `ab` and `cd` (shared endpoints do not count).
pub fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = (b - a).cross(c - a);
    let d2 = (b - a).cross(d - a);
    let d3 = (d - c).cross(a - c);
    let d4 = (d - c).cross(b - c);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_linear_function_is_exact() {
        let p = [Point::new(0.1, 0.2), Point::new(1.3, -0.4), Point::new(0.5, 0.9)];
        let f = |q: Point| 2.0 * q.x - 3.0 * q.y + 0.7;
        let g = linear_gradient(p, [f(p[0]), f(p[1]), f(p[2])]);
        assert!((g.x - 2.0).abs() < 1e-13 && (g.y + 3.0).abs() < 1e-13);
    }

    #[test]
    fn unit_square_area() {
        let sq = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)];
        assert_eq!(polygon_signed_area(&sq), 1.0);
        assert!(segments_cross(sq[0], sq[2], sq[1], sq[3]));
        assert!(!segments_cross(sq[0], sq[1], sq[1], sq[2]));
    }
}
