//! Points, vectors and sampling regions in three dimensions.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A vector (or point) of ℝ³.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Positions share the vector representation.
pub type Point3 = Vec3;

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const EX: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const EY: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const EZ: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Unit vector along axis `i` (0, 1 or 2).
    pub fn axis(i: usize) -> Self {
        match i {
            0 => Self::EX,
            1 => Self::EY,
            2 => Self::EZ,
            _ => panic!("axis index {i} out of range"),
        }
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y).hypot(self.z)
    }

    pub fn norm_inf(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(f(self.x), f(self.y), f(self.z))
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("component index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Axis-aligned box `[lo.x, hi.x] × [lo.y, hi.y] × [lo.z, hi.z]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: Point3,
    pub hi: Point3,
}

impl Aabb {
    /// Builds a box from per-axis bounds; bounds are reordered when reversed.
    pub fn new(lo: Point3, hi: Point3) -> Self {
        Self {
            lo: Vec3::new(lo.x.min(hi.x), lo.y.min(hi.y), lo.z.min(hi.z)),
            hi: Vec3::new(lo.x.max(hi.x), lo.y.max(hi.y), lo.z.max(hi.z)),
        }
    }

    /// `[x0,x1]×[y0,y1]×[z0,z1]`
    pub fn from_bounds(b: [f64; 6]) -> Self {
        Self::new(Vec3::new(b[0], b[2], b[4]), Vec3::new(b[1], b[3], b[5]))
    }

    pub fn cube(lo: f64, hi: f64) -> Self {
        Self::new(Vec3::new(lo, lo, lo), Vec3::new(hi, hi, hi))
    }

    pub fn unit_cell() -> Self {
        Self::cube(0.0, 1.0)
    }

    pub fn center(&self) -> Point3 {
        (self.lo + self.hi) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.hi - self.lo
    }

    pub fn contains(&self, p: Point3) -> bool {
        (0..3).all(|i| p[i] >= self.lo[i] && p[i] <= self.hi[i])
    }

    pub fn clamp(&self, p: Point3) -> Point3 {
        Vec3::new(
            p.x.clamp(self.lo.x, self.hi.x),
            p.y.clamp(self.lo.y, self.hi.y),
            p.z.clamp(self.lo.z, self.hi.z),
        )
    }

    /// Point at unit-cube coordinates `u ∈ [0,1]³`.
    pub fn lerp(&self, u: [f64; 3]) -> Point3 {
        let e = self.extent();
        Vec3::new(
            self.lo.x + u[0] * e.x,
            self.lo.y + u[1] * e.y,
            self.lo.z + u[2] * e.z,
        )
    }

    /// Regular lattice with `n` points per axis (endpoints included), x fastest.
    pub fn lattice(&self, n: usize) -> Vec<Point3> {
        let coord = |i: usize| {
            if n <= 1 {
                0.5
            } else {
                i as f64 / (n - 1) as f64
            }
        };
        let mut pts = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    pts.push(self.lerp([coord(i), coord(j), coord(k)]));
                }
            }
        }
        pts
    }
}

/// Radical inverse of `index` in `base`.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut acc = 0.0;
    while index > 0 {
        acc += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    acc
}

/// Halton low-discrepancy sequence in bases (2, 3, 5).
///
/// The sequence index starts at `1 + seed`, so different seeds give
/// disjoint, still deterministic, windows of the same sequence.
#[derive(Clone, Debug)]
pub struct Halton {
    next: u64,
}

impl Halton {
    pub fn new(seed: u64) -> Self {
        Self { next: 1 + seed }
    }

    pub fn next_unit(&mut self) -> [f64; 3] {
        let i = self.next;
        self.next += 1;
        [
            radical_inverse(i, 2),
            radical_inverse(i, 3),
            radical_inverse(i, 5),
        ]
    }

    /// First `n` points of the window mapped into `region`.
    pub fn sample(region: &Aabb, n: usize, seed: u64) -> Vec<Point3> {
        let mut h = Self::new(seed);
        (0..n).map(|_| region.lerp(h.next_unit())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_product_is_orthogonal() {
        let a = Vec3::new(1.0, 2.0, 3.0);
        let b = Vec3::new(-0.5, 4.0, 1.0);
        let c = a.cross(b);
        assert!(c.dot(a).abs() < 1e-14);
        assert!(c.dot(b).abs() < 1e-14);
        assert_eq!(Vec3::EX.cross(Vec3::EY), Vec3::EZ);
    }

    #[test]
    fn halton_first_points() {
        let mut h = Halton::new(0);
        assert_eq!(h.next_unit(), [0.5, 1.0 / 3.0, 0.2]);
        assert_eq!(h.next_unit(), [0.25, 2.0 / 3.0, 0.4]);
        let pts = Halton::sample(&Aabb::cube(-2.0, 2.0), 100, 0);
        assert!(pts.iter().all(|p| Aabb::cube(-2.0, 2.0).contains(*p)));
    }

    #[test]
    fn lattice_includes_corners() {
        let b = Aabb::from_bounds([0.0, 1.0, -1.0, 1.0, 2.0, 3.0]);
        let pts = b.lattice(3);
        assert_eq!(pts.len(), 27);
        assert_eq!(pts[0], b.lo);
        assert_eq!(pts[26], b.hi);
        assert_eq!(Aabb::unit_cell().lattice(1)[0], Vec3::new(0.5, 0.5, 0.5));
    }
}
