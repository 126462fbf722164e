//! Foundational geometry: vectors, boxes, weighted sites, half-spaces, and
//! the power-distance / bisector formulas everything else is built on.

use thiserror::Error;

use crate::real::Real;

/// Two site positions are equal within the degeneracy tolerance; the caller
/// must apply the duplicate-site rule instead of constructing a bisector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("sites {a} and {b} are coincident within the degeneracy tolerance")]
pub struct CoincidentSites {
    pub a: u32,
    pub b: u32,
}

// ---------------------------------------------------------------------------
// Vectors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3<R> {
    pub x: R,
    pub y: R,
    pub z: R,
}

impl<R: Real> Vec3<R> {
    pub const fn new(x: R, y: R, z: R) -> Self {
        Self { x, y, z }
    }

    pub fn splat(v: R) -> Self {
        Self { x: v, y: v, z: v }
    }

    pub fn from_f64(a: [f64; 3]) -> Self {
        Self::new(R::from_f64(a[0]), R::from_f64(a[1]), R::from_f64(a[2]))
    }

    pub fn to_f64(self) -> [f64; 3] {
        [self.x.to_f64(), self.y.to_f64(), self.z.to_f64()]
    }

    #[inline]
    pub fn axis(self, k: usize) -> R {
        match k {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    #[inline]
    pub fn dot(self, o: Self) -> R {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn length_squared(self) -> R {
        self.dot(self)
    }

    #[inline]
    pub fn length(self) -> R {
        self.length_squared().sqrt()
    }

    #[inline]
    pub fn distance_squared(self, o: Self) -> R {
        (self - o).length_squared()
    }

    #[inline]
    pub fn distance(self, o: Self) -> R {
        self.distance_squared(o).sqrt()
    }

    #[inline]
    pub fn scale(self, s: R) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    #[inline]
    pub fn min(self, o: Self) -> Self {
        Self::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    #[inline]
    pub fn max(self, o: Self) -> Self {
        Self::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl<R: Real> std::ops::Add for Vec3<R> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<R: Real> std::ops::Sub for Vec3<R> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<R: Real> std::ops::Neg for Vec3<R> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

// ---------------------------------------------------------------------------
// Sites
// ---------------------------------------------------------------------------

/// A 3D position with a scalar weight; `id` is the site's index in the input
/// array and must be unique within a site set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedSite<R> {
    pub position: Vec3<R>,
    pub weight: R,
    pub id: u32,
}

impl<R: Real> WeightedSite<R> {
    pub fn new(position: Vec3<R>, weight: R, id: u32) -> Self {
        Self {
            position,
            weight,
            id,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.weight.is_finite()
    }
}

/// Convert a site array to another working precision, keeping ids.
pub fn convert_sites<A: Real, B: Real>(sites: &[WeightedSite<A>]) -> Vec<WeightedSite<B>> {
    sites
        .iter()
        .map(|s| WeightedSite {
            position: Vec3::from_f64(s.position.to_f64()),
            weight: B::from_f64(s.weight.to_f64()),
            id: s.id,
        })
        .collect()
}

/// Power distance `||x - p||^2 - w` from a point to a weighted site.
#[inline]
pub fn power_distance<R: Real>(x: Vec3<R>, s: &WeightedSite<R>) -> R {
    x.distance_squared(s.position) - s.weight
}

// ---------------------------------------------------------------------------
// Half-spaces
// ---------------------------------------------------------------------------

/// Where a clipping plane came from: the bisector with another site, or one
/// of the six faces of the global bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaneSource {
    Bisector(u32),
    Boundary(u8),
}

impl PlaneSource {
    /// Total order over plane identities, independent of storage index.
    /// Used to evaluate plane-triple intersections in a canonical operand
    /// order so a vertex position depends only on its defining planes.
    #[inline]
    pub fn sort_key(self) -> u64 {
        match self {
            PlaneSource::Boundary(f) => f as u64,
            PlaneSource::Bisector(id) => 6 + id as u64,
        }
    }

    pub fn is_boundary(self) -> bool {
        matches!(self, PlaneSource::Boundary(_))
    }
}

/// The half-space `{ x : dot(normal, x) + offset >= 0 }` with unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpace<R> {
    pub normal: Vec3<R>,
    pub offset: R,
    pub source: PlaneSource,
}

impl<R: Real> HalfSpace<R> {
    /// Signed distance of `x` to the plane; positive inside the half-space.
    #[inline]
    pub fn eval(&self, x: Vec3<R>) -> R {
        self.normal.dot(x) + self.offset
    }
}

/// Signed distance from `a.position` to the bisecting plane with `b`, along
/// the direction toward `b`:
///
/// ```text
/// d_ab = (||p_a - p_b||^2 + w_a - w_b) / (2 ||p_a - p_b||)
/// ```
///
/// Negative when `b`'s weight dominates, in which case `a`'s own position is
/// already outside its half-space and `a`'s cell may be empty.
pub fn bisector_distance<R: Real>(
    a: &WeightedSite<R>,
    b: &WeightedSite<R>,
    coincidence_sq: R,
) -> Result<R, CoincidentSites> {
    let d_sq = a.position.distance_squared(b.position);
    if d_sq <= coincidence_sq {
        return Err(CoincidentSites { a: a.id, b: b.id });
    }
    let d = d_sq.sqrt();
    // The weight difference is taken first so the result depends only on
    // w_a - w_b; a uniform weight shift then cancels exactly.
    let dw = a.weight - b.weight;
    Ok((d_sq + dw) / (R::TWO * d))
}

/// The half-space of points whose power distance to `a` does not exceed the
/// power distance to `b`. The unit normal points from `b` toward `a`.
pub fn bisector<R: Real>(
    a: &WeightedSite<R>,
    b: &WeightedSite<R>,
    coincidence_sq: R,
) -> Result<HalfSpace<R>, CoincidentSites> {
    let diff = b.position - a.position;
    let d_sq = diff.length_squared();
    if d_sq <= coincidence_sq {
        return Err(CoincidentSites { a: a.id, b: b.id });
    }
    let d = d_sq.sqrt();
    let toward = diff.scale(R::ONE / d);
    let dw = a.weight - b.weight;
    let dist = (d_sq + dw) / (R::TWO * d);
    // Plane passes through a.position + dist * toward; eval(x) is then the
    // signed distance dist - dot(toward, x - p_a).
    Ok(HalfSpace {
        normal: -toward,
        offset: toward.dot(a.position) + dist,
        source: PlaneSource::Bisector(b.id),
    })
}

// ---------------------------------------------------------------------------
// Axis-aligned boxes
// ---------------------------------------------------------------------------

/// Axis-aligned box. The empty box is represented by `min > max` and is
/// produced by [`Aabb::empty`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<R> {
    pub min: Vec3<R>,
    pub max: Vec3<R>,
}

impl<R: Real> Aabb<R> {
    pub fn new(min: Vec3<R>, max: Vec3<R>) -> Self {
        Self { min, max }
    }

    pub fn empty() -> Self {
        Self {
            min: Vec3::splat(R::INFINITY),
            max: Vec3::splat(R::NEG_INFINITY),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x || self.min.y > self.max.y || self.min.z > self.max.z
    }

    pub fn point(p: Vec3<R>) -> Self {
        Self { min: p, max: p }
    }

    pub fn from_points<I: IntoIterator<Item = Vec3<R>>>(points: I) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.include(p);
        }
        b
    }

    #[inline]
    pub fn include(&mut self, p: Vec3<R>) {
        self.min = self.min.min(p);
        self.max = self.max.max(p);
    }

    pub fn diagonal(&self) -> R {
        if self.is_empty() {
            R::ZERO
        } else {
            (self.max - self.min).length()
        }
    }

    /// True when `p` is strictly inside on every axis.
    pub fn contains_strict(&self, p: Vec3<R>) -> bool {
        p.x > self.min.x
            && p.x < self.max.x
            && p.y > self.min.y
            && p.y < self.max.y
            && p.z > self.min.z
            && p.z < self.max.z
    }

    pub fn contains(&self, p: Vec3<R>) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    /// Corner `k`: bit `b` of `k` set means the corner takes `max` on axis `b`.
    #[inline]
    pub fn corner(&self, k: usize) -> Vec3<R> {
        Vec3::new(
            if k & 1 != 0 { self.max.x } else { self.min.x },
            if k & 2 != 0 { self.max.y } else { self.min.y },
            if k & 4 != 0 { self.max.z } else { self.min.z },
        )
    }

    /// Squared Euclidean distance from `x` to the nearest point of the box.
    #[inline]
    pub fn min_distance_squared(&self, x: Vec3<R>) -> R {
        let dx = (self.min.x - x.x).max(R::ZERO).max(x.x - self.max.x);
        let dy = (self.min.y - x.y).max(R::ZERO).max(x.y - self.max.y);
        let dz = (self.min.z - x.z).max(R::ZERO).max(x.z - self.max.z);
        dx * dx + dy * dy + dz * dz
    }

    /// Euclidean distance from `x` to the nearest point of the box; zero when
    /// `x` is inside.
    #[inline]
    pub fn min_distance(&self, x: Vec3<R>) -> R {
        self.min_distance_squared(x).sqrt()
    }
}

// ---------------------------------------------------------------------------
// Tolerances
// ---------------------------------------------------------------------------

/// Scale-relative tolerances derived from the scene diagonal.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances<R> {
    /// A vertex with a plane evaluation in `[-plane_eps, plane_eps]` counts
    /// as inside. Keeping near-coplanar vertices biases toward extra
    /// candidate adjacencies rather than dropped faces.
    pub plane_eps: R,
    /// Two positions with squared distance at most this count as coincident.
    pub coincidence_sq: R,
}

impl<R: Real> Tolerances<R> {
    pub fn for_diagonal(diagonal: R) -> Self {
        Self {
            plane_eps: R::PLANE_EPS_FACTOR * diagonal,
            coincidence_sq: R::COINCIDENCE_FACTOR * diagonal * diagonal,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn site(p: [f64; 3], w: f64, id: u32) -> WeightedSite<f64> {
        WeightedSite::new(Vec3::new(p[0], p[1], p[2]), w, id)
    }

    #[test]
    fn power_distance_cases() {
        let s = site([0.0, 0.0, 0.0], 0.0, 0);
        assert_eq!(power_distance(Vec3::new(0.0, 0.0, 0.0), &s), 0.0);

        let s = site([0.0, 0.0, 0.0], 4.0, 0);
        assert_eq!(power_distance(Vec3::new(1.0, 2.0, 2.0), &s), 5.0);

        let s = site([0.0, 0.0, 0.0], -1.0, 0);
        assert_eq!(power_distance(Vec3::new(1.0, 0.0, 0.0), &s), 2.0);
    }

    #[test]
    fn bisector_unweighted_midpoint() {
        let a = site([0.0, 0.0, 0.0], 0.0, 0);
        let b = site([2.0, 0.0, 0.0], 0.0, 1);
        let h = bisector(&a, &b, 0.0).unwrap();
        // Plane x = 1, normal pointing back toward a.
        assert_eq!(h.normal.to_f64(), [-1.0, 0.0, 0.0]);
        assert!((h.eval(Vec3::new(1.0, 5.0, -3.0))).abs() < 1e-12);
        assert!(h.eval(Vec3::new(0.0, 0.0, 0.0)) > 0.0);
        assert!(h.eval(Vec3::new(2.0, 0.0, 0.0)) < 0.0);
    }

    #[test]
    fn bisector_weighted_planes() {
        let a = site([0.0, 0.0, 0.0], 3.0, 0);
        let b = site([2.0, 0.0, 0.0], 1.0, 1);
        let h = bisector(&a, &b, 0.0).unwrap();
        // (4 + 3 - 1) / 4 = 1.5 from a along +x.
        assert!(h.eval(Vec3::new(1.5, 0.0, 0.0)).abs() < 1e-12);

        let a = site([0.0, 0.0, 0.0], 0.0, 0);
        let b = site([0.0, 0.0, 4.0], 2.0, 1);
        let h = bisector(&a, &b, 0.0).unwrap();
        // (16 + 0 - 2) / 8 = 1.75 from a along +z.
        assert!(h.eval(Vec3::new(0.0, 0.0, 1.75)).abs() < 1e-12);
        assert!(h.eval(Vec3::new(0.0, 0.0, 1.74)) > 0.0);
    }

    #[test]
    fn bisector_distance_cases() {
        let tol = 0.0;
        let a = site([0.0, 0.0, 0.0], 0.0, 0);
        let b = site([2.0, 0.0, 0.0], 0.0, 1);
        assert_eq!(bisector_distance(&a, &b, tol).unwrap(), 1.0);

        let a = site([0.0, 0.0, 0.0], 3.0, 0);
        let b = site([2.0, 0.0, 0.0], 1.0, 1);
        assert_eq!(bisector_distance(&a, &b, tol).unwrap(), 1.5);

        let a = site([0.0, 0.0, 0.0], 0.0, 0);
        let b = site([1.0, 0.0, 0.0], 4.0, 1);
        assert_eq!(bisector_distance(&a, &b, tol).unwrap(), -1.5);
    }

    #[test]
    fn bisector_rejects_coincident_sites() {
        let a = site([1.0, 2.0, 3.0], 0.0, 0);
        let b = site([1.0, 2.0, 3.0], 5.0, 1);
        assert_eq!(bisector(&a, &b, 1e-30), Err(CoincidentSites { a: 0, b: 1 }));
        assert!(bisector_distance(&a, &b, 1e-30).is_err());
    }

    #[test]
    fn aabb_min_distance_cases() {
        let b = Aabb::new(Vec3::new(1.0, 1.0, 1.0), Vec3::new(2.0, 2.0, 2.0));
        let d = b.min_distance(Vec3::new(0.0, 0.0, 0.0));
        assert!((d - 3f64.sqrt()).abs() < 1e-15);

        assert_eq!(b.min_distance(Vec3::new(1.5, 1.5, 1.5)), 0.0);

        let b = Aabb::new(Vec3::new(-1.0, -1.0, 0.0), Vec3::new(1.0, 1.0, 1.0));
        assert_eq!(b.min_distance(Vec3::new(0.0, 0.0, 5.0)), 4.0);
    }

    #[test]
    fn empty_box_is_distinguishable() {
        let e = Aabb::<f64>::empty();
        assert!(e.is_empty());
        let mut b = Aabb::empty();
        b.include(Vec3::new(1.0, 2.0, 3.0));
        assert!(!b.is_empty());
        assert_eq!(b.min, b.max);
    }

    #[test]
    fn corner_indexing_matches_bit_pattern() {
        let b = Aabb::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(b.corner(0).to_f64(), [0.0, 0.0, 0.0]);
        assert_eq!(b.corner(1).to_f64(), [1.0, 0.0, 0.0]);
        assert_eq!(b.corner(2).to_f64(), [0.0, 2.0, 0.0]);
        assert_eq!(b.corner(7).to_f64(), [1.0, 2.0, 3.0]);
    }
}
