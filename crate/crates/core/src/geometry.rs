//! Euclidean primitives in dimension `d >= 2`: points, axis-aligned boxes,
//! balls and simple shells (differences of concentric open cubes).
//!
//! Containment tests work on closed sets with exact comparisons. Shell
//! validation (cube-ness, concentricity) is the one place a relative
//! tolerance is used, so that scaled and translated shells stay valid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative tolerance for shell validation.
const SHELL_RTOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point<T> {
    coords: Vec<T>,
}

impl<T: Scalar> Point<T> {
    pub fn new(coords: Vec<T>) -> Self {
        Self { coords }
    }

    pub fn splat(dim: usize, value: T) -> Self {
        Self { coords: vec![value; dim] }
    }

    pub fn origin(dim: usize) -> Self {
        Self::splat(dim, T::zero())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn scaled(&self, s: T) -> Self {
        Self::new(self.coords.iter().map(|&c| c * s).collect())
    }

    pub fn offset(&self, v: &Point<T>) -> Self {
        debug_assert_eq!(self.dim(), v.dim());
        Self::new(self.coords.iter().zip(&v.coords).map(|(&a, &b)| a + b).collect())
    }

    pub fn negated(&self) -> Self {
        Self::new(self.coords.iter().map(|&c| -c).collect())
    }

    pub fn distance(&self, other: &Point<T>) -> T {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(&a, &b)| (a - b) * (a - b))
            .fold(T::zero(), |acc, x| acc + x)
            .sqrt()
    }

    /// Max-norm distance.
    pub fn distance_inf(&self, other: &Point<T>) -> T {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}

impl<T> std::ops::Index<usize> for Point<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.coords[i]
    }
}

/// Closed axis-aligned box `[lo, hi]` with nonempty interior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox<T>", into = "RawBox<T>")]
pub struct AxisBox<T: Scalar> {
    lo: Point<T>,
    hi: Point<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox<T> {
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Scalar> TryFrom<RawBox<T>> for AxisBox<T> {
    type Error = Error;
    fn try_from(raw: RawBox<T>) -> Result<Self> {
        AxisBox::new(Point::new(raw.lo), Point::new(raw.hi))
    }
}

impl<T: Scalar> From<AxisBox<T>> for RawBox<T> {
    fn from(b: AxisBox<T>) -> Self {
        RawBox { lo: b.lo.coords, hi: b.hi.coords }
    }
}

impl<T: Scalar> AxisBox<T> {
    pub fn new(lo: Point<T>, hi: Point<T>) -> Result<Self> {
        if lo.dim() != hi.dim() {
            return Err(Error::DimensionMismatch { expected: lo.dim(), got: hi.dim() });
        }
        for (axis, (&l, &h)) in lo.coords().iter().zip(hi.coords()).enumerate() {
            // also rejects NaN
            if !(l < h) {
                return Err(Error::EmptyBox { axis, lo: l.to_f64_lossy(), hi: h.to_f64_lossy() });
            }
        }
        Ok(Self { lo, hi })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: T, hi: T) -> Result<Self> {
        Self::new(Point::splat(dim, lo), Point::splat(dim, hi))
    }

    /// Cube with the given center and side length.
    pub fn centered_cube(center: &Point<T>, side: T) -> Result<Self> {
        let half = side / T::lit(2.0);
        Self::new(
            Point::new(center.coords().iter().map(|&c| c - half).collect()),
            Point::new(center.coords().iter().map(|&c| c + half).collect()),
        )
    }

    pub fn unit(dim: usize) -> Self {
        Self::cube(dim, T::zero(), T::one()).expect("unit cube is valid")
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    #[inline]
    pub fn lo(&self) -> &Point<T> {
        &self.lo
    }

    #[inline]
    pub fn hi(&self) -> &Point<T> {
        &self.hi
    }

    pub fn side(&self, axis: usize) -> T {
        self.hi[axis] - self.lo[axis]
    }

    pub fn sides(&self) -> Vec<T> {
        (0..self.dim()).map(|i| self.side(i)).collect()
    }

    pub fn center(&self) -> Point<T> {
        let two = T::lit(2.0);
        Point::new(self.lo.coords().iter().zip(self.hi.coords()).map(|(&l, &h)| (l + h) / two).collect())
    }

    pub fn volume(&self) -> T {
        (0..self.dim()).map(|i| self.side(i)).fold(T::one(), |acc, s| acc * s)
    }

    /// Euclidean diameter (length of the main diagonal).
    pub fn diameter(&self) -> T {
        self.lo.distance(&self.hi)
    }

    pub fn is_cube(&self) -> bool {
        let s0 = self.side(0);
        let tol = T::lit(SHELL_RTOL) * s0.abs();
        (1..self.dim()).all(|i| (self.side(i) - s0).abs() <= tol)
    }

    pub fn contains_point(&self, p: &Point<T>) -> bool {
        (0..self.dim()).all(|i| self.lo[i] <= p[i] && p[i] <= self.hi[i])
    }

    /// Membership in the open interior.
    pub fn interior_contains_point(&self, p: &Point<T>) -> bool {
        (0..self.dim()).all(|i| self.lo[i] < p[i] && p[i] < self.hi[i])
    }

    /// True if `other` is a subset of `self` (both closed).
    pub fn contains_box(&self, other: &AxisBox<T>) -> bool {
        (0..self.dim()).all(|i| self.lo[i] <= other.lo[i] && other.hi[i] <= self.hi[i])
    }

    /// Euclidean distance from `p` to the box (0 inside).
    pub fn distance_to_point(&self, p: &Point<T>) -> T {
        let mut acc = T::zero();
        for i in 0..self.dim() {
            let d = if p[i] < self.lo[i] {
                self.lo[i] - p[i]
            } else if p[i] > self.hi[i] {
                p[i] - self.hi[i]
            } else {
                T::zero()
            };
            acc = acc + d * d;
        }
        acc.sqrt()
    }

    /// Euclidean distance from `p` to the boundary of the box.
    pub fn distance_to_boundary(&self, p: &Point<T>) -> T {
        if self.contains_point(p) {
            (0..self.dim())
                .map(|i| (p[i] - self.lo[i]).min(self.hi[i] - p[i]))
                .fold(T::infinity(), T::min)
        } else {
            self.distance_to_point(p)
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        Self { lo: self.lo.scaled(s), hi: self.hi.scaled(s) }
    }

    pub fn translated(&self, v: &Point<T>) -> Self {
        Self { lo: self.lo.offset(v), hi: self.hi.offset(v) }
    }

    /// Max-norm inflation: every face moves outward by `r`.
    pub fn inflate(&self, r: T) -> Self {
        debug_assert!(r >= T::zero());
        Self {
            lo: Point::new(self.lo.coords().iter().map(|&c| c - r).collect()),
            hi: Point::new(self.hi.coords().iter().map(|&c| c + r).collect()),
        }
    }
}

/// Free-function form of [`AxisBox::inflate`].
pub fn inflate<T: Scalar>(b: &AxisBox<T>, r: T) -> AxisBox<T> {
    b.inflate(r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball<T> {
    pub center: Point<T>,
    pub radius: T,
}

impl<T: Scalar> Ball<T> {
    pub fn new(center: Point<T>, radius: T) -> Self {
        debug_assert!(radius > T::zero());
        Self { center, radius }
    }

    pub fn diameter(&self) -> T {
        self.radius + self.radius
    }

    pub fn contains_point(&self, p: &Point<T>) -> bool {
        let mut acc = T::zero();
        for i in 0..p.dim() {
            let d = p[i] - self.center[i];
            acc = acc + d * d;
        }
        acc <= self.radius * self.radius
    }
}

/// Closed Euclidean ball meets closed box.
pub fn ball_intersects_box<T: Scalar>(ball: &Ball<T>, b: &AxisBox<T>) -> bool {
    let mut acc = T::zero();
    for i in 0..b.dim() {
        let c = ball.center[i];
        let d = if c < b.lo()[i] {
            b.lo()[i] - c
        } else if c > b.hi()[i] {
            c - b.hi()[i]
        } else {
            T::zero()
        };
        acc = acc + d * d;
    }
    acc <= ball.radius * ball.radius
}

/// Closed ball is a subset of the closed box.
pub fn ball_inside_box<T: Scalar>(ball: &Ball<T>, b: &AxisBox<T>) -> bool {
    (0..b.dim()).all(|i| b.lo()[i] <= ball.center[i] - ball.radius && ball.center[i] + ball.radius <= b.hi()[i])
}

/// Parametric shape family of the soup.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Ball,
    /// Axis-aligned cube; its scale parameter is the half-side.
    AxisCube,
}

impl ShapeKind {
    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Ball => "ball",
            ShapeKind::AxisCube => "axis_cube",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ball" => Some(ShapeKind::Ball),
            "axis_cube" | "cube" => Some(ShapeKind::AxisCube),
            _ => None,
        }
    }

    /// Ratio diameter / scale: 2 for balls, 2·√d for cubes (the diagonal).
    pub fn diameter_factor<T: Scalar>(self, dim: usize) -> T {
        match self {
            ShapeKind::Ball => T::lit(2.0),
            ShapeKind::AxisCube => T::lit(2.0) * T::from_usize(dim).sqrt(),
        }
    }

    pub fn diameter<T: Scalar>(self, dim: usize, scale: T) -> T {
        scale * self.diameter_factor::<T>(dim)
    }

    pub fn scale_from_diameter<T: Scalar>(self, dim: usize, dia: T) -> T {
        dia / self.diameter_factor::<T>(dim)
    }

    /// Max-norm reach of a shape with this scale around its center.
    pub fn reach<T: Scalar>(self, scale: T) -> T {
        scale
    }

    pub fn contains_point<T: Scalar>(self, center: &Point<T>, scale: T, p: &Point<T>) -> bool {
        self.contains_coords(center, scale, p.coords())
    }

    #[inline]
    pub fn contains_coords<T: Scalar>(self, center: &Point<T>, scale: T, p: &[T]) -> bool {
        match self {
            ShapeKind::Ball => {
                let mut acc = T::zero();
                for (i, &x) in p.iter().enumerate() {
                    let d = x - center[i];
                    acc = acc + d * d;
                }
                acc <= scale * scale
            }
            ShapeKind::AxisCube => p.iter().enumerate().all(|(i, &x)| (x - center[i]).abs() <= scale),
        }
    }

    pub fn intersects_box<T: Scalar>(self, center: &Point<T>, scale: T, b: &AxisBox<T>) -> bool {
        match self {
            ShapeKind::Ball => ball_intersects_box(&Ball { center: center.clone(), radius: scale }, b),
            ShapeKind::AxisCube => {
                (0..b.dim()).all(|i| center[i] - scale <= b.hi()[i] && b.lo()[i] <= center[i] + scale)
            }
        }
    }

    pub fn inside_box<T: Scalar>(self, center: &Point<T>, scale: T, b: &AxisBox<T>) -> bool {
        // identical test for both kinds: the max-norm extent is `scale`
        (0..b.dim()).all(|i| b.lo()[i] <= center[i] - scale && center[i] + scale <= b.hi()[i])
    }
}

/// `outer \ closure(inner)` for concentric open cubes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawShell<T>", into = "RawShell<T>")]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct SimpleShell<T: Scalar> {
    outer: AxisBox<T>,
    inner: AxisBox<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
struct RawShell<T: Scalar> {
    outer: AxisBox<T>,
    inner: AxisBox<T>,
}

impl<T: Scalar> TryFrom<RawShell<T>> for SimpleShell<T> {
    type Error = Error;
    fn try_from(raw: RawShell<T>) -> Result<Self> {
        shell_new(raw.outer, raw.inner)
    }
}

impl<T: Scalar> From<SimpleShell<T>> for RawShell<T> {
    fn from(s: SimpleShell<T>) -> Self {
        RawShell { outer: s.outer, inner: s.inner }
    }
}

/// Validates and builds a simple shell.
pub fn shell_new<T: Scalar>(outer: AxisBox<T>, inner: AxisBox<T>) -> Result<SimpleShell<T>> {
    if outer.dim() != inner.dim() {
        return Err(Error::DimensionMismatch { expected: outer.dim(), got: inner.dim() });
    }
    if !outer.is_cube() || !inner.is_cube() {
        return Err(Error::NotCube);
    }
    let tol = T::lit(SHELL_RTOL) * outer.side(0);
    let (co, ci) = (outer.center(), inner.center());
    if (0..outer.dim()).any(|i| (co[i] - ci[i]).abs() > tol) {
        return Err(Error::NotConcentric);
    }
    if !(0..outer.dim()).all(|i| outer.lo()[i] < inner.lo()[i] && inner.hi()[i] < outer.hi()[i]) {
        return Err(Error::NotNested);
    }
    Ok(SimpleShell { outer, inner })
}

impl<T: Scalar> SimpleShell<T> {
    /// Shell with given center and outer/inner side lengths.
    pub fn centered(center: &Point<T>, outer_side: T, inner_side: T) -> Result<Self> {
        shell_new(AxisBox::centered_cube(center, outer_side)?, AxisBox::centered_cube(center, inner_side)?)
    }

    #[inline]
    pub fn outer(&self) -> &AxisBox<T> {
        &self.outer
    }

    #[inline]
    pub fn inner(&self) -> &AxisBox<T> {
        &self.inner
    }

    pub fn dim(&self) -> usize {
        self.outer.dim()
    }

    /// Point lies in the closed shell `closure(outer) \ interior(inner)`.
    pub fn closed_contains_point(&self, p: &Point<T>) -> bool {
        self.outer.contains_point(p) && !self.inner.interior_contains_point(p)
    }
}

/// `sA = { x : x/s ∈ A }`.
pub fn scale_shell<T: Scalar>(shell: &SimpleShell<T>, s: T) -> SimpleShell<T> {
    debug_assert!(s > T::zero());
    SimpleShell { outer: shell.outer.scaled(s), inner: shell.inner.scaled(s) }
}

pub fn translate_shell<T: Scalar>(shell: &SimpleShell<T>, v: &Point<T>) -> SimpleShell<T> {
    SimpleShell { outer: shell.outer.translated(v), inner: shell.inner.translated(v) }
}
