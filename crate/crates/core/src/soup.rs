//! Scale-invariant Poissonian soups.
//!
//! Shapes have centers distributed by Lebesgue measure and a scale
//! parameter `ρ` (radius for balls, half-side for cubes) with intensity
//! `λ ρ^{-(d+1)} dρ dx`. Sizes are cut off by diameter: only shapes with
//! diameter in `(dia_min, dia_max]` are simulated.

use std::io::{Read, Write};

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AxisBox, Point, ShapeKind};
use crate::rng::{unit_f64, unit_f64_open_closed, Stream};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoupMode {
    /// Full-space soup, keeping every shape that meets the window.
    FullSpaceRestricted,
    /// Soup in a domain: only shapes contained in the window.
    ContainedInDomain,
}

impl SoupMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full" | "full_space_restricted" => Some(SoupMode::FullSpaceRestricted),
            "contained" | "contained_in_domain" => Some(SoupMode::ContainedInDomain),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoupSpec {
    pub dim: usize,
    pub lambda: f64,
    pub kind: ShapeKind,
    pub dia_min: f64,
    pub dia_max: f64,
    pub window: AxisBox<f64>,
    pub mode: SoupMode,
    pub seed: u64,
}

impl SoupSpec {
    /// Ball soup in full-space mode.
    pub fn balls(window: AxisBox<f64>, lambda: f64, dia_min: f64, dia_max: f64, seed: u64) -> Self {
        Self {
            dim: window.dim(),
            lambda,
            kind: ShapeKind::Ball,
            dia_min,
            dia_max,
            window,
            mode: SoupMode::FullSpaceRestricted,
            seed,
        }
    }

    /// `λ = 0` is accepted and describes the empty soup.
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::DimensionTooSmall(self.dim));
        }
        if self.window.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: self.window.dim() });
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidSoupSpec(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.dia_min >= 0.0) || !(self.dia_max > self.dia_min) || !self.dia_max.is_finite() {
            return Err(Error::InvalidSoupSpec(format!(
                "need 0 <= dia_min < dia_max, got ({}, {}]",
                self.dia_min, self.dia_max
            )));
        }
        Ok(())
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }

    pub fn with_dia_min(&self, dia_min: f64) -> Self {
        Self { dia_min, ..self.clone() }
    }

    /// Dyadic diameter bands `(max(dia_min, dia_max 2^{-j-1}), dia_max 2^{-j}]`.
    pub fn diameter_bands(&self) -> Result<Vec<(f64, f64)>> {
        if self.dia_min <= 0.0 {
            return Err(Error::ResolutionZero);
        }
        let mut bands = Vec::new();
        let mut hi = self.dia_max;
        while hi > self.dia_min {
            let lo = (hi * 0.5).max(self.dia_min);
            bands.push((lo, hi));
            hi *= 0.5;
        }
        Ok(bands)
    }
}

/// `λ Vol (a^{-d} - b^{-d}) / d` for the scale bounds `a < b`.
pub fn intensity_mass<T: Scalar>(dim: usize, lambda: T, volume: T, scale_lo: T, scale_hi: T) -> T {
    let d = dim as i32;
    lambda * volume * (scale_lo.powi(-d) - scale_hi.powi(-d)) / T::from_usize(dim)
}

/// Mean number of shapes with center in `region` and diameter in
/// `(dia_lo, dia_hi]`.
pub fn expected_count_in<T: Scalar>(
    dim: usize,
    lambda: T,
    kind: ShapeKind,
    region: &AxisBox<T>,
    dia_lo: T,
    dia_hi: T,
) -> Result<T> {
    if !(dia_lo < dia_hi) {
        return Err(Error::EmptyBand { lo: dia_lo.to_f64_lossy(), hi: dia_hi.to_f64_lossy() });
    }
    if dia_lo <= T::zero() {
        return Err(Error::UnboundedMeasure);
    }
    let a = kind.scale_from_diameter(dim, dia_lo);
    let b = kind.scale_from_diameter(dim, dia_hi);
    Ok(intensity_mass(dim, lambda, region.volume(), a, b))
}

pub fn expected_count(spec: &SoupSpec, region: &AxisBox<f64>, dia_lo: f64, dia_hi: f64) -> Result<f64> {
    if region.dim() != spec.dim {
        return Err(Error::DimensionMismatch { expected: spec.dim, got: region.dim() });
    }
    expected_count_in(spec.dim, spec.lambda, spec.kind, region, dia_lo, dia_hi)
}

/// Inverse CDF of the density `∝ r^{-(d+1)}` on `[r_lo, r_hi]`.
pub fn sample_radius<T: Scalar>(dim: usize, r_lo: T, r_hi: T, u: T) -> T {
    let d = dim as i32;
    let lo = r_lo.powi(-d);
    let r = (lo - u * (lo - r_hi.powi(-d))).powf(-T::one() / T::from_usize(dim));
    // clamp away rounding at u = 0 or 1
    r.max(r_lo).min(r_hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub center: Point<f64>,
    /// Radius (ball) or half-side (cube).
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShapeSet {
    pub kind: ShapeKind,
    pub spec: SoupSpec,
    pub shapes: Vec<Shape>,
}

impl ShapeSet {
    pub fn empty(spec: &SoupSpec) -> Self {
        Self { kind: spec.kind, spec: spec.clone(), shapes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn diameter(&self, shape: &Shape) -> f64 {
        self.kind.diameter(self.spec.dim, shape.scale)
    }

    pub fn contains_point(&self, shape: &Shape, p: &Point<f64>) -> bool {
        self.kind.contains_point(&shape.center, shape.scale, p)
    }

    /// Checks the realization invariants against `spec`.
    pub fn check_invariants(&self) -> Result<()> {
        for s in &self.shapes {
            let dia = self.diameter(s);
            if !(dia > self.spec.dia_min && dia <= self.spec.dia_max) && !(dia == self.spec.dia_min) {
                return Err(Error::InvalidSoupSpec(format!("shape diameter {dia} outside band")));
            }
            let ok = match self.spec.mode {
                SoupMode::FullSpaceRestricted => self.kind.intersects_box(&s.center, s.scale, &self.spec.window),
                SoupMode::ContainedInDomain => self.kind.inside_box(&s.center, s.scale, &self.spec.window),
            };
            if !ok {
                return Err(Error::InvalidSoupSpec("shape violates window restriction".into()));
            }
        }
        Ok(())
    }

    /// Shapes with centers in `region`, diameter in `(dia_lo, dia_hi]`.
    pub fn count_in(&self, region: &AxisBox<f64>, dia_lo: f64, dia_hi: f64) -> usize {
        self.shapes
            .iter()
            .filter(|s| {
                let dia = self.diameter(s);
                dia > dia_lo && dia <= dia_hi && region.contains_point(&s.center)
            })
            .count()
    }
}

/// Draws a Poisson realization restricted to `spec.window`.
///
/// Bands are sampled with independent children of `stream`, so the
/// result is a pure function of `(spec, stream)`.
pub fn sample_soup(spec: &SoupSpec, stream: &Stream) -> Result<ShapeSet> {
    spec.validate()?;
    let bands = spec.diameter_bands()?;
    let d = spec.dim;
    let mut out = ShapeSet::empty(spec);
    if spec.lambda == 0.0 {
        return Ok(out);
    }
    for (j, &(dia_lo, dia_hi)) in bands.iter().enumerate() {
        let s_lo = spec.kind.scale_from_diameter(d, dia_lo);
        let s_hi = spec.kind.scale_from_diameter(d, dia_hi);
        let region = match spec.mode {
            SoupMode::FullSpaceRestricted => spec.window.inflate(spec.kind.reach(s_hi)),
            SoupMode::ContainedInDomain => spec.window.clone(),
        };
        let mean = intensity_mass(d, spec.lambda, region.volume(), s_lo, s_hi);
        let mut rng = stream.child(j as u64).rng();
        let count = if mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| Error::InvalidSoupSpec(format!("poisson mean {mean}: {e}")))?
                .sample(&mut rng) as u64
        } else {
            0
        };
        let sides = region.sides();
        for _ in 0..count {
            let center = Point::new((0..d).map(|i| region.lo()[i] + unit_f64(&mut rng) * sides[i]).collect());
            let scale = sample_radius(d, s_lo, s_hi, unit_f64_open_closed(&mut rng));
            let dia = spec.kind.diameter(d, scale);
            if !(dia > spec.dia_min && dia <= spec.dia_max) {
                continue;
            }
            let keep = match spec.mode {
                SoupMode::FullSpaceRestricted => spec.kind.intersects_box(&center, scale, &spec.window),
                SoupMode::ContainedInDomain => spec.kind.inside_box(&center, scale, &spec.window),
            };
            if keep {
                out.shapes.push(Shape { center, scale });
            }
        }
    }
    Ok(out)
}

/// Independent thinning to intensity `lambda_lo`.
///
/// Shape `i` is kept iff `u_i < lambda_lo / λ` where `u_i` is the `i`-th
/// uniform of `stream`; calls with the same stream are nested in
/// `lambda_lo`, which gives the monotone coupling across intensities.
pub fn thin_to(set: &ShapeSet, lambda_lo: f64, stream: &Stream) -> Result<ShapeSet> {
    let lambda = set.spec.lambda;
    if !(lambda_lo >= 0.0) || lambda_lo > lambda {
        return Err(Error::BadIntensity { target: lambda_lo, source_lambda: lambda });
    }
    let spec = set.spec.with_lambda(lambda_lo);
    if lambda_lo == lambda {
        return Ok(ShapeSet { spec, ..set.clone() });
    }
    let ratio = lambda_lo / lambda;
    let mut rng = stream.rng();
    let shapes = set.shapes.iter().filter(|_| unit_f64(&mut rng) < ratio).cloned().collect();
    Ok(ShapeSet { kind: set.kind, spec, shapes })
}

/// Keeps exactly the shapes with diameter `>= eps`.
pub fn filter_min_diameter(set: &ShapeSet, eps: f64) -> ShapeSet {
    let shapes = set.shapes.iter().filter(|s| set.diameter(s) >= eps).cloned().collect();
    let spec = set.spec.with_dia_min(eps.max(set.spec.dia_min).min(set.spec.dia_max));
    ShapeSet { kind: set.kind, spec, shapes }
}

/// One row of the shape-set CSV/JSON formats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeRecord {
    pub kind: ShapeKind,
    pub center: Vec<f64>,
    pub scale: f64,
}

impl ShapeSet {
    pub fn records(&self) -> Vec<ShapeRecord> {
        self.shapes
            .iter()
            .map(|s| ShapeRecord { kind: self.kind, center: s.center.coords().to_vec(), scale: s.scale })
            .collect()
    }

    /// Rebuilds a shape set from records read back from disk.
    pub fn from_records(spec: &SoupSpec, records: &[ShapeRecord]) -> Result<Self> {
        let mut shapes = Vec::with_capacity(records.len());
        for r in records {
            if r.kind != spec.kind {
                return Err(Error::Parse(format!("shape kind {} does not match spec", r.kind.name())));
            }
            if r.center.len() != spec.dim {
                return Err(Error::DimensionMismatch { expected: spec.dim, got: r.center.len() });
            }
            shapes.push(Shape { center: Point::new(r.center.clone()), scale: r.scale });
        }
        Ok(Self { kind: spec.kind, spec: spec.clone(), shapes })
    }

    /// CSV with header `kind,dim,center_0..center_{d-1},scale`; floats use
    /// the shortest representation that round-trips.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let d = self.spec.dim;
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["kind".to_string(), "dim".to_string()];
        header.extend((0..d).map(|i| format!("center_{i}")));
        header.push("scale".into());
        wtr.write_record(&header)?;
        for s in &self.shapes {
            let mut row = vec![self.kind.name().to_string(), d.to_string()];
            row.extend(s.center.coords().iter().map(|c| format!("{c:?}")));
            row.push(format!("{:?}", s.scale));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, &self.records())?;
        Ok(())
    }
}

pub fn read_shapes_csv<R: Read>(r: R) -> Result<Vec<ShapeRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let ncols = headers.len();
    if ncols < 5 || &headers[0] != "kind" || &headers[1] != "dim" || &headers[ncols - 1] != "scale" {
        return Err(Error::Parse("unexpected shape CSV header".into()));
    }
    let d = ncols - 3;
    for (i, h) in headers.iter().skip(2).take(d).enumerate() {
        if h != format!("center_{i}") {
            return Err(Error::Parse(format!("unexpected column {h}")));
        }
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s}: {e}")));
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let kind = ShapeKind::parse(&row[0]).ok_or_else(|| Error::Parse(format!("unknown kind {}", &row[0])))?;
        let dim: usize = row[1].parse().map_err(|_| Error::Parse(format!("bad dim {}", &row[1])))?;
        if dim != d {
            return Err(Error::DimensionMismatch { expected: d, got: dim });
        }
        let center = (0..d).map(|i| num(&row[2 + i])).collect::<Result<Vec<_>>>()?;
        out.push(ShapeRecord { kind, center, scale: num(&row[ncols - 1])? });
    }
    Ok(out)
}

pub fn read_shapes_json<R: Read>(r: R) -> Result<Vec<ShapeRecord>> {
    Ok(serde_json::from_reader(r)?)
}
