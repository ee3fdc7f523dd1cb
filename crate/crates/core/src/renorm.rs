//! Renormalized lattice field of shell crossings.
//!
//! For a template shell `A = B_out \ closure(B_in)` and `0 < s < 1`, the
//! translates `A_{x,s}` of `sA` are placed so that the inner cubes
//! `s B_in` tile space on a lattice indexed by `x`. The field
//! `X_s(x)` is 1 iff the complement of the soup of sets with diameter at
//! most `s` crosses `A_{x,s}`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{scale_shell, translate_shell, AxisBox, Point, SimpleShell};
use crate::lattice::{Adjacency, Lattice};
use crate::raster::{crosses_shell, rasterize};
use crate::soup::{ShapeSet, SoupSpec};
use crate::stats::{pearson, Correlation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenormSpec {
    /// Template shell `A`.
    pub shell: SimpleShell<f64>,
    /// Shrink factor.
    pub s: f64,
    pub lattice_extent: Vec<usize>,
    pub soup_spec: SoupSpec,
    /// Raster cell side used for every translate.
    pub h: f64,
}

impl RenormSpec {
    /// Spec whose soup window is exactly the bounding box of the
    /// translated shells; the soup diameter cutoff is set to `s`.
    pub fn fitted(
        shell: SimpleShell<f64>,
        s: f64,
        lattice_extent: Vec<usize>,
        base: &SoupSpec,
        h: f64,
    ) -> Result<Self> {
        let mut spec = Self { shell, s, lattice_extent, soup_spec: base.clone(), h };
        spec.soup_spec.dia_max = s;
        spec.soup_spec.window = spec.shells_bounding_box()?;
        spec.validate()?;
        Ok(spec)
    }

    /// Side length of the unscaled inner cube.
    pub fn inner_side(&self) -> f64 {
        self.shell.inner().side(0)
    }

    /// Lattice spacing `s·l`.
    pub fn spacing(&self) -> f64 {
        self.s * self.inner_side()
    }

    /// Max-norm lattice distance beyond which sites are independent:
    /// `(diam(B_out) + 2) / l`.
    pub fn independence_distance(&self) -> f64 {
        (self.shell.outer().diameter() + 2.0) / self.inner_side()
    }

    pub fn sites(&self) -> Lattice {
        Lattice::new(&self.lattice_extent)
    }

    /// Translate `A_{x,s}` for the lattice site with coordinates `x`. The
    /// site at the origin has its outer cube's low corner at the window
    /// anchor.
    pub fn site_shell(&self, x: &[usize], anchor: &Point<f64>) -> SimpleShell<f64> {
        let scaled = scale_shell(&self.shell, self.s);
        let spacing = self.spacing();
        let shift: Vec<f64> =
            (0..x.len()).map(|a| anchor[a] - scaled.outer().lo()[a] + x[a] as f64 * spacing).collect();
        translate_shell(&scaled, &Point::new(shift))
    }

    fn shells_bounding_box(&self) -> Result<AxisBox<f64>> {
        let d = self.shell.dim();
        if self.lattice_extent.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.lattice_extent.len() });
        }
        let anchor = Point::origin(d);
        let first = self.site_shell(&vec![0; d], &anchor);
        let last_site: Vec<usize> = self.lattice_extent.iter().map(|e| e.saturating_sub(1)).collect();
        let last = self.site_shell(&last_site, &anchor);
        AxisBox::new(first.outer().lo().clone(), last.outer().hi().clone())
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.shell.dim();
        if self.lattice_extent.len() != d || self.lattice_extent.contains(&0) {
            return Err(Error::InvalidRenormSpec("lattice extent must have d positive entries".into()));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::InvalidRenormSpec(format!("s must lie in (0, 1), got {}", self.s)));
        }
        if self.soup_spec.dim != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.soup_spec.dim });
        }
        if self.soup_spec.dia_max > self.s {
            return Err(Error::InvalidRenormSpec(format!(
                "soup cutoff {} exceeds s = {}",
                self.soup_spec.dia_max, self.s
            )));
        }
        for x in self.all_sites() {
            let shell = self.site_shell(&x, self.soup_spec.window.lo());
            if !self.soup_spec.window.contains_box(shell.outer()) {
                return Err(Error::WindowTooSmall);
            }
        }
        Ok(())
    }

    fn all_sites(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        let lat = self.sites();
        (0..lat.len()).map(move |i| lat.coords(i))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct XField {
    pub extent: Vec<usize>,
    /// One value per site, axis 0 fastest.
    pub values: Vec<bool>,
}

impl XField {
    pub fn get(&self, x: &[usize]) -> bool {
        self.values[Lattice::new(&self.extent).index(x)]
    }

    /// Site matrix for `d = 2` (rows are axis-1 indices); long format
    /// `i_0,...,i_{d-1},x` otherwise.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let lat = Lattice::new(&self.extent);
        if self.extent.len() == 2 {
            for y in 0..self.extent[1] {
                let row: Vec<&str> = (0..self.extent[0])
                    .map(|x| if self.values[lat.index(&[x, y])] { "1" } else { "0" })
                    .collect();
                writeln!(w, "{}", row.join(","))?;
            }
        } else {
            let header: Vec<String> = (0..self.extent.len()).map(|i| format!("i_{i}")).chain(["x".into()]).collect();
            writeln!(w, "{}", header.join(","))?;
            for (i, &v) in self.values.iter().enumerate() {
                let c: Vec<String> = lat.coords(i).iter().map(|c| c.to_string()).collect();
                writeln!(w, "{},{}", c.join(","), u8::from(v))?;
            }
        }
        Ok(())
    }
}

/// Evaluates `X_s(x)` for every site on one rasterization of `sample`.
pub fn extract_x_field(sample: &ShapeSet, spec: &RenormSpec) -> Result<XField> {
    if sample.spec.dia_max > spec.s {
        return Err(Error::InvalidRenormSpec(format!(
            "sample cutoff {} exceeds s = {}",
            sample.spec.dia_max, spec.s
        )));
    }
    let window = &spec.soup_spec.window;
    let grid = rasterize(sample, window, spec.h)?;
    let mut values = Vec::with_capacity(spec.sites().len());
    for x in spec.all_sites() {
        let shell = spec.site_shell(&x, window.lo());
        let crossed = crosses_shell(&grid, &shell, Adjacency::Face).map_err(|e| match e {
            Error::ShellOutsideGrid => Error::WindowTooSmall,
            other => other,
        })?;
        values.push(crossed);
    }
    Ok(XField { extent: spec.lattice_extent.clone(), values })
}

pub const MIN_DEPENDENCE_SAMPLES: usize = 1000;

/// Correlation of `X(x)` and `X(y)` over independent fields.
pub fn dependence_range_check(fields: &[XField], x: &[usize], y: &[usize], level: f64) -> Result<Correlation> {
    if fields.len() < MIN_DEPENDENCE_SAMPLES {
        return Err(Error::InsufficientSamples { needed: MIN_DEPENDENCE_SAMPLES, got: fields.len() });
    }
    let xs: Vec<f64> = fields.iter().map(|f| f64::from(u8::from(f.get(x)))).collect();
    let ys: Vec<f64> = fields.iter().map(|f| f64::from(u8::from(f.get(y)))).collect();
    Ok(pearson(&xs, &ys, level))
}

/// Fraction of fields with `X(x) = 1`, per site.
pub fn site_marginals(fields: &[XField]) -> Vec<f64> {
    let Some(first) = fields.first() else { return Vec::new() };
    let n = fields.len() as f64;
    (0..first.values.len()).map(|i| fields.iter().filter(|f| f.values[i]).count() as f64 / n).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceCorrelation {
    pub distance: usize,
    pub correlation: Correlation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenormSummary {
    pub site_marginals: Vec<f64>,
    pub pairwise_correlations_by_distance: Vec<DistanceCorrelation>,
    pub independence_distance: f64,
    pub n_fields: usize,
}

/// Correlations between the origin site and the sites `δ e_0` along axis 0.
pub fn summarize(fields: &[XField], spec: &RenormSpec, level: f64) -> RenormSummary {
    let d = spec.lattice_extent.len();
    let origin = vec![0; d];
    let pairs = (1..spec.lattice_extent[0])
        .map(|delta| {
            let mut y = origin.clone();
            y[0] = delta;
            let xs: Vec<f64> = fields.iter().map(|f| f64::from(u8::from(f.get(&origin)))).collect();
            let ys: Vec<f64> = fields.iter().map(|f| f64::from(u8::from(f.get(&y)))).collect();
            DistanceCorrelation { distance: delta, correlation: pearson(&xs, &ys, level) }
        })
        .collect();
    RenormSummary {
        site_marginals: site_marginals(fields),
        pairwise_correlations_by_distance: pairs,
        independence_distance: spec.independence_distance(),
        n_fields: fields.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shell_new;
    use crate::rng::Stream;
    use crate::soup::sample_soup;

    fn spec(lambda: f64) -> RenormSpec {
        let shell = shell_new(AxisBox::cube(2, 0.0, 3.0).unwrap(), AxisBox::cube(2, 1.0, 2.0).unwrap()).unwrap();
        let base = SoupSpec::balls(AxisBox::unit(2), lambda, 0.02, 0.1, 0);
        RenormSpec::fitted(shell, 0.1, vec![4, 2], &base, 0.005).unwrap()
    }

    #[test]
    fn geometry_of_translates() {
        let sp = spec(1.0);
        assert!((sp.spacing() - 0.1).abs() < 1e-15);
        let w = &sp.soup_spec.window;
        assert!((w.side(0) - 0.6).abs() < 1e-12 && (w.side(1) - 0.4).abs() < 1e-12);
        let a = sp.site_shell(&[1, 0], w.lo());
        let b = sp.site_shell(&[2, 0], w.lo());
        // inner cubes tile: neighbouring inner cubes share a face
        assert!((a.inner().hi()[0] - b.inner().lo()[0]).abs() < 1e-12);
        assert!((sp.independence_distance() - (18f64.sqrt() + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn empty_sample_is_all_ones() {
        let sp = spec(0.0);
        let sample = sample_soup(&sp.soup_spec, &Stream::new(1)).unwrap();
        let f = extract_x_field(&sample, &sp).unwrap();
        assert!(f.values.iter().all(|&v| v));
    }

    #[test]
    fn heavy_soup_is_all_zeros() {
        let sp = spec(200.0);
        let sample = sample_soup(&sp.soup_spec, &Stream::new(1)).unwrap();
        let f = extract_x_field(&sample, &sp).unwrap();
        assert!(f.values.iter().all(|&v| !v));
    }

    #[test]
    fn invalid_specs() {
        let sp = spec(1.0);
        let mut bad = sp.clone();
        bad.soup_spec.window = AxisBox::cube(2, 0.0, 0.3).unwrap();
        assert!(matches!(bad.validate(), Err(Error::WindowTooSmall)));
        let mut big = sp.clone();
        big.soup_spec.dia_max = 0.5;
        assert!(matches!(big.validate(), Err(Error::InvalidRenormSpec(_))));
    }

    #[test]
    fn insufficient_samples() {
        let f = XField { extent: vec![2, 1], values: vec![true, false] };
        let fields = vec![f; 10];
        assert!(matches!(
            dependence_range_check(&fields, &[0, 0], &[1, 0], 0.99),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn degenerate_and_self_correlation() {
        let ones = vec![XField { extent: vec![2, 1], values: vec![true, true] }; 1000];
        assert!(matches!(dependence_range_check(&ones, &[0, 0], &[1, 0], 0.99).unwrap(), Correlation::Degenerate { .. }));
        let mixed: Vec<XField> =
            (0..1000).map(|i| XField { extent: vec![2, 1], values: vec![i % 3 == 0, i % 2 == 0] }).collect();
        assert_eq!(dependence_range_check(&mixed, &[0, 0], &[0, 0], 0.99).unwrap().r(), Some(1.0));
    }

    #[test]
    fn monotone_under_thinning() {
        let sp = spec(3.0);
        for t in 0..10 {
            let sample = sample_soup(&sp.soup_spec, &Stream::new(7).child(t)).unwrap();
            let thin = crate::soup::thin_to(&sample, 1.5, &Stream::new(8).child(t)).unwrap();
            let (a, b) = (extract_x_field(&sample, &sp).unwrap(), extract_x_field(&thin, &sp).unwrap());
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!(x <= y);
            }
        }
    }

    #[test]
    fn csv_matrix() {
        let f = XField { extent: vec![3, 2], values: vec![true, false, true, false, false, true] };
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1,0,1\n0,0,1\n");
    }
}
