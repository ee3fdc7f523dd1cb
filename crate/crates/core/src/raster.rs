//! Rasterized complements of soup realizations and the connectivity
//! events evaluated on them.
//!
//! A cell is covered iff its center lies in some (closed) shape. Event
//! regions select cells by their centers; a selected cell touches a face
//! of a region when its center is within max-norm distance `h` of that
//! face, so that the first layer of selected cells always touches it
//! whatever the alignment of the grid.

use std::collections::HashMap;
use std::io::Write;

use bitvec::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{AxisBox, Point, SimpleShell};
use crate::lattice::{connects, label_components, Adjacency, ComponentLabels, Lattice};
use crate::soup::ShapeSet;

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    window: AxisBox<f64>,
    h: f64,
    lattice: Lattice,
    covered: BitVec,
}

/// Inclusive range of cell indices per axis.
type CellRange = Vec<(usize, usize)>;

impl Grid {
    /// Uncovered grid over `window` with `ceil(side / h)` cells per axis.
    pub fn blank(window: &AxisBox<f64>, h: f64) -> Self {
        assert!(h > 0.0 && h.is_finite(), "cell side must be positive");
        let dims: Vec<usize> = window.sides().iter().map(|s| ((s / h).ceil() as usize).max(1)).collect();
        let lattice = Lattice::new(&dims);
        let covered = bitvec![0; lattice.len()];
        Self { window: window.clone(), h, lattice, covered }
    }

    /// Grid whose coverage is given by `covered(cell_coords)`.
    pub fn from_fn(window: &AxisBox<f64>, h: f64, mut covered: impl FnMut(&[usize]) -> bool) -> Self {
        let mut g = Self::blank(window, h);
        let mut c = vec![0; g.dim()];
        for i in 0..g.lattice.len() {
            g.lattice.coords_into(i, &mut c);
            if covered(&c) {
                g.covered.set(i, true);
            }
        }
        g
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &Point<f64> {
        self.window.lo()
    }

    pub fn window(&self) -> &AxisBox<f64> {
        &self.window
    }

    pub fn dims(&self) -> &[usize] {
        self.lattice.dims()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn covered(&self) -> &BitSlice {
        &self.covered
    }

    pub fn is_covered(&self, coords: &[usize]) -> bool {
        self.covered[self.lattice.index(coords)]
    }

    pub fn set_covered(&mut self, coords: &[usize], value: bool) {
        let i = self.lattice.index(coords);
        self.covered.set(i, value);
    }

    pub fn covered_count(&self) -> usize {
        self.covered.count_ones()
    }

    #[inline]
    pub fn center_coord(&self, axis: usize, i: usize) -> f64 {
        self.window.lo()[axis] + (i as f64 + 0.5) * self.h
    }

    pub fn cell_center(&self, coords: &[usize]) -> Point<f64> {
        Point::new(coords.iter().enumerate().map(|(a, &i)| self.center_coord(a, i)).collect())
    }

    /// Cells whose centers fall in `[lo, hi]` along `axis`, or `None`.
    fn axis_range(&self, axis: usize, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let n = self.lattice.dims()[axis];
        let o = self.window.lo()[axis];
        let guess_lo = ((lo - o) / self.h - 0.5).floor().max(0.0) as usize;
        let guess_hi = (((hi - o) / self.h - 0.5).ceil().max(0.0) as usize).min(n - 1);
        let mut a = guess_lo.min(n - 1);
        while a > 0 && self.center_coord(axis, a - 1) >= lo {
            a -= 1;
        }
        while a < n && self.center_coord(axis, a) < lo {
            a += 1;
        }
        let mut b = guess_hi;
        while b + 1 < n && self.center_coord(axis, b + 1) <= hi {
            b += 1;
        }
        loop {
            if self.center_coord(axis, b) <= hi {
                break;
            }
            if b == 0 {
                return None;
            }
            b -= 1;
        }
        (a < n && a <= b).then_some((a, b))
    }

    fn box_range(&self, b: &AxisBox<f64>) -> Option<CellRange> {
        (0..self.dim()).map(|a| self.axis_range(a, b.lo()[a], b.hi()[a])).collect()
    }

    /// Sub-lattice over `range` with the open mask `open(global_coords, center)`.
    fn sub_mask(&self, range: &CellRange, mut open: impl FnMut(&Point<f64>) -> bool) -> SubGrid {
        let dims: Vec<usize> = range.iter().map(|&(a, b)| b - a + 1).collect();
        let lattice = Lattice::new(&dims);
        let mut mask = vec![false; lattice.len()];
        let mut centers = Vec::with_capacity(lattice.len());
        let mut local = vec![0; dims.len()];
        let mut global = vec![0; dims.len()];
        for (i, m) in mask.iter_mut().enumerate() {
            lattice.coords_into(i, &mut local);
            for a in 0..dims.len() {
                global[a] = local[a] + range[a].0;
            }
            let center = self.cell_center(&global);
            *m = !self.covered[self.lattice.index(&global)] && open(&center);
            centers.push(center);
        }
        SubGrid { lattice, mask, centers }
    }
}

struct SubGrid {
    lattice: Lattice,
    mask: Vec<bool>,
    centers: Vec<Point<f64>>,
}

/// Marks every cell whose center lies in some shape of `shapes`.
pub fn rasterize(shapes: &ShapeSet, window: &AxisBox<f64>, h: f64) -> Result<Grid> {
    if window.dim() != shapes.dim() {
        return Err(Error::DimensionMismatch { expected: shapes.dim(), got: window.dim() });
    }
    let limit = shapes.spec.dia_min / 4.0;
    if !(h > 0.0) || h > limit {
        return Err(Error::ResolutionTooCoarse { h, limit });
    }
    let mut grid = Grid::blank(window, h);
    let d = grid.dim();
    let mut coords = vec![0usize; d];
    let mut center = vec![0.0; d];
    for s in &shapes.shapes {
        let reach = shapes.kind.reach(s.scale);
        let bbox: Option<CellRange> = (0..d)
            .map(|a| grid.axis_range(a, s.center[a] - reach, s.center[a] + reach))
            .collect();
        let Some(range) = bbox else { continue };
        let dims: Vec<usize> = range.iter().map(|&(a, b)| b - a + 1).collect();
        let total: usize = dims.iter().product();
        for k in 0..total {
            let mut rem = k;
            for a in 0..d {
                coords[a] = range[a].0 + rem % dims[a];
                rem /= dims[a];
            }
            let idx = grid.lattice.index(&coords);
            if grid.covered[idx] {
                continue;
            }
            for a in 0..d {
                center[a] = grid.center_coord(a, coords[a]);
            }
            if shapes.kind.contains_coords(&s.center, s.scale, &center) {
                grid.covered.set(idx, true);
            }
        }
    }
    Ok(grid)
}

/// Components of the uncovered cells over the whole grid.
pub fn complement_components(grid: &Grid, adj: Adjacency) -> ComponentLabels {
    let open: Vec<bool> = grid.covered.iter().map(|b| !*b).collect();
    label_components(&grid.lattice, &open, adj)
}

fn check_inside(grid: &Grid, b: &AxisBox<f64>, err: Error) -> Result<()> {
    if b.dim() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: b.dim() });
    }
    if grid.window.contains_box(b) {
        Ok(())
    } else {
        Err(err)
    }
}

/// Complement crossing of `shell`: a component of uncovered cells within
/// the closed shell touching both the inner and the outer boundary.
pub fn crosses_shell(grid: &Grid, shell: &SimpleShell<f64>, adj: Adjacency) -> Result<bool> {
    check_inside(grid, shell.outer(), Error::ShellOutsideGrid)?;
    let Some(range) = grid.box_range(shell.outer()) else { return Ok(false) };
    let h = grid.h;
    let sub = grid.sub_mask(&range, |c| shell.closed_contains_point(c));
    let near_inner = shell.inner().inflate(h);
    let outer = shell.outer();
    Ok(connects(
        &sub.lattice,
        &sub.mask,
        adj,
        |i| near_inner.contains_point(&sub.centers[i]),
        |i| outer.distance_to_boundary(&sub.centers[i]) <= h,
    ))
}

/// Complement crossing of `b` between its two faces orthogonal to `axis`.
pub fn crosses_box(grid: &Grid, b: &AxisBox<f64>, axis: usize, adj: Adjacency) -> Result<bool> {
    check_inside(grid, b, Error::BoxOutsideGrid)?;
    if axis >= grid.dim() {
        return Err(Error::BadAxis { axis, dim: grid.dim() });
    }
    Ok(box_crossing_labels(grid, b, axis, adj, |_| true).is_some_and(|s| !s.is_empty()))
}

/// Crossing components of `b` (cells restricted by `extra`), returned as
/// representative cell centers; `None` if the box holds no cell centers.
fn box_crossing_labels(
    grid: &Grid,
    b: &AxisBox<f64>,
    axis: usize,
    adj: Adjacency,
    extra: impl Fn(&Point<f64>) -> bool,
) -> Option<Vec<Vec<usize>>> {
    let range = grid.box_range(b)?;
    let h = grid.h;
    let sub = grid.sub_mask(&range, |c| b.contains_point(c) && extra(c));
    let labels = label_components(&sub.lattice, &sub.mask, adj);
    let mut touches_lo = vec![false; labels.count];
    let mut touches_hi = vec![false; labels.count];
    for (i, &l) in labels.labels.iter().enumerate() {
        if l < 0 {
            continue;
        }
        let c = sub.centers[i][axis];
        if c - b.lo()[axis] <= h {
            touches_lo[l as usize] = true;
        }
        if b.hi()[axis] - c <= h {
            touches_hi[l as usize] = true;
        }
    }
    // one global cell per crossing component
    let mut reps = Vec::new();
    let mut done = vec![false; labels.count];
    for (i, &l) in labels.labels.iter().enumerate() {
        if l >= 0 && touches_lo[l as usize] && touches_hi[l as usize] && !done[l as usize] {
            done[l as usize] = true;
            let local = sub.lattice.coords(i);
            reps.push(local.iter().zip(&range).map(|(&x, &(a, _))| x + a).collect());
        }
    }
    Some(reps)
}

/// Circuit of the complement in a planar shell, certified by long-way
/// crossings of the four side rectangles of the shell that all belong to
/// one component of the complement within the shell (face adjacency).
///
/// This is a sufficient condition: a circuit that stays away from the
/// short sides of the rectangles is not detected.
pub fn has_circuit(grid: &Grid, shell: &SimpleShell<f64>) -> Result<bool> {
    if grid.dim() != 2 {
        return Err(Error::DimensionNot2(grid.dim()));
    }
    check_inside(grid, shell.outer(), Error::ShellOutsideGrid)?;
    let Some(range) = grid.box_range(shell.outer()) else { return Ok(false) };
    let sub = grid.sub_mask(&range, |c| shell.closed_contains_point(c));
    let shell_labels = label_components(&sub.lattice, &sub.mask, Adjacency::Face);
    let shell_label = |global: &[usize]| -> i64 {
        let local: Vec<usize> = global.iter().zip(&range).map(|(&x, &(a, _))| x - a).collect();
        shell_labels.labels[sub.lattice.index(&local)]
    };

    let (o, i) = (shell.outer(), shell.inner());
    let rect = |x0: f64, y0: f64, x1: f64, y1: f64| {
        AxisBox::new(Point::new(vec![x0, y0]), Point::new(vec![x1, y1])).expect("shell side rectangle")
    };
    let rects = [
        (rect(o.lo()[0], o.lo()[1], o.hi()[0], i.lo()[1]), 0),
        (rect(o.lo()[0], i.hi()[1], o.hi()[0], o.hi()[1]), 0),
        (rect(o.lo()[0], o.lo()[1], i.lo()[0], o.hi()[1]), 1),
        (rect(i.hi()[0], o.lo()[1], o.hi()[0], o.hi()[1]), 1),
    ];
    let mut common: Option<Vec<i64>> = None;
    for (r, axis) in &rects {
        let Some(reps) = box_crossing_labels(grid, r, *axis, Adjacency::Face, |c| shell.closed_contains_point(c))
        else {
            return Ok(false);
        };
        let mut ids: Vec<i64> = reps.iter().map(|g| shell_label(g)).collect();
        ids.sort_unstable();
        ids.dedup();
        common = Some(match common {
            None => ids,
            Some(prev) => prev.into_iter().filter(|x| ids.binary_search(x).is_ok()).collect(),
        });
        if common.as_ref().is_some_and(|c| c.is_empty()) {
            return Ok(false);
        }
    }
    Ok(common.is_some_and(|c| !c.is_empty()))
}

/// Largest Euclidean diameter over complement components of their cell
/// center sets; 0 when no cell is uncovered.
pub fn largest_component_diameter(grid: &Grid, adj: Adjacency) -> f64 {
    let labels = complement_components(grid, adj);
    lattice_component_diameter(&grid.lattice, &labels) * grid.h
}

/// Largest diameter (in cell units) over the labelled components.
///
/// Only cells extremal on every axis-parallel line through them within
/// their component can be vertices of the component's convex hull, so
/// the pairwise search runs over those candidates only.
pub fn lattice_component_diameter(lat: &Lattice, labels: &ComponentLabels) -> f64 {
    if labels.count == 0 {
        return 0.0;
    }
    let d = lat.dim();
    let mut coords = vec![0usize; d];
    // extremes[axis]: (label, line key) -> (min, max) along axis
    let mut extremes: Vec<HashMap<(i64, usize), (usize, usize)>> = vec![HashMap::new(); d];
    for (idx, &l) in labels.labels.iter().enumerate() {
        if l < 0 {
            continue;
        }
        lat.coords_into(idx, &mut coords);
        for a in 0..d {
            let saved = coords[a];
            coords[a] = 0;
            let key = (l, lat.index(&coords));
            coords[a] = saved;
            let e = extremes[a].entry(key).or_insert((saved, saved));
            e.0 = e.0.min(saved);
            e.1 = e.1.max(saved);
        }
    }
    let mut candidates: Vec<Vec<Vec<usize>>> = vec![Vec::new(); labels.count];
    for (idx, &l) in labels.labels.iter().enumerate() {
        if l < 0 {
            continue;
        }
        lat.coords_into(idx, &mut coords);
        let extreme_everywhere = (0..d).all(|a| {
            let saved = coords[a];
            let mut key_coords = coords.clone();
            key_coords[a] = 0;
            let (lo, hi) = extremes[a][&(l, lat.index(&key_coords))];
            saved == lo || saved == hi
        });
        if extreme_everywhere {
            candidates[l as usize].push(coords.clone());
        }
    }
    let mut best = 0u64;
    for pts in &candidates {
        for (k, p) in pts.iter().enumerate() {
            for q in &pts[k + 1..] {
                let dist2: u64 = p.iter().zip(q).map(|(&x, &y)| (x.abs_diff(y) as u64).pow(2)).sum();
                best = best.max(dist2);
            }
        }
    }
    (best as f64).sqrt()
}

/// Plain PBM (`P1`) bitmap of a planar grid, top row first, `1` = covered.
pub fn write_pbm<W: Write>(grid: &Grid, mut w: W) -> Result<()> {
    if grid.dim() != 2 {
        return Err(Error::DimensionNot2(grid.dim()));
    }
    let (nx, ny) = (grid.dims()[0], grid.dims()[1]);
    writeln!(w, "P1")?;
    writeln!(w, "{nx} {ny}")?;
    for y in (0..ny).rev() {
        let row: Vec<&str> = (0..nx).map(|x| if grid.is_covered(&[x, y]) { "1" } else { "0" }).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}
