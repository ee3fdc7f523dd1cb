//! Mandelbrot fractal percolation.
//!
//! The unit cube is split into `N^d` subcubes, each retained independently
//! with probability `p`; retained cubes are split again, and so on up to
//! depth `k`. Every cell at every level owns one uniform `u` drawn from a
//! counter-based stream, and is retained iff its parent is and `u < p`.
//! Sets sampled from the same stream at different `p` are therefore
//! nested, and shallower levels do not depend on the depth.

use std::collections::BTreeMap;
use std::io::Write;

use bitvec::prelude::*;
use num_traits::Num;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{connects, connects_with, label_components, Adjacency, ComponentLabels, Lattice};
use crate::raster::lattice_component_diameter;
use crate::rng::Stream;
use crate::soup::{sample_soup, thin_to, ShapeSet, SoupMode, SoupSpec};
use crate::stats::Estimate;
use crate::geometry::AxisBox;
use crate::raster::rasterize;
use rayon::prelude::*;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FractalSpec {
    /// Subdivision factor `N`.
    pub n: usize,
    pub dim: usize,
    pub p: f64,
    pub depth: usize,
    pub seed: u64,
}

impl FractalSpec {
    pub fn new(n: usize, dim: usize, p: f64, depth: usize, seed: u64) -> Self {
        Self { n, dim, p, depth, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidFractalSpec(format!("N must be >= 2, got {}", self.n)));
        }
        if self.dim < 2 {
            return Err(Error::DimensionTooSmall(self.dim));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidFractalSpec(format!("p must lie in [0, 1], got {}", self.p)));
        }
        if self.depth < 1 {
            return Err(Error::InvalidFractalSpec("depth must be >= 1".into()));
        }
        let cells = (self.n as u128).checked_pow((self.dim * self.depth) as u32);
        if cells.is_none_or(|c| c > 1 << 34) {
            return Err(Error::InvalidFractalSpec("level-k lattice is too large".into()));
        }
        Ok(())
    }

    pub fn with_p(&self, p: f64) -> Self {
        Self { p, ..self.clone() }
    }

    pub fn with_depth(&self, depth: usize) -> Self {
        Self { depth, ..self.clone() }
    }
}

/// Retained cells of every level `1..=depth` over a block of
/// `tiles[0] × … × tiles[d-1]` unit cubes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RetainedSet {
    n: usize,
    dim: usize,
    tiles: Vec<usize>,
    levels: Vec<BitVec>,
}

impl RetainedSet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn tiles(&self) -> &[usize] {
        &self.tiles
    }

    /// Lattice of level `j` cells (`j >= 1`).
    pub fn lattice(&self, level: usize) -> Lattice {
        let side = self.n.pow(level as u32);
        Lattice::new(&self.tiles.iter().map(|t| t * side).collect::<Vec<_>>())
    }

    pub fn level(&self, level: usize) -> &BitSlice {
        &self.levels[level - 1]
    }

    pub fn retained_count(&self, level: usize) -> usize {
        self.levels[level - 1].count_ones()
    }

    /// The configuration up to a shallower depth.
    pub fn truncated(&self, depth: usize) -> RetainedSet {
        assert!(depth >= 1 && depth <= self.depth());
        Self { levels: self.levels[..depth].to_vec(), ..self.clone() }
    }

    /// Builds a set from explicit level bit arrays, checking nesting.
    pub fn from_levels(n: usize, dim: usize, tiles: Vec<usize>, levels: Vec<BitVec>) -> Result<Self> {
        let set = Self { n, dim, tiles, levels };
        for j in 1..=set.depth() {
            if set.levels[j - 1].len() != set.lattice(j).len() {
                return Err(Error::InvalidFractalSpec(format!("level {j} has the wrong size")));
            }
        }
        if !set.is_nested() {
            return Err(Error::InvalidFractalSpec("level sets are not nested".into()));
        }
        Ok(set)
    }

    /// Every retained level-(j+1) cell has a retained parent.
    pub fn is_nested(&self) -> bool {
        let mut coords = vec![0; self.dim];
        for j in 1..self.depth() {
            let (parent, child) = (self.lattice(j), self.lattice(j + 1));
            for idx in self.levels[j].iter_ones() {
                child.coords_into(idx, &mut coords);
                coords.iter_mut().for_each(|c| *c /= self.n);
                if !self.levels[j - 1][parent.index(&coords)] {
                    return false;
                }
            }
        }
        true
    }
}

/// Uniforms of the children of `parent`, in local row-major order.
fn child_uniforms(level_stream: &Stream, parent: usize, per_parent: usize, out: &mut [f64]) {
    let mut rng = level_stream.rng_at((parent * per_parent) as u64);
    for u in out.iter_mut() {
        *u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    }
}

/// Samples one configuration on the unit cube.
pub fn sample_fractal(spec: &FractalSpec, stream: &Stream) -> Result<RetainedSet> {
    tile_full_space(spec, &vec![1; spec.dim], stream)
}

/// Independent copies of the process on a block of unit cubes; level-0
/// cells are the tiles themselves.
pub fn tile_full_space(spec: &FractalSpec, copies: &[usize], stream: &Stream) -> Result<RetainedSet> {
    spec.validate()?;
    if copies.len() != spec.dim {
        return Err(Error::DimensionMismatch { expected: spec.dim, got: copies.len() });
    }
    if copies.contains(&0) {
        return Err(Error::InvalidFractalSpec("tile counts must be positive".into()));
    }
    let (n, d) = (spec.n, spec.dim);
    let per_parent = n.pow(d as u32);
    let tiles = copies.to_vec();
    let mut set = RetainedSet { n, dim: d, tiles: tiles.clone(), levels: Vec::with_capacity(spec.depth) };

    let mut parent_lattice = Lattice::new(&tiles);
    let mut parents: Vec<usize> = (0..parent_lattice.len()).collect();
    let local = Lattice::new(&vec![n; d]);
    let local_coords: Vec<Vec<usize>> = (0..per_parent).map(|i| local.coords(i)).collect();
    let mut u = vec![0.0; per_parent];
    let mut pc = vec![0usize; d];
    let mut cc = vec![0usize; d];
    for j in 1..=spec.depth {
        let lattice = set.lattice(j);
        let mut bits = bitvec![0; lattice.len()];
        let level_stream = stream.child(j as u64);
        let mut next = Vec::new();
        for &parent in &parents {
            child_uniforms(&level_stream, parent, per_parent, &mut u);
            parent_lattice.coords_into(parent, &mut pc);
            for (l, off) in local_coords.iter().enumerate() {
                if u[l] < spec.p {
                    for a in 0..d {
                        cc[a] = pc[a] * n + off[a];
                    }
                    let idx = lattice.index(&cc);
                    bits.set(idx, true);
                    next.push(idx);
                }
            }
        }
        next.sort_unstable();
        set.levels.push(bits);
        parents = next;
        parent_lattice = lattice;
    }
    Ok(set)
}

/// Face-to-face crossing along `axis` by retained cells of `level`.
pub fn crossing_at_level(set: &RetainedSet, level: usize, axis: usize, adj: Adjacency) -> Result<bool> {
    if axis >= set.dim {
        return Err(Error::BadAxis { axis, dim: set.dim });
    }
    let lattice = set.lattice(level);
    let open: Vec<bool> = set.level(level).iter().map(|b| *b).collect();
    let last = lattice.dims()[axis] - 1;
    let (l1, l2) = (lattice.clone(), lattice.clone());
    Ok(connects(
        &lattice,
        &open,
        adj,
        move |i| l1.coords(i)[axis] == 0,
        move |i| l2.coords(i)[axis] == last,
    ))
}

/// Crossing by the deepest level; a `false` rules out a crossing of the
/// limiting set.
pub fn fractal_crossing(set: &RetainedSet, axis: usize, adj: Adjacency) -> Result<bool> {
    crossing_at_level(set, set.depth(), axis, adj)
}

/// Inner cube of the fractal shell, `outer = (0,1)^d`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FractalShell {
    /// `[1/3, 2/3]^d`, centered in the unit cube.
    #[default]
    Centered,
    /// `(1/2, …, 1/2) + [0, 1/3]^d`.
    CornerAnchored,
}

impl FractalShell {
    /// Inner cube bounds as `(lo_num, hi_num, den)` on every axis.
    fn inner_rational(self) -> (usize, usize, usize) {
        match self {
            FractalShell::Centered => (1, 2, 3),
            FractalShell::CornerAnchored => (3, 5, 6),
        }
    }

    pub fn inner_bounds(self) -> (f64, f64) {
        let (a, b, den) = self.inner_rational();
        (a as f64 / den as f64, b as f64 / den as f64)
    }
}

/// Shell crossing by retained level-k cells of the first unit tile.
///
/// Cells are closed cubes clipped to the closed shell
/// `[0,1]^d \ (inner)°`. A cell lying in the open inner cube is dropped;
/// two neighbors are joined only if their common face (or corner) is not
/// inside the open inner cube. Cell and inner-cube bounds are compared
/// in exact integer arithmetic.
pub fn fractal_shell_crossing(set: &RetainedSet, adj: Adjacency, shell: FractalShell) -> bool {
    shell_crossing_at_level(set, set.depth(), adj, shell)
}

pub fn shell_crossing_at_level(set: &RetainedSet, level: usize, adj: Adjacency, shell: FractalShell) -> bool {
    let m = set.n.pow(level as u32);
    let lattice = set.lattice(level);
    let (lo_num, hi_num, den) = shell.inner_rational();
    let (lo_s, hi_s) = (lo_num * m, hi_num * m);
    let d = set.dim;
    // all comparisons in units of 1/(m·den)
    let coords: Vec<Vec<usize>> = (0..lattice.len()).map(|i| lattice.coords(i)).collect();
    let in_tile = |c: &[usize]| c.iter().all(|&x| x < m);
    let inside_open_inner = |lo: &[usize], hi: &[usize]| (0..d).all(|a| lo_s < lo[a] * den && hi[a] * den < hi_s);
    let cell_bounds = |c: &[usize]| -> (Vec<usize>, Vec<usize>) { (c.to_vec(), c.iter().map(|x| x + 1).collect()) };

    let open: Vec<bool> = (0..lattice.len())
        .map(|i| {
            let c = &coords[i];
            if !set.level(level)[i] || !in_tile(c) {
                return false;
            }
            let (lo, hi) = cell_bounds(c);
            !inside_open_inner(&lo, &hi)
        })
        .collect();
    let touches_outer = |i: usize| coords[i].iter().any(|&x| x == 0 || x == m - 1);
    let touches_inner = |i: usize| coords[i].iter().all(|&x| x * den <= hi_s && (x + 1) * den >= lo_s);
    connects_with(&lattice, &open, adj, touches_inner, touches_outer, |a, b| {
        let (ca, cb) = (&coords[a], &coords[b]);
        let lo: Vec<usize> = (0..d).map(|k| ca[k].max(cb[k])).collect();
        let hi: Vec<usize> = (0..d).map(|k| (ca[k] + 1).min(cb[k] + 1)).collect();
        !inside_open_inner(&lo, &hi)
    })
}

/// Components of retained cells at the deepest level over all tiles.
pub fn fractal_components(set: &RetainedSet, adj: Adjacency) -> ComponentLabels {
    let level = set.depth();
    let open: Vec<bool> = set.level(level).iter().map(|b| *b).collect();
    label_components(&set.lattice(level), &open, adj)
}

/// Largest Euclidean diameter of a retained component's cell-center set.
pub fn largest_retained_diameter(set: &RetainedSet, adj: Adjacency) -> f64 {
    let labels = fractal_components(set, adj);
    let side = 1.0 / set.n.pow(set.depth() as u32) as f64;
    lattice_component_diameter(&set.lattice(set.depth()), &labels) * side
}

/// Crossing probability as a polynomial: `Σ count · p^s (1-p)^f`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossingPolynomial {
    /// `(successes, failures) -> number of configurations`.
    pub terms: BTreeMap<(u32, u32), u64>,
}

impl CrossingPolynomial {
    /// Exact evaluation in any numeric type (`f64`, rationals, ...).
    pub fn eval<T: Num + Clone>(&self, p: T) -> T {
        let q = T::one() - p.clone();
        let mut acc = T::zero();
        for (&(s, f), &count) in &self.terms {
            let mut term = T::zero();
            for _ in 0..count {
                term = term + T::one();
            }
            for _ in 0..s {
                term = term * p.clone();
            }
            for _ in 0..f {
                term = term * q.clone();
            }
            acc = acc + term;
        }
        acc
    }

    pub fn eval_f64(&self, p: f64) -> f64 {
        self.terms
            .iter()
            .map(|(&(s, f), &c)| c as f64 * p.powi(s as i32) * (1.0 - p).powi(f as i32))
            .sum()
    }
}

/// Number of independent Bernoulli draws in a depth-`k` configuration.
fn enumeration_bits(n: usize, d: usize, k: usize) -> Option<u32> {
    let mut total: u64 = 0;
    for j in 1..=k {
        total = total.checked_add((n as u64).checked_pow((d * j) as u32)?)?;
    }
    u32::try_from(total).ok()
}

/// Weighted enumeration of all configurations of depth `k` on the unit
/// cube, collecting those for which `event` holds.
///
/// Only children of retained cells are enumerated; each configuration
/// contributes `p^{retained} (1-p)^{discarded}`.
pub fn enumerate_event(
    n: usize,
    d: usize,
    k: usize,
    mut event: impl FnMut(&RetainedSet) -> bool,
) -> Result<CrossingPolynomial> {
    let bits = enumeration_bits(n, d, k).unwrap_or(u32::MAX);
    if bits > 24 {
        return Err(Error::TooLarge { bits });
    }
    let mut poly = CrossingPolynomial { terms: BTreeMap::new() };
    let mut set = RetainedSet {
        n,
        dim: d,
        tiles: vec![1; d],
        levels: (1..=k).map(|j| bitvec![0; n.pow((d * j) as u32)]).collect(),
    };
    let per_parent = n.pow(d as u32);
    recurse(&mut set, 1, &[0], per_parent, 0, 0, &mut poly, &mut event);
    Ok(poly)
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    set: &mut RetainedSet,
    level: usize,
    parents: &[usize],
    per_parent: usize,
    succ: u32,
    fail: u32,
    poly: &mut CrossingPolynomial,
    event: &mut impl FnMut(&RetainedSet) -> bool,
) {
    if level > set.depth() {
        if event(set) {
            *poly.terms.entry((succ, fail)).or_insert(0) += 1;
        }
        return;
    }
    let d = set.dim;
    let parent_lattice = if level == 1 { Lattice::new(&vec![1; d]) } else { set.lattice(level - 1) };
    let lattice = set.lattice(level);
    let local = Lattice::new(&vec![set.n; d]);
    let mut children = Vec::with_capacity(parents.len() * per_parent);
    for &p in parents {
        let pc = parent_lattice.coords(p);
        for l in 0..per_parent {
            let off = local.coords(l);
            let cc: Vec<usize> = pc.iter().zip(&off).map(|(a, b)| a * set.n + b).collect();
            children.push(lattice.index(&cc));
        }
    }
    let m = children.len();
    for mask in 0u64..(1u64 << m) {
        let mut retained = Vec::new();
        for (b, &c) in children.iter().enumerate() {
            let on = mask >> b & 1 == 1;
            set.levels[level - 1].set(c, on);
            if on {
                retained.push(c);
            }
        }
        let r = retained.len() as u32;
        recurse(set, level + 1, &retained, per_parent, succ + r, fail + (m as u32 - r), poly, event);
    }
    for &c in &children {
        set.levels[level - 1].set(c, false);
    }
}

/// Exact face-to-face crossing polynomial at depth `k`.
pub fn crossing_polynomial(n: usize, d: usize, k: usize, axis: usize, adj: Adjacency) -> Result<CrossingPolynomial> {
    if axis >= d {
        return Err(Error::BadAxis { axis, dim: d });
    }
    enumerate_event(n, d, k, |s| fractal_crossing(s, axis, adj).expect("axis checked"))
}

/// Exact crossing probability by enumeration.
pub fn exact_crossing_prob(n: usize, d: usize, k: usize, p: f64, axis: usize, adj: Adjacency) -> Result<f64> {
    Ok(crossing_polynomial(n, d, k, axis, adj)?.eval_f64(p))
}

/// Run-length encoded levels: each level is a list of alternating run
/// lengths starting with a run of discarded cells.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetainedSetRle {
    pub n: usize,
    pub dim: usize,
    pub tiles: Vec<usize>,
    pub levels: Vec<Vec<u64>>,
}

impl RetainedSet {
    pub fn to_rle(&self) -> RetainedSetRle {
        let levels = self
            .levels
            .iter()
            .map(|bits| {
                let mut runs = Vec::new();
                let mut current = false;
                let mut run = 0u64;
                for b in bits.iter().by_vals() {
                    if b == current {
                        run += 1;
                    } else {
                        runs.push(run);
                        current = b;
                        run = 1;
                    }
                }
                runs.push(run);
                runs
            })
            .collect();
        RetainedSetRle { n: self.n, dim: self.dim, tiles: self.tiles.clone(), levels }
    }

    pub fn from_rle(rle: &RetainedSetRle) -> Result<Self> {
        let levels = rle
            .levels
            .iter()
            .map(|runs| {
                let mut bits = BitVec::new();
                for (i, &r) in runs.iter().enumerate() {
                    let v = i % 2 == 1;
                    bits.extend(std::iter::repeat_n(v, r as usize));
                }
                bits
            })
            .collect();
        Self::from_levels(rle.n, rle.dim, rle.tiles.clone(), levels)
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, &self.to_rle())?;
        Ok(())
    }
}

/// Soup band and window used for the coupling constant `q`.
pub fn coupling_q_spec(soup_spec: &SoupSpec) -> SoupSpec {
    SoupSpec {
        dim: 2,
        dia_min: 2.0 / 3.0,
        dia_max: 2.0,
        window: AxisBox::unit(2),
        mode: SoupMode::FullSpaceRestricted,
        ..soup_spec.clone()
    }
}

fn unit_square_covered(set: &ShapeSet, h: f64) -> Result<bool> {
    let grid = rasterize(set, &AxisBox::unit(2), h)?;
    Ok(grid.covered_count() == grid.lattice().len())
}

/// Probability that the unit square is covered by soup sets with diameter
/// in `(2/3, 2]`, judged on a raster of side `h`. Only the band, window
/// and mode of `soup_spec` are overridden.
pub fn soup_fractal_coupling_q(soup_spec: &SoupSpec, n_trials: u64, h: f64, level: f64) -> Result<Estimate> {
    let est = coupling_q_sweep(soup_spec, &[soup_spec.lambda], n_trials, h, level)?;
    Ok(est[0])
}

/// `q` along an ascending λ grid, thinned from one sample at the largest
/// λ per trial; the estimates are nondecreasing in λ.
pub fn coupling_q_sweep(soup_spec: &SoupSpec, lambdas: &[f64], n_trials: u64, h: f64, level: f64) -> Result<Vec<Estimate>> {
    if soup_spec.dim != 2 {
        return Err(Error::DimensionNot2(soup_spec.dim));
    }
    if lambdas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidEstimate("λ grid must be ascending".into()));
    }
    let Some(&top) = lambdas.last() else { return Ok(Vec::new()) };
    let spec = coupling_q_spec(soup_spec).with_lambda(top);
    spec.validate()?;
    let root = Stream::new(spec.seed);
    let rows: Vec<Vec<bool>> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let trial = root.child(t);
            let master = sample_soup(&spec, &trial.child(0))?;
            lambdas
                .iter()
                .map(|&l| unit_square_covered(&thin_to(&master, l, &trial.child(1))?, h))
                .collect::<Result<Vec<bool>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..lambdas.len())
        .map(|j| {
            let hits = rows.iter().filter(|r| r[j]).count() as u64;
            Estimate::from_counts(hits, n_trials, level, spec.seed)
        })
        .collect())
}
