//! Connectivity on the cells of a `d`-dimensional box lattice.
//!
//! Cells are indexed with axis 0 varying fastest. Both the raster of a
//! soup complement and the retained cells of fractal percolation are
//! analysed with these routines.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjacency {
    /// `2d` neighbors sharing a facet.
    Face,
    /// `3^d - 1` neighbors at max-norm distance one.
    Vertex,
}

impl Adjacency {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "face" => Some(Adjacency::Face),
            "vertex" => Some(Adjacency::Vertex),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Adjacency::Face => "face",
            Adjacency::Vertex => "vertex",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    dims: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl Lattice {
    pub fn new(dims: &[usize]) -> Self {
        let mut strides = Vec::with_capacity(dims.len());
        let mut len = 1usize;
        for &n in dims {
            strides.push(len);
            len = len.checked_mul(n).expect("lattice too large");
        }
        Self { dims: dims.to_vec(), strides, len }
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn coords_into(&self, mut idx: usize, out: &mut [usize]) {
        for (i, &n) in self.dims.iter().enumerate() {
            out[i] = idx % n;
            idx /= n;
        }
    }

    pub fn coords(&self, idx: usize) -> Vec<usize> {
        let mut c = vec![0; self.dim()];
        self.coords_into(idx, &mut c);
        c
    }

    #[inline]
    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.strides).map(|(&c, &s)| c * s).sum()
    }

    /// Neighbor offsets for `adj`, in a fixed order.
    pub fn offsets(&self, adj: Adjacency) -> Vec<Vec<isize>> {
        let d = self.dim();
        match adj {
            Adjacency::Face => {
                let mut out = Vec::with_capacity(2 * d);
                for i in 0..d {
                    for s in [-1isize, 1] {
                        let mut o = vec![0; d];
                        o[i] = s;
                        out.push(o);
                    }
                }
                out
            }
            Adjacency::Vertex => {
                let total = 3usize.pow(d as u32);
                let mut out = Vec::with_capacity(total - 1);
                for k in 0..total {
                    let mut rem = k;
                    let o: Vec<isize> = (0..d)
                        .map(|_| {
                            let v = (rem % 3) as isize - 1;
                            rem /= 3;
                            v
                        })
                        .collect();
                    if o.iter().any(|&v| v != 0) {
                        out.push(o);
                    }
                }
                out
            }
        }
    }

    /// Calls `f(neighbor_index)` for every in-range neighbor of the cell at
    /// `coords`.
    #[inline]
    pub fn for_each_neighbor(&self, coords: &[usize], offsets: &[Vec<isize>], mut f: impl FnMut(usize)) {
        'outer: for off in offsets {
            let mut idx = 0usize;
            for i in 0..coords.len() {
                let c = coords[i] as isize + off[i];
                if c < 0 || c >= self.dims[i] as isize {
                    continue 'outer;
                }
                idx += c as usize * self.strides[i];
            }
            f(idx);
        }
    }
}

/// Component labels of open cells: `-1` for closed cells, otherwise ids
/// `0..count` ordered by each component's smallest cell index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentLabels {
    pub labels: Vec<i64>,
    pub count: usize,
}

impl ComponentLabels {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count];
        for &l in &self.labels {
            if l >= 0 {
                sizes[l as usize] += 1;
            }
        }
        sizes
    }
}

pub fn label_components(lat: &Lattice, open: &[bool], adj: Adjacency) -> ComponentLabels {
    label_components_with(lat, open, adj, |_, _| true)
}

/// Labeling where an edge between two open neighbors is used only if
/// `edge_ok(a, b)` holds.
pub fn label_components_with(
    lat: &Lattice,
    open: &[bool],
    adj: Adjacency,
    mut edge_ok: impl FnMut(usize, usize) -> bool,
) -> ComponentLabels {
    debug_assert_eq!(open.len(), lat.len());
    let offsets = lat.offsets(adj);
    let mut labels = vec![-1i64; lat.len()];
    let mut count = 0usize;
    let mut queue = VecDeque::new();
    let mut coords = vec![0usize; lat.dim()];
    for start in 0..lat.len() {
        if !open[start] || labels[start] >= 0 {
            continue;
        }
        let id = count as i64;
        count += 1;
        labels[start] = id;
        queue.push_back(start);
        while let Some(cur) = queue.pop_front() {
            lat.coords_into(cur, &mut coords);
            lat.for_each_neighbor(&coords, &offsets, |nb| {
                if open[nb] && labels[nb] < 0 && edge_ok(cur, nb) {
                    labels[nb] = id;
                    queue.push_back(nb);
                }
            });
        }
    }
    ComponentLabels { labels, count }
}

/// True iff some open cell with `source` set is connected through open
/// cells to an open cell with `target` set.
pub fn connects(
    lat: &Lattice,
    open: &[bool],
    adj: Adjacency,
    source: impl Fn(usize) -> bool,
    target: impl Fn(usize) -> bool,
) -> bool {
    connects_with(lat, open, adj, source, target, |_, _| true)
}

pub fn connects_with(
    lat: &Lattice,
    open: &[bool],
    adj: Adjacency,
    source: impl Fn(usize) -> bool,
    target: impl Fn(usize) -> bool,
    mut edge_ok: impl FnMut(usize, usize) -> bool,
) -> bool {
    debug_assert_eq!(open.len(), lat.len());
    let offsets = lat.offsets(adj);
    let mut seen = vec![false; lat.len()];
    let mut queue = VecDeque::new();
    for i in 0..lat.len() {
        if open[i] && source(i) {
            if target(i) {
                return true;
            }
            seen[i] = true;
            queue.push_back(i);
        }
    }
    let mut coords = vec![0usize; lat.dim()];
    let mut found = false;
    while let Some(cur) = queue.pop_front() {
        lat.coords_into(cur, &mut coords);
        lat.for_each_neighbor(&coords, &offsets, |nb| {
            if !found && open[nb] && !seen[nb] && edge_ok(cur, nb) {
                if target(nb) {
                    found = true;
                }
                seen[nb] = true;
                queue.push_back(nb);
            }
        });
        if found {
            return true;
        }
    }
    false
}
