//! Monte Carlo estimates of crossing events, parameter sweeps, ε-scans and
//! CI-driven bisection.
//!
//! Trial `t` of a run with master seed `seed` draws from
//! `Stream::new(seed).child(t)`, so every output depends on `(spec, seed, n)`
//! only and never on the number of worker threads.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractal::{
    fractal_crossing, fractal_shell_crossing, largest_retained_diameter, sample_fractal, FractalShell, FractalSpec,
    RetainedSet,
};
use crate::geometry::{AxisBox, SimpleShell};
use crate::lattice::Adjacency;
use crate::raster::{crosses_box, crosses_shell, has_circuit, largest_component_diameter, rasterize};
use crate::rng::Stream;
use crate::soup::{filter_min_diameter, sample_soup, thin_to, ShapeSet, SoupSpec};
use crate::stats::Estimate;

pub const DEFAULT_LEVEL: f64 = 0.95;
pub const DEFAULT_THRESHOLD: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Model {
    /// Soup complement on a raster of side `h`, face adjacency.
    Soup { spec: SoupSpec, h: f64 },
    /// Retained set at the spec's depth.
    Fractal {
        spec: FractalSpec,
        adjacency: Adjacency,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Event {
    ShellCrossing { shell: SimpleShell<f64> },
    BoxCrossing { region: AxisBox<f64>, axis: usize },
    Circuit { shell: SimpleShell<f64> },
    ComponentDiameterExceeds { threshold: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub model: Model,
    pub event: Event,
}

/// Which coordinate a sweep or bisection moves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Lambda,
    P,
    Eps,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::Lambda => "lambda",
            Param::P => "p",
            Param::Eps => "eps",
        }
    }
}

fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn unit_fractal_shell(shell: &SimpleShell<f64>) -> Option<FractalShell> {
    let d = shell.dim();
    let unit = AxisBox::unit(d);
    let same = |a: &AxisBox<f64>, b: &AxisBox<f64>| {
        (0..d).all(|i| approx_eq(a.lo()[i], b.lo()[i]) && approx_eq(a.hi()[i], b.hi()[i]))
    };
    if !same(shell.outer(), &unit) {
        return None;
    }
    [FractalShell::Centered, FractalShell::CornerAnchored].into_iter().find(|v| {
        let (lo, hi) = v.inner_bounds();
        same(shell.inner(), &AxisBox::cube(d, lo, hi).expect("valid inner cube"))
    })
}

impl EventSpec {
    pub fn new(model: Model, event: Event) -> Self {
        Self { model, event }
    }

    pub fn dim(&self) -> usize {
        match &self.model {
            Model::Soup { spec, .. } => spec.dim,
            Model::Fractal { spec, .. } => spec.dim,
        }
    }

    /// Which way the event probability moves as `param` grows: `true` if
    /// it can only increase.
    pub fn increasing_in(&self, param: Param) -> Result<bool> {
        match (&self.model, param) {
            (Model::Soup { .. }, Param::Lambda) => Ok(false),
            (Model::Soup { .. }, Param::Eps) => Ok(true),
            (Model::Fractal { .. }, Param::P) => Ok(true),
            _ => Err(Error::InvalidEstimate(format!("parameter {} does not apply to this model", param.name()))),
        }
    }

    pub fn with_param(&self, param: Param, value: f64) -> Result<Self> {
        let mut out = self.clone();
        match (&mut out.model, param) {
            (Model::Soup { spec, .. }, Param::Lambda) => spec.lambda = value,
            (Model::Soup { spec, .. }, Param::Eps) => spec.dia_min = value,
            (Model::Fractal { spec, .. }, Param::P) => spec.p = value,
            _ => return Err(Error::InvalidEstimate(format!("parameter {} does not apply to this model", param.name()))),
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        let region_dim = match &self.event {
            Event::ShellCrossing { shell } | Event::Circuit { shell } => Some(shell.dim()),
            Event::BoxCrossing { region, axis } => {
                if *axis >= d {
                    return Err(Error::BadAxis { axis: *axis, dim: d });
                }
                Some(region.dim())
            }
            Event::ComponentDiameterExceeds { threshold } => {
                if !(*threshold >= 0.0) {
                    return Err(Error::InvalidEstimate("diameter threshold must be >= 0".into()));
                }
                None
            }
        };
        if let Some(rd) = region_dim {
            if rd != d {
                return Err(Error::DimensionMismatch { expected: d, got: rd });
            }
        }
        if matches!(self.event, Event::Circuit { .. }) && d != 2 {
            return Err(Error::DimensionNot2(d));
        }
        match &self.model {
            Model::Soup { spec, h } => {
                spec.validate()?;
                if !(*h > 0.0) || *h > spec.dia_min / 4.0 {
                    return Err(Error::ResolutionTooCoarse { h: *h, limit: spec.dia_min / 4.0 });
                }
                match &self.event {
                    Event::ShellCrossing { shell } | Event::Circuit { shell } => {
                        if !spec.window.contains_box(shell.outer()) {
                            return Err(Error::ShellOutsideGrid);
                        }
                    }
                    Event::BoxCrossing { region, .. } => {
                        if !spec.window.contains_box(region) {
                            return Err(Error::BoxOutsideGrid);
                        }
                    }
                    Event::ComponentDiameterExceeds { .. } => {}
                }
            }
            Model::Fractal { spec, .. } => {
                spec.validate()?;
                match &self.event {
                    Event::ShellCrossing { shell } => {
                        if unit_fractal_shell(shell).is_none() {
                            return Err(Error::UnsupportedEvent(
                                "fractal shells are [0,1]^d minus [1/3,2/3]^d or [1/2,5/6]^d".into(),
                            ));
                        }
                    }
                    Event::BoxCrossing { region, .. } => {
                        if *region != AxisBox::unit(d) {
                            return Err(Error::UnsupportedEvent("fractal box crossings use the unit cube".into()));
                        }
                    }
                    Event::Circuit { .. } => {
                        return Err(Error::UnsupportedEvent("circuits are evaluated for soups only".into()));
                    }
                    Event::ComponentDiameterExceeds { .. } => {}
                }
            }
        }
        Ok(())
    }

    /// Event indicator for one soup realization, rasterized at side `h`.
    pub fn soup_indicator(&self, set: &ShapeSet, h: f64) -> Result<bool> {
        let grid = rasterize(set, &set.spec.window, h)?;
        match &self.event {
            Event::ShellCrossing { shell } => crosses_shell(&grid, shell, Adjacency::Face),
            Event::BoxCrossing { region, axis } => crosses_box(&grid, region, *axis, Adjacency::Face),
            Event::Circuit { shell } => has_circuit(&grid, shell),
            Event::ComponentDiameterExceeds { threshold } => {
                Ok(largest_component_diameter(&grid, Adjacency::Face) > *threshold)
            }
        }
    }

    /// Event indicator for one retained set.
    pub fn fractal_indicator(&self, set: &RetainedSet, adj: Adjacency) -> Result<bool> {
        match &self.event {
            Event::ShellCrossing { shell } => {
                let variant = unit_fractal_shell(shell)
                    .ok_or_else(|| Error::UnsupportedEvent("shell is not a unit fractal shell".into()))?;
                Ok(fractal_shell_crossing(set, adj, variant))
            }
            Event::BoxCrossing { axis, .. } => fractal_crossing(set, *axis, adj),
            Event::Circuit { .. } => Err(Error::UnsupportedEvent("circuits are evaluated for soups only".into())),
            Event::ComponentDiameterExceeds { threshold } => Ok(largest_retained_diameter(set, adj) > *threshold),
        }
    }

    /// One independent trial on `stream`.
    pub fn trial(&self, stream: &Stream) -> Result<bool> {
        match &self.model {
            Model::Soup { spec, h } => self.soup_indicator(&sample_soup(spec, stream)?, *h),
            Model::Fractal { spec, adjacency } => self.fractal_indicator(&sample_fractal(spec, stream)?, *adjacency),
        }
    }
}

fn trial_stream(seed: u64, t: u64) -> Stream {
    Stream::new(seed).child(t)
}

/// Per-trial indicator rows; row `t` is computed from trial stream `t`.
fn run_rows(n: u64, seed: u64, f: impl Fn(&Stream) -> Result<Vec<bool>> + Sync) -> Result<Vec<Vec<bool>>> {
    (0..n).into_par_iter().map(|t| f(&trial_stream(seed, t))).collect()
}

fn column_estimates(rows: &[Vec<bool>], cols: usize, level: f64, seed: u64) -> Vec<Estimate> {
    (0..cols)
        .map(|j| {
            let hits = rows.iter().filter(|r| r[j]).count() as u64;
            Estimate::from_counts(hits, rows.len() as u64, level, seed)
        })
        .collect()
}

/// Number of rows that are not monotone along the row in the given
/// direction.
fn count_violations(rows: &[Vec<bool>], increasing: bool) -> usize {
    rows.iter()
        .filter(|r| r.windows(2).any(|w| if increasing { w[0] && !w[1] } else { !w[0] && w[1] }))
        .count()
}

pub fn mc_estimate(event: &EventSpec, n: u64, seed: u64) -> Result<Estimate> {
    mc_estimate_at(event, n, seed, DEFAULT_LEVEL)
}

pub fn mc_estimate_at(event: &EventSpec, n: u64, seed: u64, level: f64) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::InvalidEstimate("n must be >= 1".into()));
    }
    event.validate()?;
    let rows = run_rows(n, seed, |s| Ok(vec![event.trial(s)?]))?;
    Ok(column_estimates(&rows, 1, level, seed)[0])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub param: f64,
    pub estimate: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub param: Param,
    pub coupled: bool,
    pub points: Vec<SweepPoint>,
    /// Trials whose indicators are not monotone along the grid.
    pub violations: usize,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["param", "p_hat", "ci_lo", "ci_hi", "n"])?;
        for pt in &self.points {
            let e = &pt.estimate;
            out.write_record([
                format!("{:?}", pt.param),
                format!("{:?}", e.p_hat),
                format!("{:?}", e.ci_lo),
                format!("{:?}", e.ci_hi),
                e.n.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn p_hats(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.estimate.p_hat).collect()
    }
}

fn check_sorted(grid: &[f64], ascending: bool) -> Result<()> {
    let bad = grid.windows(2).any(|w| if ascending { w[0] > w[1] } else { w[0] < w[1] });
    if bad || grid.is_empty() {
        let order = if ascending { "ascending" } else { "descending" };
        return Err(Error::InvalidEstimate(format!("parameter grid must be nonempty and {order}")));
    }
    Ok(())
}

/// Indicators of one trial at every grid value. When `coupled`, a soup is
/// sampled once at the largest λ and thinned, and a fractal reuses one
/// uniform field for all `p`; otherwise grid point `j` uses its own
/// stream.
fn sweep_row(event: &EventSpec, param: Param, grid: &[f64], coupled: bool, stream: &Stream) -> Result<Vec<bool>> {
    if !coupled {
        return grid
            .iter()
            .enumerate()
            .map(|(j, &v)| event.with_param(param, v)?.trial(&stream.child(j as u64 + 1)))
            .collect();
    }
    match (&event.model, param) {
        (Model::Soup { spec, h }, Param::Lambda) => {
            let top = *grid.last().expect("nonempty grid");
            let master = sample_soup(&spec.with_lambda(top), &stream.child(0))?;
            let marks = stream.child(1);
            grid.iter().map(|&l| event.soup_indicator(&thin_to(&master, l, &marks)?, *h)).collect()
        }
        (Model::Fractal { spec, adjacency }, Param::P) => grid
            .iter()
            .map(|&p| event.fractal_indicator(&sample_fractal(&spec.with_p(p), stream)?, *adjacency))
            .collect(),
        _ => Err(Error::InvalidEstimate(format!("cannot sweep {} for this model", param.name()))),
    }
}

pub fn sweep(
    event: &EventSpec,
    param: Param,
    grid: &[f64],
    n: u64,
    seed: u64,
    coupled: bool,
    level: f64,
) -> Result<SweepResult> {
    check_sorted(grid, true)?;
    if param == Param::Eps {
        return Err(Error::InvalidEstimate("use epsilon_scan for ε".into()));
    }
    let increasing = event.increasing_in(param)?;
    for &v in grid {
        event.with_param(param, v)?.validate()?;
    }
    let rows = run_rows(n, seed, |s| sweep_row(event, param, grid, coupled, s))?;
    Ok(SweepResult {
        param,
        coupled,
        points: grid
            .iter()
            .zip(column_estimates(&rows, grid.len(), level, seed))
            .map(|(&param, estimate)| SweepPoint { param, estimate })
            .collect(),
        violations: count_violations(&rows, increasing),
    })
}

/// Φ^ε for each ε of the descending list. Each trial samples once at the
/// smallest ε and filters upward, on a raster of side `min(h, ε_min/4)`.
pub fn epsilon_scan(event: &EventSpec, eps_list: &[f64], n: u64, seed: u64, level: f64) -> Result<SweepResult> {
    check_sorted(eps_list, false)?;
    let Model::Soup { spec, h } = &event.model else {
        return Err(Error::InvalidEstimate("ε-scans apply to soups".into()));
    };
    let eps_min = *eps_list.last().expect("nonempty list");
    if eps_min < spec.dia_min || eps_list[0] > spec.dia_max {
        return Err(Error::InvalidEstimate(format!(
            "ε values must lie in [{}, {}]",
            spec.dia_min, spec.dia_max
        )));
    }
    let h = h.min(eps_min / 4.0);
    let base = spec.with_dia_min(eps_min);
    let scan_event = EventSpec { model: Model::Soup { spec: base.clone(), h }, event: event.event.clone() };
    scan_event.validate()?;
    let rows = run_rows(n, seed, |s| {
        let master = sample_soup(&base, s)?;
        eps_list.iter().map(|&e| scan_event.soup_indicator(&filter_min_diameter(&master, e), h)).collect()
    })?;
    Ok(SweepResult {
        param: Param::Eps,
        coupled: true,
        points: eps_list
            .iter()
            .zip(column_estimates(&rows, eps_list.len(), level, seed))
            .map(|(&param, estimate)| SweepPoint { param, estimate })
            .collect(),
        // along a descending ε list the indicator can only turn off
        violations: count_violations(&rows, false),
    })
}

/// Coupled λ-sweeps of Φ^ε, one per ε of the descending list. Each trial
/// samples once at the largest λ and smallest ε, then thins and filters,
/// so indicators are monotone in both parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSurface {
    pub eps: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// `curves[i]` is the λ-sweep at `eps[i]`.
    pub curves: Vec<SweepResult>,
    /// Trials whose indicator grid is not monotone in both directions.
    pub violations: usize,
}

impl EpsilonSurface {
    /// Long-format CSV `eps,param,p_hat,ci_lo,ci_hi,n`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["eps", "param", "p_hat", "ci_lo", "ci_hi", "n"])?;
        for (e, c) in self.eps.iter().zip(&self.curves) {
            for pt in &c.points {
                let est = &pt.estimate;
                out.write_record([
                    format!("{e:?}"),
                    format!("{:?}", pt.param),
                    format!("{:?}", est.p_hat),
                    format!("{:?}", est.ci_lo),
                    format!("{:?}", est.ci_hi),
                    est.n.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

pub fn epsilon_lambda_surface(
    event: &EventSpec,
    eps_list: &[f64],
    lambdas: &[f64],
    n: u64,
    seed: u64,
    level: f64,
) -> Result<EpsilonSurface> {
    check_sorted(eps_list, false)?;
    check_sorted(lambdas, true)?;
    let Model::Soup { spec, h } = &event.model else {
        return Err(Error::InvalidEstimate("ε-scans apply to soups".into()));
    };
    let eps_min = *eps_list.last().expect("nonempty list");
    let h = h.min(eps_min / 4.0);
    let top = *lambdas.last().expect("nonempty grid");
    let base = spec.with_dia_min(eps_min).with_lambda(top);
    let scan_event = EventSpec { model: Model::Soup { spec: base.clone(), h }, event: event.event.clone() };
    scan_event.validate()?;
    let (ne, nl) = (eps_list.len(), lambdas.len());
    // row layout: index i * nl + j for (eps_i, lambda_j)
    let rows = run_rows(n, seed, |s| {
        let master = sample_soup(&base, &s.child(0))?;
        let marks = s.child(1);
        // thinning marks are indexed in the master sample, so thin first
        let thinned = lambdas.iter().map(|&l| thin_to(&master, l, &marks)).collect::<Result<Vec<_>>>()?;
        let mut row = Vec::with_capacity(ne * nl);
        for &e in eps_list {
            for set in &thinned {
                row.push(scan_event.soup_indicator(&filter_min_diameter(set, e), h)?);
            }
        }
        Ok(row)
    })?;
    let all = column_estimates(&rows, ne * nl, level, seed);
    let curves = (0..ne)
        .map(|i| {
            let cols: Vec<Vec<bool>> = rows.iter().map(|r| r[i * nl..(i + 1) * nl].to_vec()).collect();
            SweepResult {
                param: Param::Lambda,
                coupled: true,
                points: lambdas
                    .iter()
                    .zip(&all[i * nl..(i + 1) * nl])
                    .map(|(&param, &estimate)| SweepPoint { param, estimate })
                    .collect(),
                violations: count_violations(&cols, false),
            }
        })
        .collect();
    let violations = rows
        .iter()
        .filter(|r| {
            (0..ne).any(|i| {
                (0..nl).any(|j| {
                    let x = r[i * nl + j];
                    (j + 1 < nl && !x && r[i * nl + j + 1]) || (i + 1 < ne && !x && r[(i + 1) * nl + j])
                })
            })
        })
        .count();
    Ok(EpsilonSurface { eps: eps_list.to_vec(), lambdas: lambdas.to_vec(), curves, violations })
}

/// Parameter bracket read off a sweep: the last grid point whose CI lies
/// on the low side of θ and the first one beyond it on the high side.
pub fn bracket_from_sweep(result: &SweepResult, theta: f64, increasing: bool) -> Option<(f64, f64)> {
    let low = |e: &Estimate| if increasing { e.ci_hi < theta } else { e.ci_lo > theta };
    let high = |e: &Estimate| if increasing { e.ci_lo > theta } else { e.ci_hi < theta };
    let lo = result.points.iter().rposition(|p| low(&p.estimate))?;
    let hi = result.points.iter().skip(lo + 1).position(|p| high(&p.estimate))? + lo + 1;
    Some((result.points[lo].param, result.points[hi].param))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BisectStatus {
    /// Range endpoints coincide.
    Degenerate,
    /// Both endpoints are on their side of θ and no probe straddles θ.
    Bracketed,
    /// Some endpoint or probe has a CI containing θ.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisectResult {
    pub param: Param,
    pub param_lo: f64,
    pub param_hi: f64,
    pub threshold: f64,
    pub status: BisectStatus,
    /// The endpoint estimate fails its CI condition.
    pub lo_inconclusive: bool,
    pub hi_inconclusive: bool,
    /// Smallest interval holding every probe whose CI contains θ.
    pub straddle: Option<(f64, f64)>,
    pub evaluations: Vec<SweepPoint>,
}

impl BisectResult {
    pub fn width(&self) -> f64 {
        self.param_hi - self.param_lo
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisectConfig {
    pub threshold: f64,
    pub n: u64,
    pub max_evals: usize,
    /// Stop once every unresolved gap is narrower than this.
    pub tolerance: f64,
    pub level: f64,
}

impl Default for BisectConfig {
    fn default() -> Self {
        Self { threshold: DEFAULT_THRESHOLD, n: 1000, max_evals: 20, tolerance: 1e-3, level: DEFAULT_LEVEL }
    }
}

/// Coupled indicators of every trial at one parameter value: soups are
/// thinned from a sample at `range_hi`, fractals reuse one uniform field.
fn coupled_column(event: &EventSpec, param: Param, value: f64, range_hi: f64, n: u64, seed: u64) -> Result<Vec<bool>> {
    let rows = run_rows(n, seed, |s| sweep_row_point(event, param, value, range_hi, s))?;
    Ok(rows.into_iter().map(|r| r[0]).collect())
}

fn sweep_row_point(event: &EventSpec, param: Param, value: f64, range_hi: f64, s: &Stream) -> Result<Vec<bool>> {
    match (&event.model, param) {
        (Model::Soup { spec, h }, Param::Lambda) => {
            let master = sample_soup(&spec.with_lambda(range_hi), &s.child(0))?;
            Ok(vec![event.soup_indicator(&thin_to(&master, value, &s.child(1))?, *h)?])
        }
        (Model::Fractal { .. }, Param::P) => sweep_row(event, param, &[value], true, s),
        _ => Err(Error::InvalidEstimate(format!("cannot bisect {} for this model", param.name()))),
    }
}

/// Brackets the parameter where the event probability crosses θ.
///
/// The low endpoint moves only on a probe whose CI lies entirely on the
/// low side of θ, the high endpoint symmetrically. Probes whose CI
/// contains θ are kept as a straddle interval and the search continues on
/// the gaps on either side of it.
pub fn bisect_critical(
    event: &EventSpec,
    param: Param,
    range: (f64, f64),
    cfg: &BisectConfig,
    seed: u64,
) -> Result<BisectResult> {
    let (lo, hi) = range;
    let theta = cfg.threshold;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidEstimate(format!("threshold must lie in (0, 1), got {theta}")));
    }
    if !(lo <= hi) || cfg.n == 0 {
        return Err(Error::InvalidEstimate("need lo <= hi and n >= 1".into()));
    }
    let increasing = event.increasing_in(param)?;
    let mut result = BisectResult {
        param,
        param_lo: lo,
        param_hi: hi,
        threshold: theta,
        status: BisectStatus::Degenerate,
        lo_inconclusive: false,
        hi_inconclusive: false,
        straddle: None,
        evaluations: Vec::new(),
    };
    if lo == hi {
        return Ok(result);
    }
    event.with_param(param, lo)?.validate()?;
    event.with_param(param, hi)?.validate()?;

    // side of θ an estimate lies on, as seen from the low end of the range
    let low_side = |e: &Estimate| if increasing { e.ci_hi < theta } else { e.ci_lo > theta };
    let high_side = |e: &Estimate| if increasing { e.ci_lo > theta } else { e.ci_hi < theta };

    let mut columns: Vec<(f64, Vec<bool>)> = Vec::new();
    let evaluate = |v: f64, columns: &mut Vec<(f64, Vec<bool>)>| -> Result<Estimate> {
        let col = coupled_column(event, param, v, hi, cfg.n, seed)?;
        let hits = col.iter().filter(|b| **b).count() as u64;
        columns.push((v, col));
        check_monotone(columns, increasing)?;
        Ok(Estimate::from_counts(hits, cfg.n, cfg.level, seed))
    };

    let e_lo = evaluate(lo, &mut columns)?;
    let e_hi = evaluate(hi, &mut columns)?;
    result.evaluations.push(SweepPoint { param: lo, estimate: e_lo });
    result.evaluations.push(SweepPoint { param: hi, estimate: e_hi });
    result.lo_inconclusive = !low_side(&e_lo);
    result.hi_inconclusive = !high_side(&e_hi);

    let (mut a, mut b) = (lo, hi);
    let mut straddle: Option<(f64, f64)> = None;
    while result.evaluations.len() < cfg.max_evals {
        let gaps = match straddle {
            None => vec![(a, b)],
            Some((s, t)) => vec![(a, s), (t, b)],
        };
        let Some(&(g0, g1)) = gaps.iter().filter(|g| g.1 - g.0 > cfg.tolerance).max_by(|x, y| {
            (x.1 - x.0).total_cmp(&(y.1 - y.0))
        }) else {
            break;
        };
        let mid = 0.5 * (g0 + g1);
        let e = evaluate(mid, &mut columns)?;
        result.evaluations.push(SweepPoint { param: mid, estimate: e });
        if low_side(&e) {
            a = mid;
        } else if high_side(&e) {
            b = mid;
        } else {
            straddle = Some(match straddle {
                None => (mid, mid),
                Some((s, t)) => (s.min(mid), t.max(mid)),
            });
        }
    }
    result.param_lo = a;
    result.param_hi = b;
    result.straddle = straddle;
    result.status = if result.lo_inconclusive || result.hi_inconclusive || straddle.is_some() {
        BisectStatus::Inconclusive
    } else {
        BisectStatus::Bracketed
    };
    Ok(result)
}

/// Every trial's indicators, ordered by parameter, must be monotone.
fn check_monotone(columns: &[(f64, Vec<bool>)], increasing: bool) -> Result<()> {
    let mut order: Vec<usize> = (0..columns.len()).collect();
    order.sort_by(|&i, &j| columns[i].0.total_cmp(&columns[j].0));
    let n = columns[0].1.len();
    for t in 0..n {
        for w in order.windows(2) {
            let (x, y) = (columns[w[0]].1[t], columns[w[1]].1[t]);
            let bad = if increasing { x && !y } else { !x && y };
            if bad {
                return Err(Error::NonMonotoneEvidence(format!(
                    "trial {t} between {} and {}",
                    columns[w[0]].0, columns[w[1]].0
                )));
            }
        }
    }
    Ok(())
}

/// JSON record of a single estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub spec: Model,
    pub event: Event,
    pub n: u64,
    pub p_hat: f64,
    pub ci: [f64; 2],
    pub seed: u64,
    pub wall_time_s: Option<f64>,
}

impl EstimateReport {
    pub fn new(event: &EventSpec, e: &Estimate, wall_time_s: Option<f64>) -> Self {
        Self {
            spec: event.model.clone(),
            event: event.event.clone(),
            n: e.n,
            p_hat: e.p_hat,
            ci: [e.ci_lo, e.ci_hi],
            seed: e.seed,
            wall_time_s,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::exact_crossing_prob;
    use crate::geometry::shell_new;

    fn soup_event(lambda: f64) -> EventSpec {
        let shell = shell_new(AxisBox::unit(2), AxisBox::cube(2, 1.0 / 3.0, 2.0 / 3.0).unwrap()).unwrap();
        let spec = SoupSpec::balls(AxisBox::unit(2), lambda, 0.05, 0.3, 0);
        EventSpec::new(Model::Soup { spec, h: 0.0125 }, Event::ShellCrossing { shell })
    }

    fn fractal_box(p: f64, depth: usize, adj: Adjacency) -> EventSpec {
        EventSpec::new(
            Model::Fractal { spec: FractalSpec::new(2, 2, p, depth, 0), adjacency: adj },
            Event::BoxCrossing { region: AxisBox::unit(2), axis: 0 },
        )
    }

    #[test]
    fn always_true_event() {
        let e = mc_estimate(&soup_event(0.0), 50, 1).unwrap();
        assert_eq!((e.p_hat, e.ci_hi), (1.0, 1.0));
        let f = mc_estimate(&fractal_box(1.0, 3, Adjacency::Face), 50, 1).unwrap();
        assert_eq!(f.p_hat, 1.0);
    }

    #[test]
    fn deterministic_across_pools() {
        let ev = soup_event(1.0);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| mc_estimate(&ev, 200, 9).unwrap());
        let b = many.install(|| mc_estimate(&ev, 200, 9).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn matches_exact_oracle() {
        let e = mc_estimate_at(&fractal_box(0.5, 1, Adjacency::Face), 4000, 3, 0.99).unwrap();
        assert!(e.contains(7.0 / 16.0), "{e:?}");
        let exact = exact_crossing_prob(2, 2, 2, 0.7, 0, Adjacency::Vertex).unwrap();
        let e = mc_estimate_at(&fractal_box(0.7, 2, Adjacency::Vertex), 4000, 3, 0.99).unwrap();
        assert!(e.contains(exact), "{e:?} vs {exact}");
    }

    #[test]
    fn coupled_sweeps_are_monotone() {
        let s = sweep(&soup_event(0.0), Param::Lambda, &[0.5, 1.0, 2.0, 4.0], 100, 2, true, 0.95).unwrap();
        assert_eq!(s.violations, 0);
        assert!(s.p_hats().windows(2).all(|w| w[0] >= w[1]));
        let f = sweep(&fractal_box(0.0, 3, Adjacency::Vertex), Param::P, &[0.5, 0.6, 0.7, 0.8, 0.9], 200, 2, true, 0.95)
            .unwrap();
        assert_eq!(f.violations, 0);
        assert!(f.p_hats().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn single_point_sweep_is_mc_estimate() {
        let ev = fractal_box(0.6, 2, Adjacency::Face);
        let s = sweep(&ev, Param::P, &[0.6], 300, 5, true, 0.95).unwrap();
        assert_eq!(s.points[0].estimate, mc_estimate(&ev, 300, 5).unwrap());
    }

    #[test]
    fn unsorted_grid_rejected() {
        assert!(sweep(&soup_event(0.0), Param::Lambda, &[2.0, 1.0], 10, 0, true, 0.95).is_err());
    }

    #[test]
    fn epsilon_scan_properties() {
        let r = epsilon_scan(&soup_event(2.0), &[0.3, 0.2, 0.1, 0.05], 100, 4, 0.95).unwrap();
        assert_eq!(r.points[0].estimate.p_hat, 1.0);
        assert_eq!(r.violations, 0);
        assert!(r.p_hats().windows(2).all(|w| w[0] >= w[1]));
        let z = epsilon_scan(&soup_event(0.0), &[0.2, 0.05], 30, 4, 0.95).unwrap();
        assert!(z.p_hats().iter().all(|&p| p == 1.0));
    }

    #[test]
    fn bisect_brackets_exact_root() {
        let cfg = BisectConfig { threshold: 0.4375, n: 4000, max_evals: 12, tolerance: 1e-3, level: 0.95 };
        let r = bisect_critical(&fractal_box(0.0, 1, Adjacency::Face), Param::P, (0.0, 1.0), &cfg, 11).unwrap();
        assert!(r.param_lo < 0.5 && 0.5 < r.param_hi, "{r:?}");
        assert!(!r.lo_inconclusive && !r.hi_inconclusive);
        assert!(r.evaluations.len() <= 12);
    }

    #[test]
    fn bisect_edge_cases() {
        let ev = soup_event(0.0);
        let deg = bisect_critical(&ev, Param::Lambda, (1.0, 1.0), &BisectConfig::default(), 0).unwrap();
        assert_eq!((deg.width(), deg.status), (0.0, BisectStatus::Degenerate));
        let cfg = BisectConfig { threshold: 0.999, n: 200, max_evals: 4, ..BisectConfig::default() };
        let r = bisect_critical(&ev, Param::Lambda, (0.0, 1e-6), &cfg, 0).unwrap();
        assert_eq!(r.status, BisectStatus::Inconclusive);
        assert!(r.lo_inconclusive);
    }

    #[test]
    fn validation() {
        let mut ev = soup_event(1.0);
        ev.event = Event::Circuit {
            shell: shell_new(AxisBox::cube(2, 0.0, 2.0).unwrap(), AxisBox::cube(2, 0.5, 1.5).unwrap()).unwrap(),
        };
        assert!(matches!(ev.validate(), Err(Error::ShellOutsideGrid)));
        let mut fr = fractal_box(0.5, 1, Adjacency::Face);
        fr.event = Event::Circuit { shell: shell_new(AxisBox::unit(2), AxisBox::cube(2, 0.4, 0.6).unwrap()).unwrap() };
        assert!(matches!(fr.validate(), Err(Error::UnsupportedEvent(_))));
        let mut coarse = soup_event(1.0);
        if let Model::Soup { h, .. } = &mut coarse.model {
            *h = 0.1;
        }
        assert!(matches!(coarse.validate(), Err(Error::ResolutionTooCoarse { .. })));
    }

    #[test]
    fn csv_schema() {
        let s = sweep(&fractal_box(0.0, 1, Adjacency::Face), Param::P, &[0.0, 1.0], 10, 0, true, 0.95).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("param,p_hat,ci_lo,ci_hi,n\n0.0,0.0,0.0,"), "{text}");
    }

    #[test]
    fn surface_is_monotone_both_ways() {
        let s = epsilon_lambda_surface(&soup_event(0.0), &[0.2, 0.1, 0.05], &[0.5, 1.0, 2.0], 60, 3, 0.95).unwrap();
        assert_eq!(s.violations, 0);
        for c in &s.curves {
            assert_eq!(c.violations, 0);
        }
        for j in 0..3 {
            let col: Vec<u64> = s.curves.iter().map(|c| c.points[j].estimate.successes).collect();
            assert!(col.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn bracket_from_grid() {
        let pts = [(0.1, 95), (0.2, 60), (0.3, 3), (0.4, 0)];
        let r = SweepResult {
            param: Param::Lambda,
            coupled: true,
            points: pts
                .iter()
                .map(|&(x, k)| SweepPoint { param: x, estimate: Estimate::from_counts(k, 100, 0.95, 0) })
                .collect(),
            violations: 0,
        };
        assert_eq!(bracket_from_sweep(&r, 0.05, false), Some((0.2, 0.4)));
    }
}
