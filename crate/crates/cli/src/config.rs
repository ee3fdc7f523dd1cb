//! Flat run configuration shared by every subcommand.
//!
//! Flags and `--config` files fill the same struct. After defaults are
//! resolved every field is set, and that resolved document is what gets
//! written next to the outputs.

use clap::Args;
use serde::{Deserialize, Serialize};
use soupsim::estimate::{Event, EventSpec, Model, Param};
use soupsim::geometry::{shell_new, AxisBox, Point, SimpleShell};
use soupsim::{Adjacency, Error, FractalShell, FractalSpec, ShapeKind, SoupMode, SoupSpec};

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed for all randomness.
    #[arg(long)]
    pub seed: Option<u64>,

    /// soup | fractal
    #[arg(long)]
    pub model: Option<String>,
    /// Ambient dimension d.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Soup intensity λ.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Lower diameter cutoff (ε for scans).
    #[arg(long)]
    pub dia_min: Option<f64>,
    /// Upper diameter cutoff.
    #[arg(long)]
    pub dia_max: Option<f64>,
    /// `lo,hi` for a cube or `lo_0,hi_0,lo_1,hi_1,...` per axis.
    #[arg(long)]
    pub window: Option<String>,
    /// full | contained
    #[arg(long)]
    pub mode: Option<String>,
    /// ball | cube
    #[arg(long)]
    pub kind: Option<String>,
    /// Raster cell side; defaults to dia_min/4.
    #[arg(long)]
    pub h: Option<f64>,

    /// Fractal subdivision factor N.
    #[arg(long)]
    pub n_sub: Option<usize>,
    /// Fractal retention probability.
    #[arg(long)]
    pub p: Option<f64>,
    /// Fractal depth k.
    #[arg(long)]
    pub depth: Option<usize>,
    /// face | vertex (fractal models; soups always use face).
    #[arg(long)]
    pub adjacency: Option<String>,
    /// centered | corner
    #[arg(long)]
    pub fractal_shell: Option<String>,

    /// shell | box | circuit | diameter
    #[arg(long)]
    pub event: Option<String>,
    /// Outer cube bounds `lo,hi` on every axis; fractions like `1/3` allowed.
    #[arg(long)]
    pub shell_outer: Option<String>,
    /// Inner cube bounds, same syntax as --shell-outer.
    #[arg(long)]
    pub shell_inner: Option<String>,
    /// Crossing box, same syntax as --window.
    #[arg(long = "box")]
    pub box_region: Option<String>,
    /// Crossing axis.
    #[arg(long)]
    pub axis: Option<usize>,
    /// Diameter threshold for the `diameter` event.
    #[arg(long)]
    pub diam_threshold: Option<f64>,

    /// Monte Carlo trials per estimate.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Confidence level of the reported intervals.
    #[arg(long)]
    pub level: Option<f64>,
    /// lambda | p
    #[arg(long)]
    pub param: Option<String>,
    /// Comma-separated ascending parameter values.
    #[arg(long)]
    pub grid: Option<String>,
    /// Share randomness across grid points.
    #[arg(long)]
    pub coupled: Option<bool>,
    /// Comma-separated descending ε values.
    #[arg(long)]
    pub eps: Option<String>,
    /// Bisection range `lo,hi`.
    #[arg(long)]
    pub range: Option<String>,
    /// Bisection threshold θ.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Bisection evaluation budget.
    #[arg(long)]
    pub max_evals: Option<usize>,
    /// Bisection bracket width goal.
    #[arg(long)]
    pub tol: Option<f64>,

    /// Renormalization shrink factor.
    #[arg(long)]
    pub s: Option<f64>,
    /// Lattice sites per axis, comma-separated.
    #[arg(long)]
    pub extent: Option<String>,
    /// Number of independent X-fields.
    #[arg(long)]
    pub fields: Option<usize>,

    /// Also write SVG renderings (d = 2).
    #[arg(long)]
    #[serde(default)]
    pub svg: bool,
}

pub type CfgResult<T> = std::result::Result<T, Error>;

fn bad(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

/// Number or fraction `a/b`.
pub fn parse_number(s: &str) -> CfgResult<f64> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let (a, b) = (parse_number(a)?, parse_number(b)?);
        return Ok(a / b);
    }
    s.parse::<f64>().map_err(|_| bad(format!("not a number: {s:?}")))
}

pub fn parse_list(s: &str) -> CfgResult<Vec<f64>> {
    s.split(',').filter(|x| !x.trim().is_empty()).map(parse_number).collect()
}

pub fn parse_usize_list(s: &str) -> CfgResult<Vec<usize>> {
    s.split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|_| bad(format!("not a count: {x:?}"))))
        .collect()
}

/// `lo,hi` (cube) or per-axis pairs.
pub fn parse_box(s: &str, dim: usize) -> CfgResult<AxisBox<f64>> {
    let v = parse_list(s)?;
    let (lo, hi): (Vec<f64>, Vec<f64>) = if v.len() == 2 {
        (vec![v[0]; dim], vec![v[1]; dim])
    } else if v.len() == 2 * dim {
        (v.iter().step_by(2).copied().collect(), v.iter().skip(1).step_by(2).copied().collect())
    } else {
        return Err(bad(format!("box {s:?} needs 2 or {} numbers", 2 * dim)));
    };
    AxisBox::new(Point::new(lo), Point::new(hi))
}

fn cube_bounds(s: &str) -> CfgResult<(f64, f64)> {
    match parse_list(s)?[..] {
        [a, b] => Ok((a, b)),
        _ => Err(bad(format!("expected `lo,hi`, got {s:?}"))),
    }
}

impl RunConfig {
    /// Fields of `self` override those of `base`.
    pub fn overlay(self, base: RunConfig) -> RunConfig {
        macro_rules! pick {
            ($($f:ident),*) => { RunConfig { $($f: self.$f.or(base.$f),)* svg: self.svg || base.svg } };
        }
        pick!(
            seed, model, dim, lambda, dia_min, dia_max, window, mode, kind, h, n_sub, p, depth, adjacency,
            fractal_shell, event, shell_outer, shell_inner, box_region, axis, diam_threshold, trials, level, param,
            grid, coupled, eps, range, theta, max_evals, tol, s, extent, fields
        )
    }

    /// Fills every unset field with its default for `command`.
    pub fn resolve(mut self, command: &str) -> CfgResult<RunConfig> {
        let renorm = command == "renorm";
        self.seed.get_or_insert(0);
        let model = self.model.get_or_insert_with(|| "soup".into()).clone();
        if model != "soup" && model != "fractal" {
            return Err(bad(format!("unknown model {model:?}")));
        }
        let fractal = model == "fractal" || command == "fractal-exact";
        self.dim.get_or_insert(2);
        self.trials.get_or_insert(1000);
        self.level.get_or_insert(if renorm { 0.99 } else { 0.95 });
        self.axis.get_or_insert(0);
        if fractal {
            self.n_sub.get_or_insert(2);
            self.p.get_or_insert(0.5);
            self.depth.get_or_insert(1);
            self.adjacency.get_or_insert_with(|| "vertex".into());
            self.fractal_shell.get_or_insert_with(|| "centered".into());
            self.event.get_or_insert_with(|| "box".into());
            self.param.get_or_insert_with(|| "p".into());
        } else {
            if renorm {
                self.s.get_or_insert(0.1);
                self.extent.get_or_insert_with(|| "9,1".into());
                self.fields.get_or_insert(2000);
                self.shell_outer.get_or_insert_with(|| "0,3".into());
                self.shell_inner.get_or_insert_with(|| "1,2".into());
            }
            let dia_min = *self.dia_min.get_or_insert(0.05);
            if !(dia_min > 0.0) {
                return Err(Error::ResolutionZero);
            }
            let s = self.s;
            self.dia_max.get_or_insert(s.unwrap_or(0.5));
            self.lambda.get_or_insert(1.0);
            self.window.get_or_insert_with(|| "0,1".into());
            self.mode.get_or_insert_with(|| "full".into());
            self.kind.get_or_insert_with(|| "ball".into());
            let eps_min = match &self.eps {
                Some(e) => parse_list(e)?.into_iter().fold(dia_min, f64::min),
                None => dia_min,
            };
            self.h.get_or_insert(eps_min / 4.0);
            self.event.get_or_insert_with(|| "shell".into());
            self.shell_outer.get_or_insert_with(|| "0,1".into());
            self.shell_inner.get_or_insert_with(|| "1/3,2/3".into());
            self.param.get_or_insert_with(|| "lambda".into());
        }
        if self.event.as_deref() == Some("box") {
            self.box_region.get_or_insert_with(|| "0,1".into());
        }
        if self.event.as_deref() == Some("diameter") {
            self.diam_threshold.get_or_insert(0.5);
        }
        if matches!(command, "sweep" | "bisect") {
            self.coupled.get_or_insert(true);
        }
        if command == "bisect" {
            self.theta.get_or_insert(soupsim::estimate::DEFAULT_THRESHOLD);
            self.max_evals.get_or_insert(20);
            self.tol.get_or_insert(1e-3);
        }
        Ok(self)
    }

    pub fn soup_spec(&self) -> CfgResult<SoupSpec> {
        let dim = self.dim.unwrap_or(2);
        let kind = self.kind.as_deref().unwrap_or("ball");
        let mode = self.mode.as_deref().unwrap_or("full");
        let spec = SoupSpec {
            dim,
            lambda: self.lambda.unwrap_or(1.0),
            kind: ShapeKind::parse(kind).ok_or_else(|| bad(format!("unknown shape kind {kind:?}")))?,
            dia_min: self.dia_min.unwrap_or(0.05),
            dia_max: self.dia_max.unwrap_or(0.5),
            window: parse_box(self.window.as_deref().unwrap_or("0,1"), dim)?,
            mode: SoupMode::parse(mode).ok_or_else(|| bad(format!("unknown mode {mode:?}")))?,
            seed: self.seed.unwrap_or(0),
        };
        if spec.dia_min <= 0.0 {
            return Err(Error::ResolutionZero);
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn adjacency(&self) -> CfgResult<Adjacency> {
        let a = self.adjacency.as_deref().unwrap_or("vertex");
        Adjacency::parse(a).ok_or_else(|| bad(format!("unknown adjacency {a:?}")))
    }

    pub fn fractal_spec(&self) -> CfgResult<FractalSpec> {
        let spec = FractalSpec::new(
            self.n_sub.unwrap_or(2),
            self.dim.unwrap_or(2),
            self.p.unwrap_or(0.5),
            self.depth.unwrap_or(1),
            self.seed.unwrap_or(0),
        );
        spec.validate()?;
        Ok(spec)
    }

    pub fn shell(&self) -> CfgResult<SimpleShell<f64>> {
        let dim = self.dim.unwrap_or(2);
        if self.model.as_deref() == Some("fractal") {
            let variant = match self.fractal_shell.as_deref().unwrap_or("centered") {
                "centered" => FractalShell::Centered,
                "corner" | "corner_anchored" => FractalShell::CornerAnchored,
                other => return Err(bad(format!("unknown fractal shell {other:?}"))),
            };
            let (lo, hi) = variant.inner_bounds();
            return shell_new(AxisBox::unit(dim), AxisBox::cube(dim, lo, hi)?);
        }
        let (olo, ohi) = cube_bounds(self.shell_outer.as_deref().unwrap_or("0,1"))?;
        let (ilo, ihi) = cube_bounds(self.shell_inner.as_deref().unwrap_or("1/3,2/3"))?;
        shell_new(AxisBox::cube(dim, olo, ohi)?, AxisBox::cube(dim, ilo, ihi)?)
    }

    pub fn event_spec(&self) -> CfgResult<EventSpec> {
        let model = match self.model.as_deref().unwrap_or("soup") {
            "soup" => {
                let spec = self.soup_spec()?;
                let h = self.h.unwrap_or(spec.dia_min / 4.0);
                Model::Soup { spec, h }
            }
            _ => Model::Fractal { spec: self.fractal_spec()?, adjacency: self.adjacency()? },
        };
        let dim = self.dim.unwrap_or(2);
        let event = match self.event.as_deref().unwrap_or("shell") {
            "shell" => Event::ShellCrossing { shell: self.shell()? },
            "circuit" => Event::Circuit { shell: self.shell()? },
            "box" => Event::BoxCrossing {
                region: parse_box(self.box_region.as_deref().unwrap_or("0,1"), dim)?,
                axis: self.axis.unwrap_or(0),
            },
            "diameter" => Event::ComponentDiameterExceeds { threshold: self.diam_threshold.unwrap_or(0.5) },
            other => return Err(bad(format!("unknown event {other:?}"))),
        };
        let ev = EventSpec::new(model, event);
        ev.validate()?;
        Ok(ev)
    }

    pub fn param(&self) -> CfgResult<Param> {
        match self.param.as_deref().unwrap_or("lambda") {
            "lambda" => Ok(Param::Lambda),
            "p" => Ok(Param::P),
            other => Err(bad(format!("unknown parameter {other:?}"))),
        }
    }

    pub fn require<'a>(&self, value: &'a Option<String>, flag: &str) -> CfgResult<&'a str> {
        value.as_deref().ok_or_else(|| bad(format!("missing required --{flag}")))
    }
}
