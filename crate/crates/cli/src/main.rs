use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use soupsim::estimate::{
    bisect_critical, bracket_from_sweep, epsilon_lambda_surface, epsilon_scan, mc_estimate_at, sweep, BisectConfig,
    EstimateReport, Model,
};
use soupsim::fractal::{crossing_polynomial, sample_fractal};
use soupsim::raster::rasterize;
use soupsim::renorm::{extract_x_field, summarize, RenormSpec, XField};
use soupsim::soup::sample_soup;
use soupsim::svg::{curves_svg, fractal_svg, soup_svg, Curve};
use soupsim::{Error, Stream};

mod config;

use config::{parse_list, parse_usize_list, RunConfig};

#[derive(Parser)]
#[command(name = "soupsim", version, about = "Random soups and fractal percolation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (outputs do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; without it results go to stdout only.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON run configuration; explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Record wall time in estimate JSON.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a soup and write its shapes.
    SoupSample(RunConfig),
    /// Estimate an event probability.
    Crossing(RunConfig),
    /// Estimates along a λ or p grid.
    Sweep(RunConfig),
    /// Φ^ε over a descending ε list, or a λ-sweep per ε when --grid is set.
    EpsilonScan(RunConfig),
    /// CI-driven bracket of the parameter where the probability crosses θ.
    Bisect(RunConfig),
    /// Exact fractal crossing probability by enumeration.
    FractalExact(RunConfig),
    /// X-field statistics of translated shrunken shells.
    Renorm(RunConfig),
}

impl Command {
    fn parts(self) -> (&'static str, RunConfig) {
        match self {
            Command::SoupSample(c) => ("soup-sample", c),
            Command::Crossing(c) => ("crossing", c),
            Command::Sweep(c) => ("sweep", c),
            Command::EpsilonScan(c) => ("epsilon-scan", c),
            Command::Bisect(c) => ("bisect", c),
            Command::FractalExact(c) => ("fractal-exact", c),
            Command::Renorm(c) => ("renorm", c),
        }
    }
}

enum Failure {
    Usage(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Csv(_) => Failure::Io(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome<T = ()> = Result<T, Failure>;

/// Where results go: stdout always, files when `--out` is set.
struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    fn open(dir: Option<PathBuf>) -> Outcome<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).map_err(|e| Failure::Io(format!("{}: {e}", d.display())))?;
        }
        Ok(Self { dir })
    }

    fn file(&self, name: &str, bytes: &[u8]) -> Outcome {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            fs::write(&path, bytes).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Outcome<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Failure::Usage(e.to_string()))?;
        bytes.push(b'\n');
        self.file(name, &bytes)?;
        Ok(bytes)
    }
}

fn stdout(bytes: &[u8]) -> Outcome {
    let mut out = io::stdout().lock();
    out.write_all(bytes)?;
    out.flush()?;
    Ok(())
}

fn load_config(path: &Path, command: &str) -> Outcome<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("config: {e}")))?;
    let mut doc = doc;
    if let Some(obj) = doc.as_object_mut() {
        if let Some(cmd) = obj.remove("command") {
            if cmd.as_str() != Some(command) {
                return Err(Failure::Usage(format!("config is for command {cmd}, not {command:?}")));
            }
        }
    }
    serde_json::from_value(doc).map_err(|e| Failure::Usage(format!("config: {e}")))
}

#[derive(Serialize)]
struct ResolvedConfig<'a> {
    command: &'a str,
    #[serde(flatten)]
    config: &'a RunConfig,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Io(m)) => {
            eprintln!("i/o error: {m}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let (command, flags) = cli.command.parts();
    let merged = match &cli.config {
        Some(path) => flags.overlay(load_config(path, command)?),
        None => flags,
    };
    let cfg = merged.resolve(command)?;
    let sink = Sink::open(cli.out)?;
    sink.json("config.json", &ResolvedConfig { command, config: &cfg })?;
    let started = Instant::now();
    let timing = cli.timing.then_some(started);
    match command {
        "soup-sample" => soup_sample(&cfg, &sink),
        "crossing" => crossing(&cfg, &sink, timing),
        "sweep" => cmd_sweep(&cfg, &sink),
        "epsilon-scan" => cmd_epsilon_scan(&cfg, &sink),
        "bisect" => cmd_bisect(&cfg, &sink),
        "fractal-exact" => fractal_exact(&cfg, &sink),
        "renorm" => cmd_renorm(&cfg, &sink),
        _ => unreachable!("every subcommand is dispatched"),
    }
}

fn soup_sample(cfg: &RunConfig, sink: &Sink) -> Outcome {
    let spec = cfg.soup_spec()?;
    let set = sample_soup(&spec, &Stream::new(spec.seed))?;
    let mut csv = Vec::new();
    set.write_csv(&mut csv)?;
    sink.file("shapes.csv", &csv)?;
    let mut json = Vec::new();
    set.write_json(&mut json)?;
    json.push(b'\n');
    sink.file("shapes.json", &json)?;
    if cfg.svg {
        let h = cfg.h.unwrap_or(spec.dia_min / 4.0);
        let grid = rasterize(&set, &spec.window, h)?;
        sink.file("scene.svg", soup_svg(&set, Some(&grid))?.as_bytes())?;
    }
    stdout(&csv)
}

fn crossing(cfg: &RunConfig, sink: &Sink, started: Option<Instant>) -> Outcome {
    let ev = cfg.event_spec()?;
    let seed = cfg.seed.unwrap_or(0);
    let est = mc_estimate_at(&ev, cfg.trials.unwrap_or(1000), seed, cfg.level.unwrap_or(0.95))?;
    let wall = started.map(|t| t.elapsed().as_secs_f64());
    let bytes = sink.json("estimate.json", &EstimateReport::new(&ev, &est, wall))?;
    if cfg.svg {
        // realization of trial 0
        let trial = Stream::new(seed).child(0);
        let svg = match &ev.model {
            Model::Soup { spec, h } => {
                let set = sample_soup(spec, &trial)?;
                soup_svg(&set, Some(&rasterize(&set, &spec.window, *h)?))?
            }
            Model::Fractal { spec, .. } => fractal_svg(&sample_fractal(spec, &trial)?, spec.depth)?,
        };
        sink.file("trial0.svg", svg.as_bytes())?;
    }
    stdout(&bytes)
}

fn cmd_sweep(cfg: &RunConfig, sink: &Sink) -> Outcome {
    let ev = cfg.event_spec()?;
    let grid = parse_list(cfg.require(&cfg.grid, "grid")?)?;
    let param = cfg.param()?;
    let r = sweep(
        &ev,
        param,
        &grid,
        cfg.trials.unwrap_or(1000),
        cfg.seed.unwrap_or(0),
        cfg.coupled.unwrap_or(true),
        cfg.level.unwrap_or(0.95),
    )?;
    let mut csv = Vec::new();
    r.write_csv(&mut csv)?;
    sink.file("sweep.csv", &csv)?;
    sink.json("sweep.json", &r)?;
    if cfg.svg {
        let pts: Vec<_> = r.points.iter().map(|p| (p.param, p.estimate)).collect();
        let svg = curves_svg(&[Curve { label: format!("{:?}", ev.event_name()), points: &pts }], param.name(), "P");
        sink.file("sweep.svg", svg.as_bytes())?;
    }
    stdout(&csv)
}

trait EventName {
    fn event_name(&self) -> &'static str;
}

impl EventName for soupsim::EventSpec {
    fn event_name(&self) -> &'static str {
        match self.event {
            soupsim::Event::ShellCrossing { .. } => "shell crossing",
            soupsim::Event::BoxCrossing { .. } => "box crossing",
            soupsim::Event::Circuit { .. } => "circuit",
            soupsim::Event::ComponentDiameterExceeds { .. } => "large component",
        }
    }
}

#[derive(Serialize)]
struct Bracket {
    eps: f64,
    lambda_lo: Option<f64>,
    lambda_hi: Option<f64>,
    theta: f64,
}

fn cmd_epsilon_scan(cfg: &RunConfig, sink: &Sink) -> Outcome {
    let ev = cfg.event_spec()?;
    let eps = parse_list(cfg.require(&cfg.eps, "eps")?)?;
    let (n, seed, level) = (cfg.trials.unwrap_or(1000), cfg.seed.unwrap_or(0), cfg.level.unwrap_or(0.95));
    let Some(grid) = &cfg.grid else {
        let r = epsilon_scan(&ev, &eps, n, seed, level)?;
        let mut csv = Vec::new();
        r.write_csv(&mut csv)?;
        sink.file("epsilon_scan.csv", &csv)?;
        sink.json("epsilon_scan.json", &r)?;
        if cfg.svg {
            let pts: Vec<_> = r.points.iter().map(|p| (p.param, p.estimate)).collect();
            let svg = curves_svg(&[Curve { label: "Φ^ε".into(), points: &pts }], "ε", "Φ^ε");
            sink.file("epsilon_scan.svg", svg.as_bytes())?;
        }
        return stdout(&csv);
    };
    let lambdas = parse_list(grid)?;
    let surface = epsilon_lambda_surface(&ev, &eps, &lambdas, n, seed, level)?;
    let mut csv = Vec::new();
    surface.write_csv(&mut csv)?;
    sink.file("epsilon_curves.csv", &csv)?;
    sink.json("epsilon_curves.json", &surface)?;
    let theta = cfg.theta.unwrap_or(soupsim::estimate::DEFAULT_THRESHOLD);
    let brackets: Vec<Bracket> = surface
        .eps
        .iter()
        .zip(&surface.curves)
        .map(|(&e, c)| {
            let b = bracket_from_sweep(c, theta, false);
            Bracket { eps: e, lambda_lo: b.map(|x| x.0), lambda_hi: b.map(|x| x.1), theta }
        })
        .collect();
    let mut bcsv = String::from("eps,lambda_lo,lambda_hi,theta\n");
    for b in &brackets {
        let f = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:?}"));
        bcsv.push_str(&format!("{:?},{},{},{:?}\n", b.eps, f(b.lambda_lo), f(b.lambda_hi), b.theta));
    }
    sink.file("brackets.csv", bcsv.as_bytes())?;
    if cfg.svg {
        let series: Vec<Vec<_>> =
            surface.curves.iter().map(|c| c.points.iter().map(|p| (p.param, p.estimate)).collect()).collect();
        let curves: Vec<Curve> = surface
            .eps
            .iter()
            .zip(&series)
            .map(|(e, pts)| Curve { label: format!("ε = {e}"), points: pts })
            .collect();
        sink.file("epsilon_curves.svg", curves_svg(&curves, "λ", "Φ^ε").as_bytes())?;
    }
    stdout(&csv)
}

fn cmd_bisect(cfg: &RunConfig, sink: &Sink) -> Outcome {
    let ev = cfg.event_spec()?;
    let range = match parse_list(cfg.require(&cfg.range, "range")?)?[..] {
        [a, b] => (a, b),
        _ => return Err(Failure::Usage("--range takes `lo,hi`".into())),
    };
    let bc = BisectConfig {
        threshold: cfg.theta.unwrap_or(soupsim::estimate::DEFAULT_THRESHOLD),
        n: cfg.trials.unwrap_or(1000),
        max_evals: cfg.max_evals.unwrap_or(20),
        tolerance: cfg.tol.unwrap_or(1e-3),
        level: cfg.level.unwrap_or(0.95),
    };
    let r = bisect_critical(&ev, cfg.param()?, range, &bc, cfg.seed.unwrap_or(0))?;
    let bytes = sink.json("bisect.json", &r)?;
    stdout(&bytes)
}

#[derive(Serialize)]
struct ExactReport {
    n: usize,
    dim: usize,
    depth: usize,
    p: f64,
    axis: usize,
    adjacency: &'static str,
    probability: f64,
    /// `[successes, failures, count]` terms of `Σ count · p^s (1-p)^f`.
    terms: Vec<[u64; 3]>,
}

fn fractal_exact(cfg: &RunConfig, sink: &Sink) -> Outcome {
    let spec = cfg.fractal_spec()?;
    let adj = cfg.adjacency()?;
    let axis = cfg.axis.unwrap_or(0);
    let poly = crossing_polynomial(spec.n, spec.dim, spec.depth, axis, adj)?;
    let probability = poly.eval_f64(spec.p);
    let report = ExactReport {
        n: spec.n,
        dim: spec.dim,
        depth: spec.depth,
        p: spec.p,
        axis,
        adjacency: adj.name(),
        probability,
        terms: poly.terms.iter().map(|(&(s, f), &c)| [u64::from(s), u64::from(f), c]).collect(),
    };
    sink.json("exact.json", &report)?;
    stdout(format!("{probability}\n").as_bytes())
}

fn cmd_renorm(cfg: &RunConfig, sink: &Sink) -> Outcome {
    let base = cfg.soup_spec()?;
    let extent = parse_usize_list(cfg.require(&cfg.extent, "extent")?)?;
    let s = cfg.s.unwrap_or(0.1);
    let h = cfg.h.unwrap_or(base.dia_min / 4.0);
    let spec = RenormSpec::fitted(cfg.shell()?, s, extent, &base, h)?;
    let n_fields = cfg.fields.unwrap_or(2000);
    let root = Stream::new(base.seed);
    let fields: Vec<XField> = (0..n_fields as u64)
        .into_par_iter()
        .map(|t| extract_x_field(&sample_soup(&spec.soup_spec, &root.child(t))?, &spec))
        .collect::<Result<_, Error>>()?;
    let summary = summarize(&fields, &spec, cfg.level.unwrap_or(0.99));
    if let Some(first) = fields.first() {
        let mut csv = Vec::new();
        first.write_csv(&mut csv)?;
        sink.file("x_field_0.csv", &csv)?;
    }
    sink.json("renorm_spec.json", &spec)?;
    let bytes = sink.json("summary.json", &summary)?;
    stdout(&bytes)
}
