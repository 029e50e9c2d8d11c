//! `ricci-lab` command-line front end.
//!
//! Exit codes: 0 ok, 2 input error, 3 numeric abort, 4 pipeline stage failure.

mod config;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use ricci_lab::atlas::{FrameMode, TorusSpec};
use ricci_lab::curvature::{curvature_report, DerivativePlan};
use ricci_lab::metric::{CandidateSeed, MetricField, PerturbationMode, PerturbationParams, ReferenceMetric};
use ricci_lab::net::{build_net_with, default_verify_resolution, verify_net, CoveringNet, NetOptions};
use ricci_lab::search::{search, Optimizer, SearchConfig};
use ricci_lab::sweep::{report, sweep, to_csv, SampleGrid};

use config::{parse_config, PipelineConfig};
use output::Outputs;

#[derive(Parser, Debug)]
#[command(name = "ricci-lab", version, about = "Curvature checks, covering nets, seed search and deformation sweeps on flat tori")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Global {
    /// Output directory.
    #[arg(long, global = true, default_value = "ricci-out")]
    #[serde(skip)]
    out: PathBuf,
    /// RNG seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Derivative plan for the curvature engine.
    #[arg(long, global = true, value_enum, default_value_t = PlanArg::ForwardMode)]
    plan: PlanArg,
    /// Central-difference step.
    #[arg(long, global = true, default_value_t = 1e-3)]
    step: f64,
    /// Disable Richardson extrapolation of central differences.
    #[arg(long, global = true)]
    no_richardson: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
enum PlanArg {
    ForwardMode,
    CentralDifference,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
enum FramesArg {
    Identity,
    Random,
    Equivariant,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    Conformal,
    FullTensor,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
enum OptimizerArg {
    Simplex,
    Softmax,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Curvature reports of a reference or seed metric at given points.
    Curvature(CurvatureArgs),
    /// Build and verify a covering net.
    Net(NetArgs),
    /// Search for a seed metric with negative Ricci curvature on the unit ball.
    SeedSearch(SearchArgs),
    /// Sweep (d, s) for a net and a seed metric.
    Sweep(SweepArgs),
    /// Net, seed, sweep and report from one config file.
    Pipeline(PipelineArgs),
}

#[derive(Args, Debug, Serialize)]
struct CurvatureArgs {
    /// Builtin name (e.g. `flat-torus`, `sphere:r=1:n=3`, `hyperbolic:n=3`) or a JSON metric file.
    #[arg(long)]
    metric: String,
    /// Points file (JSON array or one point per line) or `random:N`.
    #[arg(long)]
    points: String,
    /// Radius of the ball sampled by `random:N`.
    #[arg(long, default_value_t = 0.9)]
    radius: f64,
}

#[derive(Args, Debug, Serialize)]
struct NetArgs {
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Torus side length.
    #[arg(long = "L", default_value_t = 2.0 * std::f64::consts::PI)]
    side: f64,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, value_enum, default_value_t = FramesArg::Identity)]
    frames: FramesArg,
    /// Per-axis verification grid (default: ϱ/10 spacing within the grid budget).
    #[arg(long)]
    verify_resolution: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct SearchArgs {
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::FullTensor)]
    mode: ModeArg,
    /// Highest monomial degree in the basis.
    #[arg(long, default_value_t = 1)]
    degree: u32,
    /// Objective evaluations.
    #[arg(long, default_value_t = 200)]
    budget: usize,
    #[arg(long, default_value_t = 200)]
    interior_samples: usize,
    #[arg(long, default_value_t = 50)]
    shell_samples: usize,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Simplex)]
    optimizer: OptimizerArg,
    /// Initial simplex step.
    #[arg(long, default_value_t = 0.1)]
    simplex_step: f64,
    /// Softmax temperature.
    #[arg(long, default_value_t = 0.02)]
    temperature: f64,
    /// Softmax descent step.
    #[arg(long, default_value_t = 0.02)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1e-6)]
    fd_step: f64,
    #[arg(long, default_value_t = 1e-3)]
    pd_margin: f64,
    #[arg(long, default_value_t = 0.05)]
    initial_scale: f64,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    /// Net JSON file.
    #[arg(long)]
    net: PathBuf,
    /// Seed-metric JSON file or `euclidean`.
    #[arg(long, default_value = "euclidean")]
    seed_metric: String,
    /// Comma-separated d values.
    #[arg(long, default_value = "1,2,3,4,5,6,7,8,9,10")]
    d_list: String,
    /// Comma-separated s values.
    #[arg(long, default_value = "0.001,0.002,0.005,0.01,0.02,0.05,0.1,0.2,0.5,1")]
    s_list: String,
    #[arg(long, default_value_t = 20)]
    resolution: usize,
    #[arg(long)]
    anchor_refinement: bool,
}

#[derive(Args, Debug, Serialize)]
struct PipelineArgs {
    /// Config file (`key = value` lines or JSON).
    #[arg(long)]
    config: PathBuf,
}

/// A failed run with its exit code.
#[derive(Debug)]
enum Failure {
    Input(anyhow::Error),
    Numeric(anyhow::Error),
    Stage(&'static str, anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Stage(..) => 4,
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn input(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Input(e.into())
}

/// Numeric engine failures abort with 3; everything else is an input error.
fn classify(e: ricci_lab::Error) -> Failure {
    use ricci_lab::Error as E;
    match e {
        E::NotPositiveDefinite { .. }
        | E::SingularMetric { .. }
        | E::NonFinite { .. }
        | E::InsufficientSmoothness { .. }
        | E::NetViolation(_) => Failure::Numeric(e.into()),
        _ => Failure::Input(e.into()),
    }
}

fn stage<T>(name: &'static str, r: anyhow::Result<T>) -> Outcome<T> {
    r.map_err(|e| Failure::Stage(name, e))
}

impl Global {
    fn derivative_plan(&self) -> DerivativePlan {
        match self.plan {
            PlanArg::ForwardMode => DerivativePlan::ForwardMode,
            PlanArg::CentralDifference => DerivativePlan::CentralDifference {
                step: self.step,
                richardson: !self.no_richardson,
            },
        }
    }
}

fn plan_from_names(plan: &str, step: f64, richardson: bool) -> anyhow::Result<DerivativePlan> {
    let p = match plan {
        "forward-mode" => DerivativePlan::ForwardMode,
        "central-difference" => DerivativePlan::CentralDifference { step, richardson },
        other => return Err(anyhow!("unknown derivative plan '{other}'")),
    };
    p.validate()?;
    Ok(p)
}

fn frame_mode(name: &str, seed: u64) -> anyhow::Result<FrameMode> {
    Ok(match name {
        "identity" => FrameMode::Identity,
        "random" => FrameMode::RandomOrthogonal { seed },
        "equivariant" => FrameMode::Equivariant { seed },
        other => return Err(anyhow!("unknown frame mode '{other}'")),
    })
}

fn parse_list(text: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().with_context(|| format!("'{s}' is not a number")))
        .collect()
}

/// Points as a JSON array of arrays, or one whitespace/comma separated point per line.
fn parse_points(text: &str) -> anyhow::Result<Vec<Vec<f64>>> {
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(text).context("parsing JSON points");
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let p = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("line {}: malformed point", i + 1))?;
        out.push(p);
    }
    Ok(out)
}

fn load_seed_metric(spec: &str, n: usize) -> anyhow::Result<CandidateSeed> {
    if spec == "euclidean" {
        return Ok(CandidateSeed::euclidean(n));
    }
    let text = fs::read_to_string(spec).with_context(|| format!("reading seed metric {spec}"))?;
    let params = PerturbationParams::from_json(&text)?;
    if params.dimension != n {
        return Err(anyhow!("seed metric has dimension {}, expected {n}", params.dimension));
    }
    Ok(CandidateSeed::from_params(params)?)
}

fn resolve_metric(spec: &str) -> Outcome<Box<dyn MetricField>> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(input)?;
        if let Ok(r) = serde_json::from_str::<ReferenceMetric>(&text) {
            return Ok(Box::new(ricci_lab::metric::make_reference(r).map_err(classify)?));
        }
        let params = PerturbationParams::from_json(&text)
            .map_err(|e| input(anyhow!("{spec}: neither a reference metric nor a seed metric ({e})")))?;
        return Ok(Box::new(CandidateSeed::from_params(params).map_err(classify)?));
    }
    let r = ReferenceMetric::from_str(spec).map_err(classify)?;
    Ok(Box::new(r))
}

fn cmd_curvature(g: &Global, a: &CurvatureArgs) -> Outcome<()> {
    let plan = g.derivative_plan();
    plan.validate().map_err(classify)?;
    let metric = resolve_metric(&a.metric)?;
    let n = metric.dimension();
    let points = if let Some(count) = a.points.strip_prefix("random:") {
        let count: usize = count.parse().map_err(|_| input(anyhow!("bad point count '{count}'")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
        let mut pts = Vec::with_capacity(count);
        while pts.len() < count {
            let p: Vec<f64> = (0..n).map(|_| rng.random_range(-a.radius..a.radius)).collect();
            if p.iter().map(|c| c * c).sum::<f64>() < a.radius * a.radius {
                pts.push(p);
            }
        }
        pts
    } else {
        let text = fs::read_to_string(&a.points)
            .with_context(|| format!("reading {}", a.points))
            .map_err(input)?;
        parse_points(&text).map_err(input)?
    };
    if let Some(p) = points.iter().find(|p| p.len() != n) {
        return Err(input(anyhow!("point {p:?} has dimension {}, metric has {n}", p.len())));
    }
    let start = Instant::now();
    let mut lines = String::new();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &points {
        let rep = curvature_report(metric.as_ref(), p, &plan).map_err(classify)?;
        lo = lo.min(rep.lambda_min);
        hi = hi.max(rep.lambda_max);
        lines.push_str(&serde_json::to_string(&rep.to_record()).map_err(input)?);
        lines.push('\n');
    }
    let mut out = Outputs::new(&g.out).map_err(input)?;
    out.write("curvature.jsonl", lines.as_bytes()).map_err(input)?;
    out.finish(
        "curvature",
        &json!({"global": g, "args": a, "metric": metric.describe(), "points": points.len()}),
        json!({"elapsed_ms": start.elapsed().as_secs_f64() * 1e3}),
    )
    .map_err(input)?;
    println!(
        "{}: {} points, lambda in [{lo:e}, {hi:e}] ({})",
        metric.describe(),
        points.len(),
        plan.label()
    );
    Ok(())
}

fn cmd_net(g: &Global, a: &NetArgs) -> Outcome<()> {
    let start = Instant::now();
    let spec = TorusSpec::new(a.n, a.side).map_err(classify)?;
    let frames = match a.frames {
        FramesArg::Identity => FrameMode::Identity,
        FramesArg::Random => FrameMode::RandomOrthogonal { seed: g.seed },
        FramesArg::Equivariant => FrameMode::Equivariant { seed: g.seed },
    };
    let opts = NetOptions {
        frames,
        build_resolution: None,
    };
    let net = build_net_with(&spec, a.rho, g.seed, &opts).map_err(classify)?;
    let res = a.verify_resolution.unwrap_or_else(|| default_verify_resolution(&spec, a.rho));
    let net = verify_net(&net, res);
    let mut out = Outputs::new(&g.out).map_err(input)?;
    out.write("net.json", net.to_json().map_err(input)?.as_bytes()).map_err(input)?;
    out.finish(
        "net",
        &json!({"global": g, "args": a, "verify_resolution": res}),
        json!({"elapsed_ms": start.elapsed().as_secs_f64() * 1e3}),
    )
    .map_err(input)?;
    println!(
        "{} anchors, multiplicity_observed {}, conditions {:?}",
        net.anchors.len(),
        net.multiplicity_observed,
        net.conditions
    );
    net.require_valid().map_err(classify)
}

fn search_config(a: &SearchArgs, plan: DerivativePlan) -> SearchConfig {
    let mode = match a.mode {
        ModeArg::Conformal => PerturbationMode::Conformal,
        ModeArg::FullTensor => PerturbationMode::FullTensor,
    };
    let optimizer = match a.optimizer {
        OptimizerArg::Simplex => Optimizer::Simplex {
            initial_step: a.simplex_step,
            tolerance: 1e-8,
        },
        OptimizerArg::Softmax => Optimizer::SoftmaxGradient {
            temperature: a.temperature,
            step: a.learning_rate,
            fd_step: a.fd_step,
        },
    };
    SearchConfig {
        max_degree: a.degree,
        interior_samples: a.interior_samples,
        shell_samples: a.shell_samples,
        optimizer,
        budget: a.budget,
        pd_margin: a.pd_margin,
        initial_scale: a.initial_scale,
        plan,
        ..SearchConfig::new(a.n, mode)
    }
}

fn cmd_seed_search(g: &Global, a: &SearchArgs) -> Outcome<()> {
    let start = Instant::now();
    let config = search_config(a, g.derivative_plan());
    let trace = search(&config, g.seed).map_err(classify)?;
    let mut out = Outputs::new(&g.out).map_err(input)?;
    out.write("trace.csv", trace.to_csv().as_bytes()).map_err(input)?;
    out.write("seed.json", trace.best.to_json().map_err(input)?.as_bytes()).map_err(input)?;
    let per_iteration: Vec<f64> = trace.records.iter().map(|r| r.elapsed_ms).collect();
    out.finish(
        "seed-search",
        &json!({"global": g, "args": a, "config": config}),
        json!({"elapsed_ms": start.elapsed().as_secs_f64() * 1e3, "per_iteration_ms": per_iteration}),
    )
    .map_err(input)?;
    println!(
        "J: {:.6} -> {:.6} over {} evaluations{}",
        trace.records[0].j_current,
        trace.best_objective,
        trace.records.len(),
        if trace.best_objective < 0.0 { " (negative)" } else { "" }
    );
    Ok(())
}

fn cmd_sweep(g: &Global, a: &SweepArgs) -> Outcome<()> {
    let start = Instant::now();
    let plan = g.derivative_plan();
    let text = fs::read_to_string(&a.net)
        .with_context(|| format!("reading {}", a.net.display()))
        .map_err(input)?;
    let net = CoveringNet::from_json(&text).map_err(classify)?;
    let seed = load_seed_metric(&a.seed_metric, net.dimension()).map_err(input)?;
    let d_list = parse_list(&a.d_list).map_err(input)?;
    let s_list = parse_list(&a.s_list).map_err(input)?;
    let grid = SampleGrid::new(net.torus, a.resolution)
        .map_err(classify)?
        .with_anchor_refinement(a.anchor_refinement);
    let result = sweep(&net, &seed, &d_list, &s_list, &grid, &plan).map_err(classify)?;
    let rep = report(&result).map_err(input)?;
    let mut out = Outputs::new(&g.out).map_err(input)?;
    out.write("sweep.json", rep.json.as_bytes()).map_err(input)?;
    out.write("sweep.csv", to_csv(&result).as_bytes()).map_err(input)?;
    out.write("summary.txt", rep.summary.as_bytes()).map_err(input)?;
    out.finish(
        "sweep",
        &json!({"global": g, "args": a}),
        json!({"elapsed_ms": start.elapsed().as_secs_f64() * 1e3}),
    )
    .map_err(input)?;
    print!("{}", rep.summary);
    Ok(())
}

fn cmd_pipeline(g: &Global, a: &PipelineArgs) -> Outcome<()> {
    let start = Instant::now();
    let cfg: PipelineConfig = stage(
        "config",
        fs::read_to_string(&a.config)
            .with_context(|| format!("reading {}", a.config.display()))
            .and_then(|t| parse_config(&t)),
    )?;
    let plan = stage("config", plan_from_names(&cfg.plan, cfg.step, cfg.richardson))?;
    let frames = stage("config", frame_mode(&cfg.frames, cfg.seed))?;
    let mut out = stage("config", Outputs::new(&g.out))?;

    let net = stage(
        "net",
        (|| -> anyhow::Result<CoveringNet> {
            let spec = TorusSpec::new(cfg.n, cfg.side)?;
            let opts = NetOptions {
                frames,
                build_resolution: None,
            };
            let net = build_net_with(&spec, cfg.rho, cfg.seed, &opts)?;
            let res = cfg
                .verify_resolution
                .unwrap_or_else(|| default_verify_resolution(&spec, cfg.rho));
            let net = verify_net(&net, res);
            net.require_valid()?;
            Ok(net)
        })(),
    )?;
    stage("net", net.to_json().map_err(Into::into).and_then(|j| out.write("net.json", j.as_bytes())))?;

    let seed = stage(
        "seed",
        (|| -> anyhow::Result<CandidateSeed> {
            if cfg.seed_metric == "search" {
                let mode = match cfg.search_mode.as_str() {
                    "conformal" => PerturbationMode::Conformal,
                    "full-tensor" => PerturbationMode::FullTensor,
                    other => return Err(anyhow!("unknown search mode '{other}'")),
                };
                let sc = SearchConfig {
                    max_degree: cfg.search_degree,
                    budget: cfg.search_budget,
                    plan,
                    ..SearchConfig::new(cfg.n, mode)
                };
                let trace = search(&sc, cfg.seed)?;
                out.write("trace.csv", trace.to_csv().as_bytes())?;
                Ok(CandidateSeed::from_params(trace.best)?)
            } else {
                load_seed_metric(&cfg.seed_metric, cfg.n)
            }
        })(),
    )?;
    stage("seed", seed.params().to_json().map_err(Into::into).and_then(|j| out.write("seed.json", j.as_bytes())))?;

    let result = stage(
        "sweep",
        (|| -> anyhow::Result<_> {
            let grid = SampleGrid::new(net.torus, cfg.resolution)?.with_anchor_refinement(cfg.anchor_refinement);
            Ok(sweep(&net, &seed, &cfg.d_list, &cfg.s_list, &grid, &plan)?)
        })(),
    )?;
    let rep = stage("report", report(&result).map_err(Into::into))?;
    stage(
        "report",
        (|| -> anyhow::Result<()> {
            out.write("sweep.json", rep.json.as_bytes())?;
            out.write("sweep.csv", to_csv(&result).as_bytes())?;
            out.write("summary.txt", rep.summary.as_bytes())?;
            out.finish(
                "pipeline",
                &json!({"config": cfg, "plan": plan}),
                json!({"elapsed_ms": start.elapsed().as_secs_f64() * 1e3}),
            )?;
            Ok(())
        })(),
    )?;
    print!("{}", rep.summary);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.global.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: cannot configure {w} workers: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Curvature(a) => cmd_curvature(&cli.global, a),
        Command::Net(a) => cmd_net(&cli.global, a),
        Command::SeedSearch(a) => cmd_seed_search(&cli.global, a),
        Command::Sweep(a) => cmd_sweep(&cli.global, a),
        Command::Pipeline(a) => cmd_pipeline(&cli.global, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Input(e) => eprintln!("input error: {e:#}"),
                Failure::Numeric(e) => eprintln!("numeric abort: {e:#}"),
                Failure::Stage(name, e) => eprintln!("stage {name} failed: {e:#}"),
            }
            ExitCode::from(f.code())
        }
    }
}
