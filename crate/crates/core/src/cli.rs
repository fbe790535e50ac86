//! Command-line interface.
//!
//! Every subcommand that writes files also writes a [`RunManifest`] next to
//! them: `DIR/manifest.json` for directory outputs, `<file>.manifest.json`
//! otherwise. Exit codes: 0 success, 1 usage or runtime error, 2 failed
//! validation.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{FpmeError, Result};
use crate::init::InitialCondition;
use crate::io::{load_density, load_kernel, sidecar_path, store_density, store_kernel, KernelSidecar};
use crate::jko::{jko_flow, JkoConfig};
use crate::kernel::{comp_estimate_constant, kernel_matrix, KernelConfig, KernelMatrix};
use crate::means::Nonlinearity;
use crate::oracles::{integrate_semidiscrete, spectral_heat_flow, stable_time_step};
use crate::transport::{solve_distance, SolverConfig};
use crate::validate::{format_table, run_suite, ValidateOptions};
use crate::grid::make_grid;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "FPME_THREADS";

/// Record of one invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Resolved configuration with every default filled in.
    pub config: Value,
    pub kernel: Option<KernelSidecar>,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub exit_status: i32,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

#[derive(Debug, Parser)]
#[command(name = "fpme", version, about = "Non-local transport and fractional porous medium flows on the torus")]
struct Cli {
    /// Treat warnings about the parameter regime as errors.
    #[arg(long, global = true)]
    strict: bool,
    /// Seed for randomized sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Assemble the periodized kernel matrix.
    Kernel(KernelArgs),
    /// Transport distance between two densities, as JSON on standard output.
    Distance(DistanceArgs),
    /// Geodesic snapshots and speed profile between two densities.
    Geodesic(GeodesicArgs),
    /// Minimizing-movement flow.
    Jko(JkoArgs),
    /// Reference solutions.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Run the invariant suite and print a pass/fail table.
    Validate(ValidateArgs),
}

#[derive(Debug, Args, Serialize)]
struct KernelArgs {
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 8)]
    radius: usize,
    /// Drop the integral correction for the truncated lattice tail.
    #[arg(long)]
    no_tail_correction: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct PathArgs {
    #[arg(long)]
    rho0: PathBuf,
    #[arg(long)]
    rho1: PathBuf,
    /// Kernel file written by `fpme kernel`.
    #[arg(long)]
    kernel: PathBuf,
    #[arg(long)]
    m: f64,
    #[arg(long, default_value_t = 16)]
    time_steps: usize,
    /// Newton stopping tolerance on the relative decrement.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
struct DistanceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    path: PathArgs,
    /// Directory for the path snapshots.
    #[arg(long)]
    path_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct GeodesicArgs {
    #[command(flatten)]
    #[serde(flatten)]
    path: PathArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct GridArgs {
    /// uniform, cosine, bump[:WIDTH] or file:PATH.
    #[arg(long, default_value = "cosine")]
    #[serde(serialize_with = "display")]
    init: InitialCondition,
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    radius: usize,
}

#[derive(Debug, Args, Serialize)]
struct JkoArgs {
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridArgs,
    #[arg(long)]
    m: f64,
    #[arg(long)]
    tau: f64,
    #[arg(long)]
    steps: usize,
    /// Time intervals of each inner path.
    #[arg(long, default_value_t = 8)]
    time_steps: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum OracleCommand {
    /// Exact flow of the linear equation by FFT.
    Heat(HeatArgs),
    /// RK4 on the semidiscrete equation.
    Ode(OdeArgs),
}

#[derive(Debug, Args, Serialize)]
struct HeatArgs {
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridArgs,
    #[arg(long)]
    t: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct OdeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridArgs,
    #[arg(long)]
    m: f64,
    #[arg(long)]
    t: f64,
    /// Defaults to a quarter of the stability bound.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ValidateArgs {
    /// Smaller instances.
    #[arg(long)]
    quick: bool,
}

fn display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    configure_threads();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        // a global pool may already exist when called repeatedly in-process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

struct Context {
    start: Instant,
    strict: bool,
}

impl Context {
    fn manifest(&self, command: &str, config: Value, kernel: Option<KernelSidecar>, exit_status: i32) -> RunManifest {
        RunManifest {
            command: command.into(),
            config,
            kernel,
            version: env!("CARGO_PKG_VERSION").into(),
            wall_clock_seconds: self.start.elapsed().as_secs_f64(),
            exit_status,
        }
    }

    /// Warns when `m ≤ m_*`; an error under `--strict`.
    fn check_regime(&self, m: f64, sigma: f64, d: usize) -> Result<()> {
        let nl = Nonlinearity::new(m, sigma, d)?;
        if nl.below_critical() {
            let msg = format!(
                "m = {m} is at or below the critical exponent {} for d = {d}, sigma = {sigma}",
                nl.critical_exponent()
            );
            if self.strict {
                return Err(FpmeError::InvalidConfig(msg));
            }
            eprintln!("warning: {msg}");
        }
        Ok(())
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let ctx = Context {
        start: Instant::now(),
        strict: cli.strict,
    };
    match &cli.command {
        Command::Kernel(a) => kernel_cmd(&ctx, a),
        Command::Distance(a) => distance_cmd(&ctx, a),
        Command::Geodesic(a) => geodesic_cmd(&ctx, a),
        Command::Jko(a) => jko_cmd(&ctx, a),
        Command::Oracle(OracleCommand::Heat(a)) => heat_cmd(&ctx, a),
        Command::Oracle(OracleCommand::Ode(a)) => ode_cmd(&ctx, a),
        Command::Validate(a) => {
            let outcomes = run_suite(&ValidateOptions {
                quick: a.quick,
                seed: cli.seed,
            });
            print!("{}", format_table(&outcomes));
            Ok(if outcomes.iter().all(|o| o.passed) { 0 } else { 2 })
        }
    }
}

/// `<file>.manifest.json`.
fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn sidecar_of(kernel: &KernelMatrix) -> KernelSidecar {
    KernelSidecar {
        sigma: kernel.sigma(),
        radius: kernel.config().truncation_radius,
        tail_correction: kernel.config().tail_correction,
        c_comp_estimate: comp_estimate_constant(kernel),
    }
}

fn kernel_cmd(ctx: &Context, a: &KernelArgs) -> Result<i32> {
    let grid = make_grid(a.dim, a.n)?;
    let cfg = KernelConfig::new(a.radius, !a.no_tail_correction)?;
    let kernel = kernel_matrix(&grid, a.sigma, &cfg)?;
    let meta = store_kernel(&kernel, &a.out)?;
    let config = json!({ "args": a, "kernel": cfg, "sidecar": sidecar_path(&a.out) });
    ctx.manifest("kernel", config, Some(meta), 0).write(&manifest_path(&a.out))?;
    Ok(0)
}

fn solver_config(a: &PathArgs) -> SolverConfig {
    let mut cfg = SolverConfig::default().with_intervals(a.time_steps);
    if let Some(tol) = a.tol {
        cfg.objective_tol = tol;
    }
    if let Some(it) = a.max_iterations {
        cfg.max_iterations = it;
    }
    cfg
}

struct SolvedPath {
    result: crate::transport::TransportResult,
    kernel: KernelMatrix,
    solver: SolverConfig,
}

fn solve_path(ctx: &Context, a: &PathArgs) -> Result<SolvedPath> {
    let rho0 = load_density(&a.rho0)?;
    let rho1 = load_density(&a.rho1)?;
    let kernel = load_kernel(&a.kernel)?;
    ctx.check_regime(a.m, kernel.sigma(), kernel.grid().dim())?;
    let solver = solver_config(a);
    let result = solve_distance(&rho0, &rho1, &kernel, a.m, &solver)?;
    if !result.converged {
        eprintln!(
            "warning: solver stopped after {} iterations without meeting the tolerances (residual {:e})",
            result.iterations, result.constraint_residual
        );
    }
    Ok(SolvedPath { result, kernel, solver })
}

fn write_path(dir: &Path, nodes: &[crate::grid::DensityField]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (k, node) in nodes.iter().enumerate() {
        store_density(node, &dir.join(format!("node_{k:06}.fpme")))?;
    }
    Ok(())
}

fn distance_cmd(ctx: &Context, a: &DistanceArgs) -> Result<i32> {
    let solved = solve_path(ctx, &a.path)?;
    let r = &solved.result;
    let summary = json!({
        "distance": r.distance,
        "objective": r.objective,
        "iterations": r.iterations,
        "constraint_residual": r.constraint_residual,
        "speed_profile": r.speed_profile,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if let Some(dir) = &a.path_out {
        write_path(dir, &r.path.nodes)?;
        let config = json!({ "args": a, "solver": solved.solver });
        ctx.manifest("distance", config, Some(sidecar_of(&solved.kernel)), 0)
            .write(&dir.join("manifest.json"))?;
    }
    Ok(0)
}

fn geodesic_cmd(ctx: &Context, a: &GeodesicArgs) -> Result<i32> {
    let solved = solve_path(ctx, &a.path)?;
    let r = &solved.result;
    write_path(&a.out, &r.path.nodes)?;
    let mut csv = String::from("interval,t_start,t_end,action\n");
    let l = r.speed_profile.len() as f64;
    for (k, v) in r.speed_profile.iter().enumerate() {
        csv.push_str(&format!("{k},{:e},{:e},{v:.17e}\n", k as f64 / l, (k + 1) as f64 / l));
    }
    fs::write(a.out.join("speed_profile.csv"), csv)?;
    let summary = json!({
        "distance": r.distance,
        "flatness": crate::transport::speed_flatness(&r.speed_profile),
        "iterations": r.iterations,
        "constraint_residual": r.constraint_residual,
        "converged": r.converged,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    let config = json!({ "args": a, "solver": solved.solver, "summary": summary });
    ctx.manifest("geodesic", config, Some(sidecar_of(&solved.kernel)), 0)
        .write(&a.out.join("manifest.json"))?;
    Ok(0)
}

fn setup(g: &GridArgs) -> Result<(crate::grid::DensityField, KernelMatrix)> {
    let grid = make_grid(g.dim, g.n)?;
    let rho0 = g.init.build(grid)?;
    let kernel = kernel_matrix(&grid, g.sigma, &KernelConfig::new(g.radius, true)?)?;
    Ok((rho0, kernel))
}

fn jko_cmd(ctx: &Context, a: &JkoArgs) -> Result<i32> {
    ctx.check_regime(a.m, a.grid.sigma, a.grid.dim)?;
    let mut cfg = JkoConfig::new(a.tau, a.steps, a.m);
    cfg.inner.intervals = a.time_steps;
    cfg.validate()?;
    let (rho0, kernel) = setup(&a.grid)?;
    let traj = jko_flow(&rho0, &kernel, &cfg)?;
    traj.write(&a.out)?;
    let status = match &traj.failure {
        Some(msg) => {
            eprintln!("error: flow aborted at {msg}");
            1
        }
        None => 0,
    };
    let config = json!({ "args": a, "jko": cfg, "failure": traj.failure });
    ctx.manifest("jko", config, Some(sidecar_of(&kernel)), status)
        .write(&a.out.join("manifest.json"))?;
    Ok(status)
}

fn heat_cmd(ctx: &Context, a: &HeatArgs) -> Result<i32> {
    let grid = make_grid(a.grid.dim, a.grid.n)?;
    let rho0 = a.grid.init.build(grid)?;
    let out = spectral_heat_flow(&rho0, a.grid.sigma, a.t)?;
    store_density(&out, &a.out)?;
    ctx.manifest("oracle heat", json!({ "args": a }), None, 0)
        .write(&manifest_path(&a.out))?;
    Ok(0)
}

fn ode_cmd(ctx: &Context, a: &OdeArgs) -> Result<i32> {
    ctx.check_regime(a.m, a.grid.sigma, a.grid.dim)?;
    let (rho0, kernel) = setup(&a.grid)?;
    let dt = match a.dt {
        Some(dt) => dt,
        None => stable_time_step(&rho0, a.m, &kernel)? / 4.0,
    };
    let out = integrate_semidiscrete(&rho0, a.m, &kernel, a.t, dt)?;
    store_density(&out, &a.out)?;
    let config = json!({ "args": a, "dt": dt });
    ctx.manifest("oracle ode", config, Some(sidecar_of(&kernel)), 0)
        .write(&manifest_path(&a.out))?;
    Ok(0)
}
