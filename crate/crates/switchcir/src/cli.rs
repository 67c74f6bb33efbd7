//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for usage, configuration or validation
//! errors, 2 when a numerical method fails to converge (outputs written up
//! to that point are kept and listed in the manifest).

use std::ffi::OsString;
use std::fmt;
use std::io;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use switchcir_core::action::{minimize_action, nisio_value, PathDiscretization};
use switchcir_core::averaging::{limit_ode, stationary, stationary_residual};
use switchcir_core::lagrangian::legendre;
use switchcir_core::model::{linear_grid, log_grid, validate};
use switchcir_core::sim::{SimConfig, Simulator};
use switchcir_core::spectral::{dv_functional, gradient_from_eval, hamiltonian};
use switchcir_core::stats::log_log_slope;
use switchcir_core::{Error, ModelSpec};

use crate::config::{self, ConfigError, LoadedConfig};
use crate::ensemble::ensemble;
use crate::ldp::{averaging_error_curve, verify_log_laplace, verify_tube, LdpReport, McSettings};
use crate::output::{run_id, unix_now, Cell, RunManifest, RunOutput};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SWITCHCIR_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "switchcir-out";
/// Tolerance for `I(x, π^x)` in `dv-check`.
pub const DV_CHECK_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "switchcir", version, about = "Regime-switching CIR: spectral Hamiltonian, action and Monte Carlo checks")]
pub struct Cli {
    /// Model configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: $SWITCHCIR_OUT_DIR or ./switchcir-out].
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for Monte Carlo and grids; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Downgrade Feller-condition violations to warnings.
    #[arg(long, global = true)]
    pub allow_nonfeller: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Check the model invariants.
    Validate,
    /// Simulate paths; writes trajectory.csv and, for several paths, ensemble.csv.
    Simulate(SimulateArgs),
    /// H, its gradient and solver diagnostics on an (x, p) grid.
    HamiltonianGrid(HamiltonianGridArgs),
    /// L and the maximizing momentum on an (x, v) grid.
    LagrangianGrid(LagrangianGridArgs),
    /// Stationary law of the fast chain on a log-spaced x grid.
    Stationary(StationaryArgs),
    /// Averaged limit ODE.
    LimitOde(LimitOdeArgs),
    /// Fixed-endpoint minimum-action path.
    OptimalPath(OptimalPathArgs),
    /// Variational semigroup value for f(y) = -(y - target)^2.
    Nisio(NisioArgs),
    /// Mean sup-distance of simulated paths from the limit ODE along an n ladder.
    VerifyAveraging(VerifyAveragingArgs),
    /// Monte Carlo log-Laplace or tube-rate estimates against their limits.
    VerifyLdp(VerifyLdpArgs),
    /// Donsker-Varadhan functional at the stationary law on an x grid.
    DvCheck(DvCheckArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Simulate(_) => "simulate",
            Command::HamiltonianGrid(_) => "hamiltonian-grid",
            Command::LagrangianGrid(_) => "lagrangian-grid",
            Command::Stationary(_) => "stationary",
            Command::LimitOde(_) => "limit-ode",
            Command::OptimalPath(_) => "optimal-path",
            Command::Nisio(_) => "nisio",
            Command::VerifyAveraging(_) => "verify-averaging",
            Command::VerifyLdp(_) => "verify-ldp",
            Command::DvCheck(_) => "dv-check",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    pub n: u64,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 1.0)]
    pub x0: f64,
    /// Initial regime, 1-based.
    #[arg(long, default_value_t = 1)]
    pub regime0: usize,
    #[arg(long, default_value_t = 1)]
    pub paths: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct HamiltonianGridArgs {
    #[arg(long, default_value_t = 0.2)]
    pub x_lo: f64,
    #[arg(long, default_value_t = 5.0)]
    pub x_hi: f64,
    #[arg(long, default_value_t = 50)]
    pub x_count: usize,
    #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
    pub p_lo: f64,
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    pub p_hi: f64,
    #[arg(long, default_value_t = 50)]
    pub p_count: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct LagrangianGridArgs {
    #[arg(long, default_value_t = 0.2)]
    pub x_lo: f64,
    #[arg(long, default_value_t = 5.0)]
    pub x_hi: f64,
    #[arg(long, default_value_t = 20)]
    pub x_count: usize,
    #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
    pub v_lo: f64,
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    pub v_hi: f64,
    #[arg(long, default_value_t = 20)]
    pub v_count: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct StationaryArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub x_lo: f64,
    #[arg(long, default_value_t = 1e3)]
    pub x_hi: f64,
    #[arg(long, default_value_t = 25)]
    pub count: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct LimitOdeArgs {
    #[arg(long, default_value_t = 1.0)]
    pub x0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct OptimalPathArgs {
    #[arg(long, default_value_t = 1.0)]
    pub x_start: f64,
    /// Endpoint; defaults to the flow endpoint plus `--displacement`.
    #[arg(long)]
    pub x_end: Option<f64>,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub displacement: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 40)]
    pub segments: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct NisioArgs {
    #[arg(long, default_value_t = 1.0)]
    pub x0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 40)]
    pub segments: usize,
    /// Centre of the terminal reward; defaults to the flow endpoint plus `--offset`.
    #[arg(long)]
    pub target: Option<f64>,
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    pub offset: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyAveragingArgs {
    #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
    pub ladder: Vec<u64>,
    #[arg(long, default_value_t = 1000)]
    pub paths: u64,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 1.0)]
    pub x0: f64,
    #[arg(long, default_value_t = 1)]
    pub regime0: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LdpMode {
    /// (1/n) log E exp(n f(X_n(T))) against the variational semigroup.
    Laplace,
    /// -(1/n) log P(stay in a tube) against the action of the tube centre.
    Tube,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyLdpArgs {
    #[arg(long, value_enum, default_value_t = LdpMode::Laplace)]
    pub mode: LdpMode,
    /// Defaults: 50,100,200,400 (laplace) or 50,100,200 (tube).
    #[arg(long, value_delimiter = ',')]
    pub ladder: Option<Vec<u64>>,
    /// Defaults: 1000 (laplace) or 10000 (tube).
    #[arg(long)]
    pub paths: Option<u64>,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 1.0)]
    pub x0: f64,
    #[arg(long, default_value_t = 1)]
    pub regime0: usize,
    #[arg(long, default_value_t = 20)]
    pub segments: usize,
    /// Laplace: target = flow endpoint + offset.
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    pub offset: f64,
    /// Tube: centre path ends at flow endpoint + displacement.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub displacement: f64,
    /// Tube radius.
    #[arg(long, default_value_t = 0.2)]
    pub delta: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct DvCheckArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub x_lo: f64,
    #[arg(long, default_value_t = 1e3)]
    pub x_hi: f64,
    #[arg(long, default_value_t = 25)]
    pub count: usize,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(ConfigError),
    Model(Error),
    Io(io::Error),
    /// Outputs were written but a numerical method did not converge.
    Convergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Convergence(_) | CliError::Model(Error::NonConvergence { .. } | Error::Singular) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Model(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o: {e}"),
            CliError::Convergence(m) => write!(f, "did not converge: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Model(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(|| execute_in_pool(cli)),
        None => execute_in_pool(cli),
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn execute_in_pool(cli: &Cli) -> Result<(), CliError> {
    let started = unix_now();
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let loaded = config::load(path, cli.allow_nonfeller).map_err(CliError::Config)?;
    let version = env!("CARGO_PKG_VERSION");
    let mut parameters = serde_json::to_value(&cli.command).map_err(|e| CliError::Usage(e.to_string()))?;
    if cli.allow_nonfeller {
        parameters = serde_json::json!({ "command": parameters, "allow_nonfeller": true });
    }
    let id = run_id(version, cli.command.name(), &parameters, Some(&loaded.sha256), cli.seed);
    let mut out = RunOutput::create(out_dir(cli), id.clone())?;

    let status = dispatch(cli, &loaded, &mut out);

    let manifest = RunManifest {
        run_id: id,
        version: version.into(),
        command: cli.command.name().into(),
        parameters,
        config: Some(loaded.path.display().to_string()),
        config_sha256: Some(loaded.sha256.clone()),
        seed: cli.seed,
        threads: cli.threads,
        started_unix: started,
        finished_unix: unix_now(),
        outputs: out.outputs.clone(),
    };
    out.write_manifest(&manifest)?;
    status
}

fn regime_index(spec: &ModelSpec, one_based: usize) -> Result<usize, CliError> {
    if one_based == 0 || one_based > spec.n_regimes() {
        return Err(CliError::Usage(format!(
            "regime {one_based} out of range 1..={}",
            spec.n_regimes()
        )));
    }
    Ok(one_based - 1)
}

fn dispatch(cli: &Cli, loaded: &LoadedConfig, out: &mut RunOutput) -> Result<(), CliError> {
    let spec = &loaded.spec;
    match &cli.command {
        Command::Validate => cmd_validate(spec, out),
        Command::Simulate(a) => cmd_simulate(spec, a, cli.seed, out),
        Command::HamiltonianGrid(a) => cmd_hamiltonian_grid(spec, a, out),
        Command::LagrangianGrid(a) => cmd_lagrangian_grid(spec, a, out),
        Command::Stationary(a) => cmd_stationary(spec, a, out),
        Command::LimitOde(a) => cmd_limit_ode(spec, a, out),
        Command::OptimalPath(a) => cmd_optimal_path(spec, a, out),
        Command::Nisio(a) => cmd_nisio(spec, a, out),
        Command::VerifyAveraging(a) => cmd_verify_averaging(spec, a, cli.seed, out),
        Command::VerifyLdp(a) => cmd_verify_ldp(spec, a, cli.seed, out),
        Command::DvCheck(a) => cmd_dv_check(spec, a, out),
    }
}

fn cmd_validate(spec: &ModelSpec, out: &mut RunOutput) -> Result<(), CliError> {
    let report = validate(spec);
    let mut rows = Vec::new();
    for (severity, list) in [("error", &report.errors), ("warning", &report.warnings)] {
        for v in list {
            rows.push(vec![Cell::from(severity), Cell::from(v.key()), Cell::Text(v.to_string())]);
        }
    }
    out.csv("validation.csv", &["severity", "key", "message"], &rows)?;
    println!(
        "valid: {} regimes, {} warning(s)",
        spec.n_regimes(),
        report.warnings.len()
    );
    print!("{}", report.summary());
    Ok(())
}

fn cmd_simulate(spec: &ModelSpec, a: &SimulateArgs, seed: u64, out: &mut RunOutput) -> Result<(), CliError> {
    if a.paths == 0 {
        return Err(CliError::Usage("--paths must be at least 1".into()));
    }
    let cfg = SimConfig { n: a.n, t_end: a.t_end, dt: a.dt, x0: a.x0, regime0: regime_index(spec, a.regime0)? };
    let sim = Simulator::new(spec, cfg)?;
    let traj = sim.path(seed, 0);
    let rows: Vec<Vec<Cell>> = traj
        .times
        .iter()
        .zip(&traj.x)
        .zip(&traj.regime)
        .map(|((t, x), r)| vec![Cell::from(*t), Cell::from(*x), Cell::from(r + 1)])
        .collect();
    out.csv("trajectory.csv", &["t", "x", "regime"], &rows)?;
    println!("trajectory: {} steps, dt = {:e}, clamped steps {}", sim.steps(), sim.dt(), traj.clamped_steps);
    if a.paths > 1 {
        let summary = ensemble(&sim, seed, a.paths);
        let rows: Vec<Vec<Cell>> = summary
            .times
            .iter()
            .zip(&summary.moments)
            .map(|(t, m)| vec![Cell::from(*t), Cell::from(m.mean), Cell::from(m.variance()), Cell::from(m.count)])
            .collect();
        out.csv("ensemble.csv", &["t", "mean_x", "var_x", "n_paths"], &rows)?;
        let total = summary.n_paths as f64 * sim.steps() as f64;
        println!("ensemble: {} paths, clamped fraction {:e}", a.paths, summary.clamped_steps as f64 / total);
    }
    Ok(())
}

fn grid_count(count: usize, what: &str) -> Result<(), CliError> {
    if count < 2 {
        return Err(CliError::Usage(format!("{what} needs at least 2 points")));
    }
    Ok(())
}

fn cmd_hamiltonian_grid(spec: &ModelSpec, a: &HamiltonianGridArgs, out: &mut RunOutput) -> Result<(), CliError> {
    grid_count(a.x_count, "x grid")?;
    grid_count(a.p_count, "p grid")?;
    let xs = linear_grid(a.x_lo, a.x_hi, a.x_count);
    let ps = linear_grid(a.p_lo, a.p_hi, a.p_count);
    let points: Vec<(f64, f64)> = xs.iter().flat_map(|&x| ps.iter().map(move |&p| (x, p))).collect();
    let rows = points
        .par_iter()
        .map(|&(x, p)| {
            let eval = hamiltonian(spec, x, p)?;
            let g = gradient_from_eval(spec, x, p, &eval);
            Ok(vec![
                Cell::from(x),
                Cell::from(p),
                Cell::from(eval.value),
                Cell::from(g.d_dx),
                Cell::from(g.d_dp),
                Cell::from(eval.iterations),
                Cell::from(eval.residual),
            ])
        })
        .collect::<Result<Vec<_>, Error>>()?;
    out.csv("hamiltonian_grid.csv", &["x", "p", "H", "dHdx", "dHdp", "iters", "residual"], &rows)?;
    println!("hamiltonian grid: {} points", rows.len());
    Ok(())
}

fn cmd_lagrangian_grid(spec: &ModelSpec, a: &LagrangianGridArgs, out: &mut RunOutput) -> Result<(), CliError> {
    grid_count(a.x_count, "x grid")?;
    grid_count(a.v_count, "v grid")?;
    let xs = linear_grid(a.x_lo, a.x_hi, a.x_count);
    let vs = linear_grid(a.v_lo, a.v_hi, a.v_count);
    let points: Vec<(f64, f64)> = xs.iter().flat_map(|&x| vs.iter().map(move |&v| (x, v))).collect();
    let evals = points
        .par_iter()
        .map(|&(x, v)| legendre(spec, x, v))
        .collect::<Result<Vec<_>, Error>>()?;
    let rows: Vec<Vec<Cell>> = points
        .iter()
        .zip(&evals)
        .map(|(&(x, v), l)| vec![Cell::from(x), Cell::from(v), Cell::from(l.value), Cell::from(l.p_star)])
        .collect();
    out.csv("lagrangian_grid.csv", &["x", "v", "L", "p_star"], &rows)?;
    let failed = evals.iter().filter(|l| l.reachable && !l.converged).count();
    println!("lagrangian grid: {} points", rows.len());
    if failed > 0 {
        return Err(CliError::Convergence(format!("{failed} Legendre evaluations")));
    }
    Ok(())
}

fn cmd_stationary(spec: &ModelSpec, a: &StationaryArgs, out: &mut RunOutput) -> Result<(), CliError> {
    grid_count(a.count, "x grid")?;
    let n = spec.n_regimes();
    let mut header = vec!["x".to_owned()];
    header.extend((1..=n).map(|i| format!("pi_{i}")));
    let mut rows = Vec::new();
    for x in log_grid(a.x_lo, a.x_hi, a.count) {
        let pi = stationary(spec, x)?;
        let mut row = vec![Cell::from(x)];
        row.extend(pi.probs().iter().map(|&p| Cell::from(p)));
        rows.push(row);
    }
    out.csv("stationary.csv", &header, &rows)?;
    println!("stationary: {} points", rows.len());
    Ok(())
}

fn cmd_limit_ode(spec: &ModelSpec, a: &LimitOdeArgs, out: &mut RunOutput) -> Result<(), CliError> {
    let flow = limit_ode(spec, a.x0, a.t_end, a.dt)?;
    let rows: Vec<Vec<Cell>> = flow.times.iter().zip(&flow.xbar).map(|(t, x)| vec![Cell::from(*t), Cell::from(*x)]).collect();
    out.csv("limit_ode.csv", &["t", "xbar"], &rows)?;
    println!("limit ODE: xbar({}) = {}, internal dt {:e}", a.t_end, flow.endpoint(), flow.internal_dt);
    Ok(())
}

fn path_rows(path: &PathDiscretization, per_segment: &[f64]) -> Vec<Vec<Cell>> {
    path.times()
        .iter()
        .zip(path.nodes())
        .enumerate()
        .map(|(k, (t, g))| {
            let seg = per_segment.get(k).map(|&s| Cell::from(s)).unwrap_or(Cell::Empty);
            vec![Cell::from(*t), Cell::from(*g), seg]
        })
        .collect()
}

fn cmd_optimal_path(spec: &ModelSpec, a: &OptimalPathArgs, out: &mut RunOutput) -> Result<(), CliError> {
    let x_end = match a.x_end {
        Some(x) => x,
        None => limit_ode(spec, a.x_start, a.t_end, a.t_end / a.segments.max(1) as f64)?.endpoint() + a.displacement,
    };
    let (path, result) = minimize_action(spec, a.x_start, x_end, a.t_end, a.segments, None)?;
    out.csv("optimal_path.csv", &["t", "gamma", "segment_action"], &path_rows(&path, &result.per_segment))?;
    println!(
        "minimum action {} from {} to {} over T = {} ({} iterations)",
        result.action, a.x_start, x_end, a.t_end, result.iterations
    );
    if !result.converged {
        return Err(CliError::Convergence(format!("minimum-action optimizer after {} iterations", result.iterations)));
    }
    Ok(())
}

fn cmd_nisio(spec: &ModelSpec, a: &NisioArgs, out: &mut RunOutput) -> Result<(), CliError> {
    let target = match a.target {
        Some(t) => t,
        None => limit_ode(spec, a.x0, a.t_end, a.t_end / a.segments.max(1) as f64)?.endpoint() + a.offset,
    };
    let r = nisio_value(spec, |y| -(y - target) * (y - target), a.x0, a.t_end, a.segments)?;
    let per = switchcir_core::action::action(spec, &r.path)?.per_segment;
    out.csv("nisio_path.csv", &["t", "gamma", "segment_action"], &path_rows(&r.path, &per))?;
    let endpoint = *r.path.nodes().last().unwrap_or(&a.x0);
    out.csv(
        "nisio.csv",
        &["x0", "t_end", "target", "value", "action", "endpoint"],
        &[vec![
            Cell::from(a.x0),
            Cell::from(a.t_end),
            Cell::from(target),
            Cell::from(r.value),
            Cell::from(r.action),
            Cell::from(endpoint),
        ]],
    )?;
    println!("V(T)f(x0) = {} (action {}, endpoint {})", r.value, r.action, endpoint);
    if !r.converged {
        return Err(CliError::Convergence(format!("semigroup optimizer after {} iterations", r.iterations)));
    }
    Ok(())
}

fn report_rows(report: &LdpReport) -> Vec<Vec<Cell>> {
    let gaps = report.gaps();
    (0..report.n_ladder.len())
        .map(|k| {
            vec![
                Cell::from(report.n_ladder[k]),
                Cell::from(report.estimates[k]),
                Cell::from(report.stderrs[k]),
                Cell::from(report.analytic[k]),
                Cell::from(gaps[k]),
            ]
        })
        .collect()
}

const REPORT_HEADER: [&str; 5] = ["n", "estimate", "stderr", "analytic", "gap"];

fn cmd_verify_averaging(spec: &ModelSpec, a: &VerifyAveragingArgs, seed: u64, out: &mut RunOutput) -> Result<(), CliError> {
    let settings = McSettings {
        t_end: a.t_end,
        dt: a.dt,
        x0: a.x0,
        regime0: regime_index(spec, a.regime0)?,
        n_paths: a.paths,
        seed,
    };
    let report = averaging_error_curve(spec, &a.ladder, &settings)?;
    out.csv("averaging.csv", &REPORT_HEADER, &report_rows(&report))?;
    let n: Vec<f64> = report.n_ladder.iter().map(|&n| n as f64).collect();
    println!("averaging error trend: {:?}, log-log slope {:.3}", report.trend, log_log_slope(&n, &report.estimates));
    Ok(())
}

fn cmd_verify_ldp(spec: &ModelSpec, a: &VerifyLdpArgs, seed: u64, out: &mut RunOutput) -> Result<(), CliError> {
    let regime0 = regime_index(spec, a.regime0)?;
    let flow_end = limit_ode(spec, a.x0, a.t_end, a.t_end / a.segments.max(1) as f64)?.endpoint();
    match a.mode {
        LdpMode::Laplace => {
            let ladder = a.ladder.clone().unwrap_or_else(|| vec![50, 100, 200, 400]);
            let settings = McSettings { t_end: a.t_end, dt: a.dt, x0: a.x0, regime0, n_paths: a.paths.unwrap_or(1000), seed };
            let report = verify_log_laplace(spec, &ladder, &settings, flow_end + a.offset, a.segments)?;
            out.csv("ldp_laplace.csv", &REPORT_HEADER, &report_rows(&report))?;
            println!(
                "log-Laplace gap trend: {:?}, rank correlation with n {:.3}",
                report.trend,
                report.gap_rank_correlation()
            );
        }
        LdpMode::Tube => {
            let ladder = a.ladder.clone().unwrap_or_else(|| vec![50, 100, 200]);
            let settings = McSettings { t_end: a.t_end, dt: a.dt, x0: a.x0, regime0, n_paths: a.paths.unwrap_or(10_000), seed };
            let (gamma, result) = minimize_action(spec, a.x0, flow_end + a.displacement, a.t_end, a.segments, None)?;
            if !result.converged {
                return Err(CliError::Convergence("tube centre path optimization".into()));
            }
            let (report, tubes) = verify_tube(spec, &ladder, &gamma, a.delta, &settings)?;
            out.csv("ldp_tube.csv", &REPORT_HEADER, &report_rows(&report))?;
            for (n, t) in report.n_ladder.iter().zip(&tubes) {
                let bound = if t.rate_is_lower_bound { " (no hits: lower bound)" } else { "" };
                println!("n = {n}: hits {}/{}, rate {}{bound}", t.hits, t.n_paths, t.rate);
            }
            println!("action of tube centre {}, trend of |rate - action|: {:?}", result.action, report.trend);
        }
    }
    Ok(())
}

fn cmd_dv_check(spec: &ModelSpec, a: &DvCheckArgs, out: &mut RunOutput) -> Result<(), CliError> {
    grid_count(a.count, "x grid")?;
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for x in log_grid(a.x_lo, a.x_hi, a.count) {
        let pi = stationary(spec, x)?;
        let i = dv_functional(spec, x, &pi)?;
        worst = worst.max(i);
        rows.push(vec![Cell::from(x), Cell::from(i), Cell::from(stationary_residual(spec, x, &pi))]);
    }
    out.csv("dv_check.csv", &["x", "dv_stationary", "stationary_residual"], &rows)?;
    println!("max I(x, pi^x) = {worst:e}");
    if worst > DV_CHECK_TOL {
        return Err(CliError::Convergence(format!("I(x, pi^x) = {worst:e} exceeds {DV_CHECK_TOL:e}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let nc = Error::NonConvergence { what: "x", iterations: 1, residual: 1.0 };
        assert_eq!(CliError::Model(nc).exit_code(), 2);
        assert_eq!(CliError::Model(Error::Singular).exit_code(), 2);
        assert_eq!(CliError::Convergence("x".into()).exit_code(), 2);
        assert_eq!(CliError::Model(Error::InvalidArgument("x")).exit_code(), 1);
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
    }
}
