use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use fpctrl::check::{self, FdSweep};
use fpctrl::optimizer::{self, quadratic_growth, sonc_probe, KktReport, StopReason};
use fpctrl::{mass, ControlTrajectory, Problem};
use log::info;
use serde::Serialize;

use crate::config::{FieldValue, PerAxis, ScenarioConfig};
use crate::error::CliError;
use crate::export;

// a closed stdout (e.g. piped into `head`) must not abort a run whose
// results are already on disk
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Debug, Parser)]
#[command(
    name = "fpctrl",
    version,
    about = "Optimal control of Fokker-Planck equations"
)]
struct Cli {
    /// Scenario config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed (overrides `rng_seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Control CSV to use instead of `control.u0`.
    #[arg(long, global = true)]
    control: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Solve the state equation at the configured control.
    SolveForward,
    /// Minimize the reduced cost.
    Optimize,
    /// Finite-difference sweep of the reduced gradient.
    CheckGradient,
    /// Second-difference sweep of the second derivative.
    CheckHessian,
    /// Switching structure at the configured control.
    KktReport,
    /// Critical-cone curvature probe and quadratic-growth fit.
    SoncProbe,
    /// Check the data against the standing assumptions.
    Validate,
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("config: usage: {}", first.trim_start_matches("error: "));
            return 3;
        }
    };
    init_logging();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}

fn init_logging() {
    let level = match std::env::var("FPCTRL_LOG").as_deref() {
        Ok("quiet") => log::LevelFilter::Off,
        Ok("info") => log::LevelFilter::Info,
        Ok("debug") => log::LevelFilter::Debug,
        _ => log::LevelFilter::Warn,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}

struct Context {
    cfg: ScenarioConfig,
    out: PathBuf,
    seed: u64,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("no --config given".into()))?;
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(c) = &cli.control {
        let abs = std::env::current_dir()?.join(c);
        cfg.control.u0 = Some(PerAxis::One(FieldValue::Csv {
            csv: abs,
            column: None,
        }));
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(|d| cfg.base_dir.join(d)))
        .unwrap_or_else(|| PathBuf::from("fpctrl-out"));
    std::fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let ctx = Context {
        seed: cli.seed.unwrap_or(cfg.rng_seed),
        cfg,
        out,
    };
    info!("{:?} -> {}", cli.command, ctx.out.display());
    match cli.command {
        Command::SolveForward => solve_forward(&ctx),
        Command::Optimize => optimize(&ctx),
        Command::CheckGradient => check_gradient(&ctx),
        Command::CheckHessian => check_hessian(&ctx),
        Command::KktReport => kkt(&ctx),
        Command::SoncProbe => sonc(&ctx),
        Command::Validate => validate(&ctx),
    }
}

#[derive(Serialize)]
struct ForwardReport {
    nt: usize,
    n_cells: usize,
    max_mass_deviation: f64,
    min_density: f64,
    max_density: f64,
    cost: f64,
}

fn solve_forward(ctx: &Context) -> Result<(), CliError> {
    let p = ctx.cfg.problem(false)?;
    let u = ctx.cfg.initial_control(&p)?;
    let rho = p.state(&u)?;
    let m0 = mass(&p.ops.mass, &rho, 0)?;
    let mut dev = 0.0f64;
    for k in 0..=p.nt() {
        dev = dev.max((mass(&p.ops.mass, &rho, k)? - m0).abs());
    }
    let report = ForwardReport {
        nt: p.nt(),
        n_cells: p.grid.n_cells(),
        max_mass_deviation: dev,
        min_density: rho.min(),
        max_density: rho.max(),
        cost: p.cost(&rho, &u)?,
    };
    export::write_density(&ctx.path("density.csv"), &p.grid, &rho)?;
    export::write_json(&ctx.path("forward.json"), &report)?;
    say!("max_mass_deviation={}", export::fmt(dev));
    say!("min_density={}", export::fmt(report.min_density));
    Ok(())
}

#[derive(Serialize)]
struct KktJson {
    stationarity_residual: f64,
    complementarity_violation: f64,
    projected_gradient_norm: f64,
    n_lower: usize,
    n_upper: usize,
    n_inactive: usize,
}

impl From<&KktReport<f64>> for KktJson {
    fn from(k: &KktReport<f64>) -> Self {
        Self {
            stationarity_residual: k.stationarity_residual,
            complementarity_violation: k.complementarity_violation,
            projected_gradient_norm: k.projected_gradient_norm,
            n_lower: k.n_lower,
            n_upper: k.n_upper,
            n_inactive: k.n_inactive,
        }
    }
}

#[derive(Serialize)]
struct OptimizeReport {
    method: String,
    stop: String,
    iterations: usize,
    value: f64,
    kkt: KktJson,
}

fn stop_label(s: StopReason) -> &'static str {
    match s {
        StopReason::Converged => "converged",
        StopReason::MaxIterations => "max_iterations",
        StopReason::LineSearchFailed => "line_search_failed",
    }
}

fn optimize(ctx: &Context) -> Result<(), CliError> {
    let config = ctx.cfg.optimizer()?;
    let second = config.method == fpctrl::Method::ProjectedNewtonCg;
    let p = ctx.cfg.problem(second)?;
    let u0 = ctx.cfg.initial_control(&p)?;
    let r = optimizer::solve(&p, &u0, &config)?;
    let rho = p.state(&r.u)?;
    export::write_control(&ctx.path("control.csv"), &r.u, &r.gradient, &r.kkt.classes)?;
    export::write_density(&ctx.path("density.csv"), &p.grid, &rho)?;
    export::write_history(&ctx.path("history.csv"), &r.history)?;
    let report = OptimizeReport {
        method: format!("{:?}", r.method),
        stop: stop_label(r.stop).into(),
        iterations: r.iterations,
        value: r.value,
        kkt: (&r.kkt).into(),
    };
    export::write_json(&ctx.path("report.json"), &report)?;
    say!("stop={} iterations={}", report.stop, r.iterations);
    say!("F={}", export::fmt(r.value));
    say!("pg_norm={}", export::fmt(r.kkt.projected_gradient_norm));
    Ok(())
}

#[derive(Serialize)]
struct SweepJson {
    eps: Vec<f64>,
    max_rel_error: Vec<f64>,
    v_shaped: bool,
}

impl From<&FdSweep<f64>> for SweepJson {
    fn from(s: &FdSweep<f64>) -> Self {
        Self {
            eps: s.eps.clone(),
            max_rel_error: s.max_rel_error.clone(),
            v_shaped: s.is_v_shaped(),
        }
    }
}

#[derive(Serialize)]
struct GradientCheckReport {
    directions: usize,
    seed: u64,
    reference_eps: f64,
    max_rel_error: f64,
    sweep: SweepJson,
}

fn check_gradient(ctx: &Context) -> Result<(), CliError> {
    let p = ctx.cfg.problem(false)?;
    let u = ctx.cfg.initial_control(&p)?;
    let c = &ctx.cfg.check;
    let dirs = check::random_directions(&p, c.directions, ctx.seed);
    let mut eps = c.eps.clone();
    if !eps.contains(&c.reference_eps) {
        eps.push(c.reference_eps);
    }
    let sweep = check::gradient_sweep(&p, &u, &dirs, &eps)?;
    let at_ref = sweep.at(c.reference_eps).unwrap_or(f64::NAN);
    for (e, r) in sweep.eps.iter().zip(&sweep.max_rel_error) {
        say!("eps={} max_rel_error={}", export::fmt(*e), export::fmt(*r));
    }
    say!(
        "max_rel_error={} at eps={}",
        export::fmt(at_ref),
        export::fmt(c.reference_eps)
    );
    export::write_json(
        &ctx.path("gradient_check.json"),
        &GradientCheckReport {
            directions: dirs.len(),
            seed: ctx.seed,
            reference_eps: c.reference_eps,
            max_rel_error: at_ref,
            sweep: (&sweep).into(),
        },
    )
}

#[derive(Serialize)]
struct HessianCheckReport {
    directions: usize,
    seed: u64,
    symmetry_rel_error: f64,
    sweep: SweepJson,
}

fn check_hessian(ctx: &Context) -> Result<(), CliError> {
    let p = ctx.cfg.problem(false)?;
    let u = ctx.cfg.initial_control(&p)?;
    let c = &ctx.cfg.check;
    let dirs = check::random_directions(&p, c.directions, ctx.seed);
    let sweep = check::hessian_sweep(&p, &u, &dirs, &c.hessian_eps)?;
    let sym = check::hessian_symmetry(&p, &u, &dirs)?;
    for (e, r) in sweep.eps.iter().zip(&sweep.max_rel_error) {
        say!("eps={} max_rel_error={}", export::fmt(*e), export::fmt(*r));
    }
    say!("symmetry_rel_error={}", export::fmt(sym));
    export::write_json(
        &ctx.path("hessian_check.json"),
        &HessianCheckReport {
            directions: dirs.len(),
            seed: ctx.seed,
            symmetry_rel_error: sym,
            sweep: (&sweep).into(),
        },
    )
}

fn evaluation_point(ctx: &Context, p: &Problem) -> Result<ControlTrajectory, CliError> {
    let u = ctx.cfg.initial_control(p)?;
    let projected = optimizer::project(&u, &p.u_min, &p.u_max);
    if projected != u {
        return Err(CliError::Validation("control violates the bounds".into()));
    }
    Ok(u)
}

fn kkt(ctx: &Context) -> Result<(), CliError> {
    let config = ctx.cfg.optimizer()?;
    let p = ctx.cfg.problem(false)?;
    let u = evaluation_point(ctx, &p)?;
    let lin = p.linearize(&u)?;
    let r = optimizer::kkt_report(&p, &u, config.active_tol)?;
    export::write_control(&ctx.path("control.csv"), &u, &lin.gradient, &r.classes)?;
    export::write_json(&ctx.path("kkt.json"), &KktJson::from(&r))?;
    say!(
        "stationarity_residual={}",
        export::fmt(r.stationarity_residual)
    );
    say!(
        "complementarity_violation={}",
        export::fmt(r.complementarity_violation)
    );
    say!(
        "projected_gradient_norm={}",
        export::fmt(r.projected_gradient_norm)
    );
    Ok(())
}

#[derive(Serialize)]
struct SoncJson {
    seed: u64,
    samples: usize,
    degenerate: bool,
    free_entries: usize,
    /// `[threshold, free_entries]` pairs around the configured threshold.
    threshold_sensitivity: Vec<(f64, usize)>,
    min_value: Option<f64>,
    growth_samples: usize,
    growth_eps: f64,
    delta_hat: Option<f64>,
}

fn sonc(ctx: &Context) -> Result<(), CliError> {
    let config = ctx.cfg.optimizer()?;
    let p = ctx.cfg.problem(true)?;
    let u = evaluation_point(ctx, &p)?;
    let s = &ctx.cfg.sonc;
    let probe = sonc_probe(&p, &u, s.samples, ctx.seed, &config)?;
    let growth = quadratic_growth(&p, &u, s.growth_samples, s.growth_eps, ctx.seed)?;
    let finite = |x: f64| x.is_finite().then_some(x);
    let report = SoncJson {
        seed: ctx.seed,
        samples: s.samples,
        degenerate: probe.degenerate,
        free_entries: probe.free_entries,
        threshold_sensitivity: probe.threshold_sensitivity.clone(),
        min_value: finite(probe.min_value),
        growth_samples: s.growth_samples,
        growth_eps: s.growth_eps,
        delta_hat: finite(growth.delta_hat),
    };
    export::write_json(&ctx.path("sonc.json"), &report)?;
    say!("degenerate={}", probe.degenerate);
    say!("min_value={}", export::fmt(probe.min_value));
    say!("delta_hat={}", export::fmt(growth.delta_hat));
    Ok(())
}

#[derive(Serialize)]
struct ValidateReport {
    mass_before: f64,
    renormalized: bool,
    control_boundary_ok: bool,
    control_boundary_violation: f64,
    drift_boundary_ok: bool,
    drift_boundary_violation: f64,
    gamma_positive: Option<bool>,
    warnings: Vec<String>,
}

fn validate(ctx: &Context) -> Result<(), CliError> {
    let spec = ctx.cfg.spec()?;
    let disc = ctx.cfg.discretization(true)?;
    let grid = fpctrl::Grid::new(&spec.extent, &disc.cells)?;
    let a = fpctrl::validate_assumptions(&spec, &grid, true)?;
    // full construction catches the remaining issues (bounds, targets)
    ctx.cfg.problem(true)?;
    let flag = |ok: bool| if ok { "ok" } else { "failed" };
    say!("mass_before={}", export::fmt(a.mass_before));
    say!(
        "control_boundary={} max_violation={}",
        flag(a.control_boundary_ok),
        export::fmt(a.control_boundary_violation)
    );
    say!(
        "drift_boundary={} max_violation={}",
        flag(a.drift_boundary_ok),
        export::fmt(a.drift_boundary_violation)
    );
    say!("gamma_positive={}", flag(a.gamma_positive.unwrap_or(true)));
    export::write_json(
        &ctx.path("assumptions.json"),
        &ValidateReport {
            mass_before: a.mass_before,
            renormalized: a.renormalized,
            control_boundary_ok: a.control_boundary_ok,
            control_boundary_violation: a.control_boundary_violation,
            drift_boundary_ok: a.drift_boundary_ok,
            drift_boundary_violation: a.drift_boundary_violation,
            gamma_positive: a.gamma_positive,
            warnings: a.warnings,
        },
    )
}
