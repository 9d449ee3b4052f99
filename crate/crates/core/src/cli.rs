//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure,
//! 3 a computed quantity exceeded its bound beyond the declared slack.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::bernstein::{
    decay_of_exponent, exp_decay_integral, geometric_grid, verify_complete_monotonicity, BernsteinSpec,
    IntegratedExponent, MonotonicityVerdict,
};
use crate::bounds::{self, BoundReport};
use crate::criteria::{
    ergodicity_criterion, heat_equation_threshold, levy_in_h_criterion, state_space_criterion, CriterionOptions,
    CriterionReport, Verdict,
};
use crate::density::{compute_density, fisher_integral, gradient_norm_1d, tv_distance_1d, DensityOptions, StableExponent};
use crate::error::Error;
use crate::experiments::{self, Format, RunReport, ScenarioConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "levy-ou", version, about = "OU processes driven by cylindrical Lévy noise: criteria, bounds and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Number of modes: truncation for simulation and densities, enumeration
    /// limit for criteria and sup scans.
    #[arg(long, global = true)]
    modes: Option<usize>,
    #[arg(long, short, global = true)]
    quiet: bool,
    /// Also write per-mode dumps.
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Series criteria for the configured spectrum.
    Criteria,
    /// A_t and C_t constants on the time grid.
    Bounds,
    /// Density of one mode's noise part on the time grid.
    Density {
        /// 1-based mode index.
        #[arg(long, default_value_t = 1)]
        mode: usize,
    },
    /// Total variation between two starting points against 2 C_t |x - y|.
    TvDecay,
    /// One-mode gradient norms against A_t and C_t.
    GradientCheck,
    /// Distance to the invariant law against the ergodicity bound.
    Ergodicity,
    /// Heat-equation phase diagram.
    Sweep,
    /// Quick internal consistency suite.
    Selftest,
}

struct Ctx {
    cfg: ScenarioConfig,
    dir: PathBuf,
    format: Format,
    quiet: bool,
    verbose: bool,
}

impl Ctx {
    fn say(&self, msg: &str) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    fn emit(&self, report: &RunReport) -> Result<i32, Error> {
        let files = report.write(&self.dir, self.format)?;
        let violations = report.violations();
        let disagreements = report.disagreements();
        self.say(&format!(
            "{}: {} rows, {} violations, wrote {}",
            report.experiment,
            report.rows.len() + report.phase.len(),
            violations.len() + disagreements.len(),
            files[0].display()
        ));
        for r in &violations {
            eprintln!(
                "bound violated: t={} mode={:?} {} = {} > {} + {}",
                r.t, r.mode, r.quantity, r.value, r.bound, r.slack
            );
        }
        for c in &disagreements {
            eprintln!("threshold disagreement: d={} alpha={} beta={}", c.d, c.alpha, c.beta);
        }
        Ok(if violations.is_empty() && disagreements.is_empty() {
            EXIT_OK
        } else {
            EXIT_VIOLATION
        })
    }

    fn options(&self) -> CriterionOptions {
        CriterionOptions {
            n_max: self.cfg.n_max,
            tol: self.cfg.tolerances.criterion_tol,
        }
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidSpec(_) | Error::InvalidInput(_) | Error::Json(_) | Error::Unsupported(_) => {
            EXIT_CONFIG
        }
        _ => EXIT_NUMERIC,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig, Error> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config <path> is required for this command".into()))?;
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(n) = cli.modes {
        cfg.truncation_n = n;
        cfg.n_max = n.max(10);
        cfg.k_max = n.max(1);
    }
    if let Some(f) = cli.format {
        cfg.output.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<i32, Error> {
    if matches!(cli.command, Command::Selftest) {
        return Ok(selftest(cli.quiet));
    }
    let cfg = load_config(&cli)?;
    let ctx = Ctx {
        dir: cfg.output.dir.clone(),
        format: cfg.output.format,
        quiet: cli.quiet,
        verbose: cli.verbose,
        cfg,
    };
    match cli.command {
        Command::Criteria => criteria(&ctx),
        Command::Bounds => bounds_cmd(&ctx),
        Command::Density { mode } => density(&ctx, mode),
        Command::TvDecay => ctx.emit(&experiments::run_tv_decay(&ctx.cfg)?),
        Command::GradientCheck => ctx.emit(&experiments::run_gradient_check(&ctx.cfg)?),
        Command::Ergodicity => {
            let a = ctx.emit(&experiments::run_ergodicity(&ctx.cfg)?)?;
            let b = if ctx.cfg.mc_replicates >= 2 {
                ctx.emit(&experiments::run_moment_check(&ctx.cfg)?)?
            } else {
                EXIT_OK
            };
            Ok(a.max(b))
        }
        Command::Sweep => {
            let grid = ctx
                .cfg
                .sweep
                .clone()
                .ok_or_else(|| Error::Config("sweep: the configuration has no sweep grid".into()))?;
            ctx.emit(&experiments::run_membership_sweep(&grid, &ctx.cfg)?)
        }
        Command::Selftest => unreachable!("handled above"),
    }
}

fn header(ctx: &Ctx, what: &str) -> String {
    format!(
        "# experiment: {what}\n# config_sha256: {}\n# version: {}\n",
        ctx.cfg.sha256(),
        env!("CARGO_PKG_VERSION")
    )
}

fn write(dir: &Path, name: &str, body: &str) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(dir)?;
    let p = dir.join(name);
    std::fs::write(&p, body)?;
    Ok(p)
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x}"))
}

fn criteria(ctx: &Ctx) -> Result<i32, Error> {
    let opts = ctx.options();
    let spectrum = &ctx.cfg.spectrum;
    let mut reports: Vec<CriterionReport> = vec![levy_in_h_criterion(spectrum, &opts)?, state_space_criterion(spectrum, &opts)?];
    let (s2, sa) = ergodicity_criterion(spectrum, ctx.cfg.alpha_m, &opts)?;
    reports.push(s2);
    reports.push(sa);
    let path = match ctx.format {
        Format::Json => write(&ctx.dir, "criteria.json", &serde_json::to_string_pretty(&reports)?)?,
        Format::Csv => {
            let mut body = header(ctx, "criteria");
            body.push_str("criterion,verdict,modes_used,value,tail_estimate,fitted_exponent,failed_mode\n");
            for r in &reports {
                let _ = writeln!(
                    body,
                    "{},{},{},{},{},{},{}",
                    r.criterion,
                    serde_json::to_value(r.verdict)?.as_str().unwrap_or_default(),
                    r.modes_used,
                    opt(r.value),
                    opt(r.tail_estimate),
                    opt(r.fitted_exponent),
                    r.failed_mode.map_or(String::new(), |m| m.to_string())
                );
            }
            write(&ctx.dir, "criteria.csv", &body)?
        }
    };
    if ctx.verbose {
        for r in &reports {
            write(&ctx.dir, &format!("criteria_{}.csv", r.criterion), &r.to_csv())?;
        }
    }
    for r in &reports {
        let value = match (r.value, r.verdict) {
            (Some(x), _) => format!("{x}"),
            (None, Verdict::Divergent) => "inf".into(),
            (None, _) => "unknown".into(),
        };
        ctx.say(&format!("{}: {:?} over {} modes, value {value}", r.criterion, r.verdict, r.modes_used));
    }
    ctx.say(&format!("wrote {}", path.display()));
    Ok(EXIT_OK)
}

fn bounds_cmd(ctx: &Ctx) -> Result<i32, Error> {
    if ctx.cfg.t_grid.is_empty() {
        return Err(Error::Config("t_grid: the bounds command needs at least one time".into()));
    }
    let mut reports: Vec<BoundReport> = Vec::new();
    for &t in &ctx.cfg.t_grid {
        for f in [bounds::a_t, bounds::c_t_subordinate, bounds::c_t_general] {
            match f(&ctx.cfg.spectrum, t, ctx.cfg.k_max) {
                Ok(r) => reports.push(r),
                Err(Error::Unsupported(msg)) => ctx.say(&format!("skipped at t={t}: {msg}")),
                Err(e) => return Err(e),
            }
        }
    }
    if reports.iter().any(|r| !r.stabilized) {
        eprintln!("warning: some constants did not stabilize within {} modes", ctx.cfg.k_max);
    }
    if ctx.verbose {
        for (i, r) in reports.iter().enumerate() {
            write(&ctx.dir, &format!("bounds_{}_{i}.csv", r.formula_id.name()), &r.to_csv())?;
        }
    } else {
        for r in &mut reports {
            r.per_mode_terms.clear();
        }
    }
    let path = match ctx.format {
        Format::Json => write(&ctx.dir, "bounds.json", &serde_json::to_string_pretty(&reports)?)?,
        Format::Csv => {
            let mut body = header(ctx, "bounds");
            body.push_str("t,formula,value,argmax_mode,stabilized_at,stabilized,modes_scanned,divergent_mode\n");
            for r in &reports {
                let _ = writeln!(
                    body,
                    "{},{},{},{},{},{},{},{}",
                    r.t,
                    r.formula_id.name(),
                    if r.value.is_finite() { format!("{}", r.value) } else { "inf".into() },
                    r.argmax_mode,
                    r.stabilized_at,
                    r.stabilized,
                    r.modes_scanned,
                    r.divergent_mode.map_or(String::new(), |m| m.to_string())
                );
            }
            write(&ctx.dir, "bounds.csv", &body)?
        }
    };
    ctx.say(&format!("{} constants, wrote {}", reports.len(), path.display()));
    Ok(EXIT_OK)
}

fn density(ctx: &Ctx, mode: usize) -> Result<i32, Error> {
    if ctx.cfg.t_grid.is_empty() {
        return Err(Error::Config("t_grid: the density command needs at least one time".into()));
    }
    let modes = ctx.cfg.spectrum.modes(mode)?;
    let m = modes
        .get(mode.wrapping_sub(1))
        .ok_or_else(|| Error::Config(format!("--mode {mode} is not a mode of the spectrum")))?;
    for (i, &t) in ctx.cfg.t_grid.iter().enumerate() {
        let grid = compute_density(&experiments::runs::mode_law(m, t)?, &DensityOptions::default())?;
        let path = write(&ctx.dir, &format!("density_mode{mode}_t{i}.csv"), &grid.to_csv())?;
        ctx.say(&format!("t={t}: {} points, step {:e}, wrote {}", grid.len(), grid.step, path.display()));
    }
    Ok(EXIT_OK)
}

/// Fast checks of closed forms, density inversion and bound ordering.
pub fn selftest(quiet: bool) -> i32 {
    let checks: Vec<(&str, fn() -> Result<bool, Error>)> = vec![
        ("stable integrated exponent closed form vs quadrature", || {
            let e = IntegratedExponent::new(BernsteinSpec::stable(0.6, 1.3)?, 0.8, 1.5)?;
            let (a, b) = (e.eval(2.0)?, e.eval_quadrature(2.0)?);
            Ok((a - b).abs() <= 1e-8 * a)
        }),
        ("power-law decay integral closed form vs quadrature", || {
            let f = BernsteinSpec::stable(0.4, 2.0)?;
            let closed = decay_of_exponent(&IntegratedExponent::new(f.clone(), 1.0, 1.0)?, 1.0)?.value_or_inf();
            let e = IntegratedExponent::new(f, 1.0, 1.0)?;
            let quad = exp_decay_integral(|r| e.eval_quadrature(r), 1e-10)?.value_or_inf();
            Ok((closed - quad).abs() <= 1e-6 * closed)
        }),
        ("cauchy density, fisher information and total variation", || {
            let g = compute_density(&StableExponent { alpha: 1.0, scale: 1.0 }, &DensityOptions::default())?;
            let c = g.center();
            let tv = tv_distance_1d(&g, 2.0)?.value;
            let fisher = fisher_integral(&g)?.value;
            Ok((g.p[c] - 1.0 / std::f64::consts::PI).abs() < 1e-7 && (tv - 0.5).abs() < 1e-5 && (fisher - 0.5).abs() < 1e-4)
        }),
        ("single cauchy mode bound chain", || {
            use crate::levy::LevyMeasureSpec;
            use crate::spectrum::{ModeNoise, SpectrumSpec};
            let s = SpectrumSpec::explicit(vec![(
                1.0,
                ModeNoise::Levy(LevyMeasureSpec::stable_sym(1.0, 1.0 / std::f64::consts::PI)?),
            )])?;
            let t = 1.0;
            let sigma = 1.0 - (-t as f64).exp();
            let g = compute_density(&StableExponent { alpha: 1.0, scale: sigma }, &DensityOptions::default())?;
            let grad = gradient_norm_1d(&g, 1.0, t);
            let tv = tv_distance_1d(&g, (-t as f64).exp())?.value;
            let a = bounds::a_t(&s, t, 10)?.value;
            let cs = bounds::c_t_subordinate(&s, t, 10)?.value;
            let cg = bounds::c_t_general(&s, t, 10)?.value;
            Ok(tv <= 2.0 * grad && grad <= a && a <= cs && cs <= cg)
        }),
        ("bernstein catalogue is completely monotone", || {
            let grid = geometric_grid(1e-3, 1e3, 60);
            let catalogue = [
                BernsteinSpec::stable(0.5, 1.0)?,
                BernsteinSpec::relativistic(0.5, 1.0)?,
                BernsteinSpec::log(1.0)?,
            ];
            for f in &catalogue {
                if !matches!(verify_complete_monotonicity(f, &grid, 4)?, MonotonicityVerdict::Pass) {
                    return Ok(false);
                }
            }
            Ok(true)
        }),
        ("heat-equation thresholds", || {
            Ok(heat_equation_threshold(1, 1.0, 0.0)?.met
                && !heat_equation_threshold(3, 1.0, 0.0)?.met
                && heat_equation_threshold(3, 1.0, -2.0)?.met)
        }),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let ok = matches!(check(), Ok(true));
        if !ok {
            failed += 1;
        }
        if !quiet || !ok {
            println!("{} {name}", if ok { "ok  " } else { "FAIL" });
        }
    }
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_NUMERIC
    }
}
