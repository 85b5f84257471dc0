//! Command-line front end for `switchtail`.
//!
//! Every subcommand writes its report to `--out` when given and to stdout
//! otherwise, and returns a process exit code:
//! 0 success, 1 validation or I/O, 2 ergodicity, 3 degenerate data,
//! 4 regime mismatch.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use switchtail::model::{alpha_of, require_ergodic};
use switchtail::montecarlo::{
    auto_burn_in, default_cutoff_drop, default_delta, hill_estimate, hill_plateau, moment_probe,
    sample_stationary, simulate_walk_max, tail_symmetry_check, LadderEstimate, MomentProbe, PlateauDiagnostic,
    SampleSummary, SimulationPlan, SymmetryPoint, TailEstimate, WalkPlan, CONTRACTION_BUDGET, DEFAULT_K_FRAC,
    PLATEAU_FRACS,
};
use switchtail::samples_io::{read_samples, write_samples, SampleFormat};
use switchtail::spectral::{
    classify_regime, default_grid, derivative_at_zero, diagnostics, monte_carlo_operator_check, operator_radius,
    growth_rate, rho_ms, s1, second_differences, semigroup_defect, sign_changes, solve_kappa, solve_kappa_with,
    Regime, CROSS_TOL,
};
use switchtail::{Error, SwitchingModel};

pub const DEFAULT_SEED: u64 = 42;

pub mod exit {
    pub const OK: i32 = 0;
    pub const INVALID: i32 = 1;
    pub const ERGODICITY: i32 = 2;
    pub const DEGENERATE: i32 = 3;
    pub const REGIME: i32 = 4;
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::ErgodicityViolated { .. } => exit::ERGODICITY,
        Error::DegenerateSample(_) => exit::DEGENERATE,
        Error::LightRegime => exit::REGIME,
        _ => exit::INVALID,
    }
}

#[derive(Debug, Parser)]
#[command(name = "switchtail", version, about = "Tail analysis of Markov-switching Ornstein-Uhlenbeck models")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Model file (JSON with a, sigma, lambda, q)
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Output file; stdout when omitted
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads; defaults to the available parallelism
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Regime, tail exponent and spectral diagnostics
    Analyze(AnalyzeArgs),
    /// Draw stationary samples
    Simulate(SimulateArgs),
    /// Tail index and symmetry of a sample file
    Tail(TailArgs),
    /// Backward walk maximum and ladder matrix
    Walkmax(WalkmaxArgs),
    /// Invariant battery
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 64)]
    pub grid_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BurnIn {
    Auto,
    Steps(u64),
}

impl FromStr for BurnIn {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(BurnIn::Auto);
        }
        match s.parse::<u64>() {
            Ok(0) | Err(_) => Err(format!("expected `auto` or a positive integer, got `{s}`")),
            Ok(n) => Ok(BurnIn::Steps(n)),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Csv,
    Bin,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Step size; defaults to 0.25 / max lambda
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value = "auto")]
    pub burnin: BurnIn,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub antithetic: bool,
}

#[derive(Debug, Args)]
pub struct TailArgs {
    #[arg(long)]
    pub samples_file: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K_FRAC)]
    pub k_frac: f64,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    pub moment_orders: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct WalkmaxArgs {
    #[arg(long, default_value_t = 200_000)]
    pub replicas: u64,
    /// Stopping depth below the running maximum; defaults to max(30/kappa, 20)
    #[arg(long)]
    pub cutoff_drop: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, default_value_t = 64)]
    pub grid_points: usize,
    #[arg(long, default_value_t = 100_000)]
    pub mc_paths: u64,
    /// Perturbs the M_s evaluator to exercise the failure path
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

/// Runs a parsed command line and returns its exit code.
pub fn run(cli: Cli) -> i32 {
    let workers = cli
        .common
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return exit::INVALID;
        }
    };
    let common = cli.common;
    let result = pool.install(|| match &cli.command {
        Command::Analyze(args) => cmd_analyze(&common, args),
        Command::Simulate(args) => cmd_simulate(&common, args),
        Command::Tail(args) => cmd_tail(&common, args),
        Command::Walkmax(args) => cmd_walkmax(&common, args),
        Command::Check(args) => cmd_check(&common, args),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            exit_code(&e)
        }
    }
}

fn describe(err: &Error) -> String {
    match err {
        Error::ErgodicityViolated { alpha } => format!(
            "ergodicity condition violated: alpha = sum a(i) mu(i) = {alpha} must be negative for a stationary law to exist"
        ),
        Error::LightRegime => "model is in the light-tailed regime (no positive drift); this command needs a heavy-tailed model".into(),
        other => other.to_string(),
    }
}

fn log(common: &Common, msg: impl AsRef<str>) {
    if common.verbose {
        eprintln!("{}", msg.as_ref());
    }
}

fn load_model(common: &Common) -> switchtail::Result<SwitchingModel> {
    let path = common
        .model
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("--model is required".into()))?;
    log(common, format!("model: {}", path.display()));
    SwitchingModel::from_path(path)
}

fn output(path: Option<&Path>) -> switchtail::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json<T: Serialize>(common: &Common, value: &T) -> switchtail::Result<()> {
    let mut out = output(common.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn cmd_analyze(common: &Common, args: &AnalyzeArgs) -> switchtail::Result<i32> {
    let model = load_model(common)?;
    let grid = default_grid(&model, args.grid_points.max(3));
    let report = diagnostics(&model, args.delta, &grid)?;
    log(common, format!("regime: {:?}", report.regime));
    emit_json(common, &report)?;
    Ok(exit::OK)
}

pub fn cmd_simulate(common: &Common, args: &SimulateArgs) -> switchtail::Result<i32> {
    let model = load_model(common)?;
    let alpha = require_ergodic(&model)?;
    let delta = args.delta.unwrap_or_else(|| default_delta(&model));
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("--delta must be positive, got {delta}")));
    }
    let burn_in_steps = match args.burnin {
        BurnIn::Auto => auto_burn_in(alpha, delta),
        BurnIn::Steps(n) => n,
    };
    let plan = SimulationPlan {
        delta,
        burn_in_steps,
        n_samples: args.samples,
        seed: common.seed,
        antithetic: args.antithetic,
    };
    if plan.contraction(alpha) < CONTRACTION_BUDGET {
        eprintln!(
            "warning: burn-in contraction {:.3} is below {CONTRACTION_BUDGET}; samples may retain initialization bias",
            plan.contraction(alpha)
        );
    }
    let out_path = common
        .out
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("simulate needs --out for the samples file".into()))?;
    log(common, format!("delta {delta}, burn-in {burn_in_steps} steps, {} samples", args.samples));
    let samples = sample_stationary(&model, &plan)?;
    let format = match args.format {
        Format::Csv => SampleFormat::Csv,
        Format::Bin => SampleFormat::Binary,
    };
    write_samples(&samples.values, format, BufWriter::new(File::create(out_path)?))?;
    let summary: SampleSummary = samples.summary();
    let mut stdout = io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, &summary)?;
    writeln!(stdout)?;
    Ok(exit::OK)
}

#[derive(Debug, Serialize)]
pub struct TailReport {
    #[serde(flatten)]
    pub estimate: TailEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_spectral: Option<f64>,
    /// `kappa_hat / kappa_spectral`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_ratio: Option<f64>,
    pub plateau: PlateauDiagnostic,
    pub symmetry: Vec<SymmetryPoint>,
    pub moments: Vec<MomentProbe>,
}

pub fn cmd_tail(common: &Common, args: &TailArgs) -> switchtail::Result<i32> {
    let values = read_samples(&args.samples_file)?;
    log(common, format!("{} samples", values.len()));
    let kappa_spectral = match &common.model {
        Some(_) => {
            let model = load_model(common)?;
            require_ergodic(&model)?;
            match classify_regime(&model)? {
                Regime::Heavy => Some(solve_kappa(&model)?.kappa),
                Regime::Light => None,
            }
        }
        None => None,
    };
    let estimate = hill_estimate(&values, args.k_frac, kappa_spectral)?;
    let report = TailReport {
        kappa_ratio: kappa_spectral.map(|k| estimate.kappa_hat / k),
        kappa_spectral,
        plateau: hill_plateau(&values, &PLATEAU_FRACS)?,
        symmetry: tail_symmetry_check(&values, &[0.9, 0.99, 0.999])?,
        moments: moment_probe(&values, &args.moment_orders),
        estimate,
    };
    emit_json(common, &report)?;
    Ok(exit::OK)
}

pub fn cmd_walkmax(common: &Common, args: &WalkmaxArgs) -> switchtail::Result<i32> {
    let model = load_model(common)?;
    require_ergodic(&model)?;
    if classify_regime(&model)? == Regime::Light {
        return Err(Error::LightRegime);
    }
    let kappa = solve_kappa(&model)?.kappa;
    let plan = WalkPlan {
        delta: args.delta.unwrap_or_else(|| default_delta(&model)),
        n_replicas: args.replicas,
        cutoff_drop: args.cutoff_drop.unwrap_or_else(|| default_cutoff_drop(kappa)),
        seed: common.seed,
    };
    log(common, format!("kappa {kappa}, cutoff drop {}", plan.cutoff_drop));
    let estimate: LadderEstimate = simulate_walk_max(&model, kappa, &plan)?;
    emit_json(common, &estimate)?;
    Ok(exit::OK)
}

/// Tolerances of the invariant battery.
pub mod tolerance {
    pub const CONVEXITY: f64 = 1e-9;
    pub const SEMIGROUP: f64 = 1e-10;
    pub const DERIVATIVE: f64 = 1e-6;
    pub const DELTA_INDEPENDENCE: f64 = 1e-9;
    /// Standard errors allowed per Monte Carlo operator entry.
    pub const OPERATOR_SE: f64 = 4.0;
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub regime: Regime,
    pub items: Vec<CheckItem>,
    pub all_passed: bool,
}

fn item(name: &'static str, passed: bool, detail: String) -> CheckItem {
    CheckItem { name, passed, detail }
}

/// Runs the invariant battery on one model.
pub fn check_battery(model: &SwitchingModel, args: &CheckArgs, seed: u64) -> switchtail::Result<CheckReport> {
    let alpha = require_ergodic(model)?;
    let regime = classify_regime(model)?;
    let pole = s1(model);
    let grid = default_grid(model, args.grid_points.max(3));
    let fault = args.inject_fault;
    let rho = |s: f64| rho_ms(model, s).map(|r| if fault { r * (1.0 + 0.05 * s) } else { r });
    let mut items = Vec::new();

    let curve = grid
        .iter()
        .map(|&s| growth_rate(model, s).map(|l| (s, l)))
        .collect::<switchtail::Result<Vec<_>>>()?;
    let min_d2 = second_differences(&curve).into_iter().fold(f64::INFINITY, f64::min);
    items.push(item(
        "convexity",
        min_d2 >= -tolerance::CONVEXITY,
        format!("min second difference of log rho(A_s,1) = {min_d2:.3e}"),
    ));

    let probe = [0.0, 0.5, 1.0, grid[grid.len() / 2]];
    let defect = probe
        .iter()
        .map(|&s| semigroup_defect(model, s, 0.5, 0.25).max(semigroup_defect(model, s, 1.0, 1.0)))
        .fold(0.0, f64::max);
    items.push(item(
        "semigroup",
        defect <= tolerance::SEMIGROUP,
        format!("max defect = {defect:.3e}"),
    ));

    let deriv = derivative_at_zero(model, 1.0)?;
    items.push(item(
        "derivative_at_zero",
        (deriv - alpha).abs() <= tolerance::DERIVATIVE,
        format!("slope = {deriv:.12}, alpha = {alpha:.12}"),
    ));

    let mut worst = 0.0f64;
    for &s in &probe {
        let lambda = growth_rate(model, s)?;
        for delta in [0.25, 0.5, 1.0, 2.0] {
            worst = worst.max((operator_radius(model, s, delta)?.ln() / delta - lambda).abs());
        }
    }
    items.push(item(
        "delta_independence",
        worst <= tolerance::DELTA_INDEPENDENCE,
        format!("max |log rho(A_s,delta)/delta - Lambda(s)| = {worst:.3e}"),
    ));

    let kappa = match regime {
        Regime::Heavy => match solve_kappa_with(model, rho) {
            Ok(sol) => {
                items.push(item(
                    "cross_method_kappa",
                    true,
                    format!("M_s root {:.12}, G_s root {:.12}", sol.kappa, sol.kappa_generator),
                ));
                Some(sol.kappa)
            }
            Err(Error::MethodDisagreement { ms, gs }) => {
                items.push(item(
                    "cross_method_kappa",
                    false,
                    format!("M_s root {ms:.12} and G_s root {gs:.12} differ by more than {CROSS_TOL:e}"),
                ));
                None
            }
            Err(e) => return Err(e),
        },
        Regime::Light => {
            items.push(item("cross_method_kappa", true, "not applicable: light regime".into()));
            None
        }
    };

    let rho_curve = grid
        .iter()
        .filter(|&&s| s < pole)
        .map(|&s| rho(s).map(|r| (s, r - 1.0)))
        .collect::<switchtail::Result<Vec<_>>>()?;
    let changes = sign_changes(&rho_curve);
    let dichotomy = match regime {
        Regime::Light => rho_curve.iter().all(|p| p.1 < 0.0),
        Regime::Heavy => changes == 1,
    };
    items.push(item(
        "dichotomy",
        dichotomy,
        format!("{regime:?}: {changes} sign changes of rho(M_s) - 1 on {} points", rho_curve.len()),
    ));

    let mut tilts = vec![0.0, 0.7];
    tilts.extend(kappa);
    let mut worst_z = 0.0f64;
    for &s in &tilts {
        for delta in [0.25, 0.5] {
            let exact = switchtail::linalg::expm(&(switchtail::spectral::tilted_generator(model, s) * delta));
            for i in 0..model.n_states() {
                let row = monte_carlo_operator_check(model, s, delta, i, args.mc_paths, seed);
                for j in 0..model.n_states() {
                    let diff = (row.mean[j] - exact[(i, j)]).abs();
                    let z = if row.std_error[j] > 0.0 {
                        diff / row.std_error[j]
                    } else if diff <= 1e-12 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    worst_z = worst_z.max(z);
                }
            }
        }
    }
    items.push(item(
        "monte_carlo_operator",
        worst_z <= tolerance::OPERATOR_SE,
        format!("max |MC - exp(delta G_s)| = {worst_z:.2} standard errors over s in {tilts:?}"),
    ));

    let all_passed = items.iter().all(|i| i.passed);
    Ok(CheckReport {
        regime,
        items,
        all_passed,
    })
}

pub fn cmd_check(common: &Common, args: &CheckArgs) -> switchtail::Result<i32> {
    let model = load_model(common)?;
    alpha_of(&model)?;
    let report = check_battery(&model, args, common.seed)?;
    let mut stdout = io::stdout().lock();
    for i in &report.items {
        writeln!(stdout, "{} {}: {}", if i.passed { "PASS" } else { "FAIL" }, i.name, i.detail)?;
    }
    stdout.flush()?;
    if common.out.is_some() {
        emit_json(common, &report)?;
    }
    Ok(if report.all_passed { exit::OK } else { exit::INVALID })
}
