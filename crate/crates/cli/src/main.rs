//! `gafz`: analytic predictions, simulation and comparison for zero counts of
//! stationary Gaussian analytic functions.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gaf_zeros::analytics::identities::run_selftest;
use gaf_zeros::analytics::{classify_regime_with, mean_density, RegimeReport, DEFAULT_K_MAX};
use gaf_zeros::harness::{
    compare_to_analytic, fit_growth, run_ensemble_for, EnsembleStats, ExperimentConfig, MeasureRef, DEFAULT_MODES,
};
use gaf_zeros::spectral::descriptor::load_measure;
use gaf_zeros::{Error, SpectralMeasure};

const EXIT_FAIL: u8 = 1;
const EXIT_ARGS: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "gafz", version, about = "Zero statistics of stationary Gaussian analytic functions in a strip")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Regime report (JSON) and mean zero density profile L(y) (CSV).
    Analytic(AnalyticArgs),
    /// Monte Carlo count statistics over nested rectangles [0, T] × [a, b].
    Simulate(SimArgs),
    /// Print the variance-growth regime and the condition that decided it.
    Classify(ClassifyArgs),
    /// Simulate (or read saved statistics) and compare with the analytic prediction.
    Compare(CompareArgs),
    /// Run the identity checks.
    Selftest,
}

#[derive(Args, Debug)]
struct Window {
    /// Measure descriptor (JSON).
    #[arg(long)]
    measure: Option<PathBuf>,
    /// Lower height of the counting window.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    /// Upper height of the counting window.
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    /// Truncation of the variance series.
    #[arg(long, default_value_t = DEFAULT_K_MAX)]
    kmax: u32,
}

#[derive(Args, Debug)]
struct AnalyticArgs {
    #[command(flatten)]
    window: Window,
    /// Points in the L(y) profile.
    #[arg(long, default_value_t = 101)]
    points: usize,
    /// Output directory for report.json and profile.csv (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    #[command(flatten)]
    window: Window,
}

#[derive(Args, Debug)]
struct Ensemble {
    /// Experiment config (JSON); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Rectangle length; repeat for several [default: 25 50 100].
    #[arg(long = "T", value_name = "T")]
    t: Vec<f64>,
    /// Replications [default: 200].
    #[arg(long)]
    reps: Option<usize>,
    /// Base seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Modes used to discretize the density [default: 512].
    #[arg(long)]
    modes: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct SimArgs {
    #[command(flatten)]
    window: Window,
    #[command(flatten)]
    ensemble: Ensemble,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    window: Window,
    #[command(flatten)]
    ensemble: Ensemble,
    /// Saved statistics from `simulate --format json`, used instead of simulating.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Relative tolerance.
    #[arg(long, default_value_t = 0.15)]
    tol: f64,
    /// Output file for the comparison report (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Error with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) | Error::Json(_) | Error::Config(_) | Error::InvalidMeasure(_) => EXIT_CONFIG,
            Error::Domain(_) => EXIT_ARGS,
            _ => EXIT_FAIL,
        };
        Self { code, message: e.to_string() }
    }
}

fn arg_error(msg: impl Into<String>) -> Failure {
    Failure { code: EXIT_ARGS, message: msg.into() }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure { code: EXIT_CONFIG, message: format!("{}: {e}", path.display()) })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn measure_from(window: &Window) -> Result<SpectralMeasure, Failure> {
    let path = window.measure.as_ref().ok_or_else(|| arg_error("--measure is required"))?;
    load_measure(path).map_err(|e| Failure { code: EXIT_CONFIG, message: format!("{}: {e}", path.display()) })
}

fn heights(window: &Window) -> Result<(f64, f64), Failure> {
    match (window.a, window.b) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(arg_error("--a and --b are required")),
    }
}

/// Config from `--config` (if any) with flag overrides applied.
fn experiment(window: &Window, ens: &Ensemble) -> Result<(ExperimentConfig, SpectralMeasure), Failure> {
    let mut cfg = match &ens.config {
        Some(p) => ExperimentConfig::load(p).map_err(|e| Failure { code: EXIT_CONFIG, message: e.to_string() })?,
        None => {
            let (a, b) = heights(window)?;
            let path = window.measure.clone().ok_or_else(|| arg_error("--measure or --config is required"))?;
            ExperimentConfig {
                measure: MeasureRef::Path(path),
                a,
                b,
                t_list: vec![25.0, 50.0, 100.0],
                replications: 200,
                n_modes: DEFAULT_MODES,
                base_seed: 0,
                k_max: window.kmax,
            }
        }
    };
    if ens.config.is_some() {
        if let Some(p) = &window.measure {
            cfg.measure = MeasureRef::Path(p.clone());
        }
        cfg.a = window.a.unwrap_or(cfg.a);
        cfg.b = window.b.unwrap_or(cfg.b);
        if window.kmax != DEFAULT_K_MAX {
            cfg.k_max = window.kmax;
        }
    }
    if !ens.t.is_empty() {
        cfg.t_list = ens.t.clone();
    }
    if let Some(r) = ens.reps {
        cfg.replications = r;
    }
    if let Some(s) = ens.seed {
        cfg.base_seed = s;
    }
    if let Some(m) = ens.modes {
        cfg.n_modes = m;
    }
    let m = cfg.measure().map_err(|e| Failure { code: EXIT_CONFIG, message: e.to_string() })?;
    cfg.validate(&m).map_err(|e| arg_error(e.to_string()))?;
    Ok((cfg, m))
}

fn profile_csv(m: &SpectralMeasure, a: f64, b: f64, points: usize) -> Result<String, Failure> {
    let mut s = String::from("y,L\n");
    let n = points.max(2);
    for i in 0..n {
        let y = a + (b - a) * i as f64 / (n - 1) as f64;
        let l = mean_density(m, y)?;
        let _ = writeln!(s, "{y},{l}");
    }
    Ok(s)
}

fn run_analytic(args: &AnalyticArgs) -> Result<(), Failure> {
    let m = measure_from(&args.window)?;
    let (a, b) = heights(&args.window)?;
    let report = classify_regime_with(&m, a, b, args.window.kmax)?;
    let json = serde_json::to_string_pretty(&report.to_json()).expect("report serialize") + "\n";
    // A measure with no density and no atoms has no usable moments; the profile is then empty.
    let profile = if m.density().is_none() && !m.has_atoms() {
        String::from("y,L\n")
    } else {
        profile_csv(&m, a, b, args.points)?
    };
    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .map_err(|e| Failure { code: EXIT_CONFIG, message: format!("{}: {e}", dir.display()) })?;
            write_file(&dir.join("report.json"), &json)?;
            write_file(&dir.join("profile.csv"), &profile)?;
            println!("{} ({})", report.regime, report.fired_condition);
        }
        None => print!("{json}{profile}"),
    }
    Ok(())
}

fn run_simulate(args: &SimArgs) -> Result<(), Failure> {
    let (cfg, m) = experiment(&args.window, &args.ensemble)?;
    let stats = run_ensemble_for(&m, &cfg)?;
    let text = match args.format {
        Format::Csv => stats.to_csv(),
        Format::Json => stats.to_json() + "\n",
    };
    emit(args.out.as_deref(), &text)
}

fn run_classify(args: &ClassifyArgs) -> Result<(), Failure> {
    let m = measure_from(&args.window)?;
    let (a, b) = heights(&args.window)?;
    let report = classify_regime_with(&m, a, b, args.window.kmax)?;
    println!("{} ({})", report.regime, report.fired_condition);
    Ok(())
}

fn run_compare(args: &CompareArgs) -> Result<bool, Failure> {
    if !(args.tol >= 0.0) {
        return Err(arg_error("--tol must be non-negative"));
    }
    let (stats, m, k_max, a, b) = match &args.stats {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure { code: EXIT_CONFIG, message: format!("{}: {e}", p.display()) })?;
            let stats = EnsembleStats::from_json(&text).map_err(|e| Failure { code: EXIT_CONFIG, message: e.to_string() })?;
            let m = measure_from(&args.window)?;
            let a = args.window.a.unwrap_or(stats.a);
            let b = args.window.b.unwrap_or(stats.b);
            (stats, m, args.window.kmax, a, b)
        }
        None => {
            let (cfg, m) = experiment(&args.window, &args.ensemble)?;
            let stats = run_ensemble_for(&m, &cfg)?;
            (stats, m, cfg.k_max, cfg.a, cfg.b)
        }
    };
    let report: RegimeReport = classify_regime_with(&m, a, b, k_max)?;
    let cmp = compare_to_analytic(&stats, &report, args.tol);
    emit(args.out.as_deref(), &(cmp.to_json() + "\n"))?;
    let fit = fit_growth(&stats).ok();
    eprintln!(
        "{} ({}): growth exponent {}, {}",
        report.regime,
        report.fired_condition,
        fit.map_or("n/a".into(), |f| format!("{:.3}", f.exponent)),
        if cmp.passed { "PASS" } else { "FAIL" }
    );
    Ok(cmp.passed)
}

fn run_selftest_cmd() -> bool {
    let results = run_selftest();
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    results.iter().all(|r| r.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ARGS } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Analytic(a) => run_analytic(a).map(|_| true),
        Command::Simulate(a) => run_simulate(a).map(|_| true),
        Command::Classify(a) => run_classify(a).map(|_| true),
        Command::Compare(a) => run_compare(a),
        Command::Selftest => Ok(run_selftest_cmd()),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(f) => {
            eprintln!("gafz: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
