//! `fdl` command-line front end.
//!
//! Settings are layered: built-in defaults, then the `--config` TOML file,
//! then command-line flags. SNRs and thresholds are entered in dB. The
//! resolved configuration is written next to every output file, or to
//! stderr when the output goes to stdout.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fdl::experiments::{
    self, configure_threads, Correlation, ExperimentConfig, Method, ReproOptions, Reproduction, SnrSection, ThresholdPolicy,
};
use fdl::{FdlError, GaussianMap, Result, StopRule};

#[derive(Parser, Debug)]
#[command(name = "fdl", version, about = "Scan-and-wait combining over correlated Nakagami-m fading")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate one operating point analytically.
    Eval(PointArgs),
    /// Evaluate a range of average SNRs analytically.
    Sweep(PointArgs),
    /// Solve the first-branch threshold over an SNR range.
    SolveThreshold(PointArgs),
    /// Estimate a point or range by Monte Carlo simulation.
    Simulate(PointArgs),
    /// Decide which reading of the square-root correlation matches simulation.
    Calibrate(PointArgs),
    /// Write the data grid behind a named figure or table (or `all`).
    Reproduce(ReproArgs),
    /// Write convergence and timing tables.
    Study(StudyArgs),
}

#[derive(Args, Debug, Default, Clone)]
struct PointArgs {
    /// TOML file with [run], [system], [snr], [threshold], [series], [mc].
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    id: Option<String>,
    /// swc, sec or mrc.
    #[arg(long)]
    receiver: Option<String>,
    /// bpsk, pam or qam.
    #[arg(long = "mod")]
    modulation: Option<String>,
    /// Constellation size.
    #[arg(long = "M")]
    order: Option<u32>,
    /// Nakagami fading parameter.
    #[arg(long = "m")]
    m: Option<f64>,
    /// Number of branches.
    #[arg(long = "L")]
    branches: Option<usize>,
    /// exponential, bivariate or independent.
    #[arg(long)]
    correlation: Option<String>,
    #[arg(long)]
    rho: Option<f64>,
    /// Decay of the average SNR and threshold profiles.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "gbar1-db", conflicts_with = "gbar1_range", allow_hyphen_values = true)]
    gbar1_db: Option<f64>,
    /// start:stop:step in dB.
    #[arg(long = "gbar1-range", allow_hyphen_values = true)]
    gbar1_range: Option<String>,
    /// Explicit first-branch threshold in dB.
    #[arg(long, conflicts_with_all = ["anpe_target", "sec_matched"], allow_hyphen_values = true)]
    gt1: Option<f64>,
    /// Solve the threshold for this average number of path estimations.
    #[arg(long = "anpe-target", conflicts_with = "sec_matched")]
    anpe_target: Option<f64>,
    /// Use thresholds matched to the optimal switch-and-examine receiver.
    #[arg(long = "sec-matched")]
    sec_matched: bool,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "n-max")]
    n_max: Option<usize>,
    /// relative or absolute truncation rule.
    #[arg(long)]
    rule: Option<String>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Count BPSK bit errors instead of averaging the conditional error probability.
    #[arg(long = "error-counting")]
    error_counting: bool,
    /// elementwise or matrix.
    #[arg(long, value_parser = ["elementwise", "matrix"])]
    convention: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReproArgs {
    /// fig1, fig3, fig4, fig5, fig6, fig-rho, table1 or all.
    name: String,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Correlation of the correlated curves.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long = "gbar1-range", allow_hyphen_values = true)]
    gbar1_range: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "n-max")]
    n_max: Option<usize>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["elementwise", "matrix"])]
    convention: Option<String>,
}

#[derive(Args, Debug)]
struct StudyArgs {
    /// Output directory.
    #[arg(long, default_value = "bench")]
    out: PathBuf,
    #[arg(long = "n-max", default_value_t = 1000)]
    n_max: usize,
}

fn parse_convention(s: &str) -> Result<GaussianMap> {
    match s {
        "elementwise" => Ok(GaussianMap::ElementwiseSqrt),
        "matrix" => Ok(GaussianMap::MatrixSqrt),
        other => Err(FdlError::Config(format!("unknown convention '{other}'"))),
    }
}

fn parse_range(s: &str) -> Result<SnrSection> {
    let parts: Vec<&str> = s.split(':').collect();
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| FdlError::Config(format!("--gbar1-range expects start:stop:step in dB, got '{s}'")))?;
    match nums[..] {
        [start, stop, step] => Ok(SnrSection::range(start, stop, step)),
        _ => Err(FdlError::Config(format!("--gbar1-range expects start:stop:step in dB, got '{s}'"))),
    }
}

fn parse_correlation(s: &str) -> Result<Correlation> {
    match s.to_ascii_lowercase().as_str() {
        "exponential" => Ok(Correlation::Exponential),
        "bivariate" => Ok(Correlation::Bivariate),
        "independent" => Ok(Correlation::Independent),
        other => Err(FdlError::Config(format!("unknown correlation '{other}' (expected exponential, bivariate or independent)"))),
    }
}

fn parse_rule(s: &str) -> Result<StopRule> {
    match s.to_ascii_lowercase().as_str() {
        "relative" => Ok(StopRule::Relative),
        "absolute" => Ok(StopRule::Absolute),
        other => Err(FdlError::Config(format!("unknown truncation rule '{other}' (expected relative or absolute)"))),
    }
}

impl PointArgs {
    /// Defaults, then the config file, then flags.
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_path(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.id {
            c.run.id = v.clone();
        }
        if let Some(v) = &self.receiver {
            c.system.receiver = v.parse()?;
        }
        if let Some(v) = &self.modulation {
            c.system.modulation = v.clone();
        }
        if self.order.is_some() {
            c.system.order = self.order;
        }
        if let Some(v) = self.m {
            c.system.m = v;
        }
        if let Some(v) = self.branches {
            c.system.branches = v;
        }
        if let Some(v) = &self.correlation {
            c.system.correlation = parse_correlation(v)?;
        }
        if let Some(v) = self.rho {
            c.system.rho = v;
        }
        if let Some(v) = self.delta {
            c.system.delta = v;
        }
        if let Some(v) = self.gbar1_db {
            c.snr = SnrSection::single(v);
        }
        if let Some(v) = &self.gbar1_range {
            c.snr = parse_range(v)?;
        }
        if let Some(v) = self.gt1 {
            c.threshold.policy = ThresholdPolicy::Explicit;
            c.threshold.gt1_db = Some(v);
        }
        if let Some(v) = self.anpe_target {
            c.threshold.policy = ThresholdPolicy::AnpeTarget;
            c.threshold.anpe_target = Some(v);
        }
        if self.sec_matched {
            c.threshold.policy = ThresholdPolicy::SecMatched;
        }
        if let Some(v) = self.tol {
            c.series.tol = v;
        }
        if let Some(v) = self.n_max {
            c.series.n_max = v;
        }
        if let Some(v) = &self.rule {
            c.series.rule = parse_rule(v)?;
        }
        if let Some(v) = self.samples {
            c.mc.samples = v;
        }
        if let Some(v) = self.seed {
            c.mc.seed = v;
        }
        if self.error_counting {
            c.mc.error_counting = true;
        }
        if let Some(v) = &self.convention {
            c.system.convention = parse_convention(v)?;
        }
        if let Some(v) = &self.out {
            c.run.out = Some(v.clone());
        }
        Ok(c)
    }
}

fn config_echo_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    out.with_file_name(format!("{stem}.config.toml"))
}

/// Writes the resolved configuration beside `out`, or to stderr.
fn echo_config(cfg: &ExperimentConfig) -> Result<()> {
    let text = cfg.to_toml_string()?;
    match &cfg.run.out {
        Some(out) => {
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(config_echo_path(out), text)?;
        }
        None => {
            let mut err = io::stderr().lock();
            writeln!(err, "# resolved configuration")?;
            for line in text.lines() {
                writeln!(err, "# {line}")?;
            }
        }
    }
    Ok(())
}

fn output(cfg: &ExperimentConfig) -> Result<Box<dyn Write>> {
    Ok(match &cfg.run.out {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn finish(first_error: Option<FdlError>) -> Result<()> {
    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn run_rows(cfg: ExperimentConfig) -> Result<()> {
    cfg.validate()?;
    echo_config(&cfg)?;
    let outcome = experiments::sweep(&cfg)?;
    experiments::write_rows(&outcome.rows, output(&cfg)?)?;
    finish(outcome.first_error)
}

fn eval(args: &PointArgs) -> Result<()> {
    let mut cfg = args.resolve()?;
    if cfg.snr.stop_db.is_some() {
        return Err(FdlError::Config("eval takes a single --gbar1-db; use sweep for ranges".into()));
    }
    if args.config.is_none() {
        cfg.run.method = Method::Analytic;
    }
    run_rows(cfg)
}

fn sweep(args: &PointArgs) -> Result<()> {
    let mut cfg = args.resolve()?;
    if args.config.is_none() {
        cfg.run.method = Method::Analytic;
    }
    run_rows(cfg)
}

fn simulate(args: &PointArgs) -> Result<()> {
    let mut cfg = args.resolve()?;
    cfg.run.method = Method::Mc;
    run_rows(cfg)
}

fn solve_threshold(args: &PointArgs) -> Result<()> {
    let cfg = args.resolve()?;
    cfg.validate()?;
    echo_config(&cfg)?;
    let (rows, first) = experiments::solve_thresholds(&cfg)?;
    experiments::write_records(&rows, output(&cfg)?)?;
    finish(first)
}

fn calibrate(args: &PointArgs) -> Result<()> {
    let mut cfg = args.resolve()?;
    cfg.run.method = Method::Mc;
    cfg.validate()?;
    echo_config(&cfg)?;
    let (_, text) = experiments::calibrate(&cfg)?;
    output(&cfg)?.write_all(text.as_bytes())?;
    Ok(())
}

fn reproduce(args: &ReproArgs) -> Result<()> {
    let mut o = ReproOptions::default();
    if let Some(v) = args.rho {
        o.rho = v;
    }
    if let Some(v) = &args.gbar1_range {
        o.snr = parse_range(v)?;
    }
    if let Some(v) = args.tol {
        o.series.tol = v;
    }
    if let Some(v) = args.n_max {
        o.series.n_max = v;
    }
    if let Some(v) = args.samples {
        o.mc.samples = v;
    }
    if let Some(v) = args.seed {
        o.mc.seed = v;
    }
    if let Some(v) = &args.convention {
        o.convention = parse_convention(v)?;
    }
    let which: Vec<Reproduction> = if args.name == "all" { Reproduction::ALL.to_vec() } else { vec![args.name.parse()?] };
    let mut first = None;
    for r in which {
        let out = experiments::reproduce(r, &o, &args.out)?;
        eprintln!("{}: {} rows -> {}", r.name(), out.rows, out.csv.display());
        if let Some(e) = &out.first_error {
            eprintln!("{}: first failing point: {e}", r.name());
        }
        first = first.or(out.first_error);
    }
    finish(first)
}

fn study(args: &StudyArgs) -> Result<()> {
    use fdl::study::{convergence_study, joint_cdf_timing, STUDY_RHOS, STUDY_SNR_DB, STUDY_TOLS};
    fs::create_dir_all(&args.out)?;
    let conv = convergence_study(&STUDY_TOLS, &STUDY_RHOS, &STUDY_SNR_DB, args.n_max)?;
    let path = args.out.join("convergence.csv");
    experiments::write_records(&conv, fs::File::create(&path)?)?;
    eprintln!("convergence: {} rows -> {}", conv.len(), path.display());
    let timing = joint_cdf_timing(&[2, 3, 5], &[1.0, 2.0, 3.0], &[0.5, 0.9, 0.95], 1e-6, args.n_max)?;
    let path = args.out.join("joint_cdf.csv");
    experiments::write_records(&timing, fs::File::create(&path)?)?;
    eprintln!("joint_cdf: {} rows -> {}", timing.len(), path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::SolveThreshold(a) => solve_threshold(a),
        Command::Simulate(a) => simulate(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Reproduce(a) => reproduce(a),
        Command::Study(a) => study(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
