//! Command-line interface: asymptotic constant tables, Monte Carlo
//! experiment grids, estimation on user-supplied spectra, and spectrum
//! dumps.
//!
//! Exit codes: 0 success, 1 runtime or estimation failure, 2 usage or
//! configuration error.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use needlet_whittle::asymptotics::variance_constants;
use needlet_whittle::bandsim::{
    band_powers, noise_free_spectrum, sample_empirical_spectrum, EmpiricalSpectrum,
};
use needlet_whittle::estimator::{
    estimate_narrow_band, minimize_profile, narrow_band_range, EstimateResult, EstimatorConfig,
};
use needlet_whittle::montecarlo::{run_experiment, summarize};
use needlet_whittle::spectrum::SpectrumModel;
use needlet_whittle::window::{BandDecomposition, WindowParams};
use serde_json::json;

use crate::config::{parse_bandwidth, SimulateConfig};
use crate::output::{write_outputs, CellOutcome};

#[derive(Parser)]
#[command(
    name = "needlet-whittle",
    version,
    about = "Needlet-based Whittle estimation of the spectral index of an isotropic Gaussian field on the sphere"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the asymptotic constant table over a (B, alpha0) grid as CSV.
    Table1(Table1Args),
    /// Run a Monte Carlo experiment grid described by a JSON config file.
    Simulate(SimulateArgs),
    /// Estimate (alpha0, G0) from a spectrum CSV with columns l, cl_hat.
    Estimate(EstimateArgs),
    /// Write a spectrum draw as CSV with columns l, cl_true, cl_hat.
    DumpSpectrum(DumpSpectrumArgs),
}

#[derive(Args)]
struct Table1Args {
    /// Bandwidths: numbers or expressions like 2^(1/8), comma-separated.
    #[arg(
        long = "b",
        value_delimiter = ',',
        default_values = ["2^(1/8)", "2^(1/4)", "2^(1/2)", "2"]
    )]
    b: Vec<String>,
    /// Spectral indices, comma-separated.
    #[arg(long = "alpha0", value_delimiter = ',', default_values = ["2", "3", "4"])]
    alpha0: Vec<f64>,
    /// Quadrature tolerance of the constant integrals.
    #[arg(long, default_value_t = 1e-12)]
    quad_tol: f64,
    /// Round numeric columns to this many significant digits; full
    /// precision when omitted.
    #[arg(long)]
    digits: Option<usize>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON config file path.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for summary.csv, replications.csv, manifest.json.
    #[arg(long, required_unless_present = "dry_run")]
    out: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Cap the replication worker count.
    #[arg(long)]
    threads: Option<usize>,
    /// Validate the config and echo it fully resolved, without running.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct EstimateArgs {
    /// Input CSV with header columns l and cl_hat; extra columns are
    /// ignored.
    #[arg(long)]
    input: PathBuf,
    /// Bandwidth: a number or an expression like 2^(1/8).
    #[arg(long)]
    b: String,
    /// Lower end of the alpha search interval.
    #[arg(long, default_value_t = 2.01)]
    alpha_min: f64,
    /// Upper end of the alpha search interval.
    #[arg(long, default_value_t = 10.0)]
    alpha_max: f64,
    /// Absolute tolerance on the minimizing alpha.
    #[arg(long, default_value_t = 1e-6)]
    opt_tol: f64,
    /// Window quadrature tolerance.
    #[arg(long, default_value_t = 1e-12)]
    quad_tol: f64,
    /// Also run the narrow-band fit with this bandwidth fraction in (0, 1).
    #[arg(long)]
    narrow_g: Option<f64>,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DumpSpectrumArgs {
    /// True spectral index.
    #[arg(long)]
    alpha0: f64,
    /// Spectrum scale G0.
    #[arg(long, default_value_t = 1.0)]
    g0: f64,
    /// With kappa, the model is C_l = G0 (1 + kappa/l) l^{-alpha0};
    /// without, C_l = G0 l^{-alpha0}.
    #[arg(long)]
    kappa: Option<f64>,
    /// Highest multipole.
    #[arg(long)]
    l_max: u32,
    /// Lowest multipole.
    #[arg(long, default_value_t = 1)]
    l_min: u32,
    /// Sampling seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the exact spectrum into cl_hat instead of a chi-square draw.
    #[arg(long)]
    noise_free: bool,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failed command, split by exit code: usage and configuration errors
/// exit 2, runtime failures exit 1.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

trait Classify<T> {
    fn or_usage(self) -> Result<T, Failure>;
    fn or_runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn or_usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }

    fn or_runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Table1(args) => run_table1(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Estimate(args) => run_estimate(args),
        Command::DumpSpectrum(args) => run_dump_spectrum(args),
    }
}

fn fmt_float(x: f64, digits: Option<usize>) -> String {
    match digits {
        None => format!("{x}"),
        Some(d) => format!("{:.*e}", d.saturating_sub(1), x),
    }
}

fn csv_writer(out: &Option<PathBuf>) -> Result<csv::Writer<Box<dyn std::io::Write>>, Failure> {
    let sink: Box<dyn std::io::Write> = match out {
        Some(path) => Box::new(
            std::fs::File::create(path)
                .with_context(|| format!("cannot create {}", path.display()))
                .or_runtime()?,
        ),
        None => Box::new(std::io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}

/// Writes `<out>.meta.json` next to a CSV output so the file carries its
/// full resolved configuration. Stdout output has no sidecar.
fn write_sidecar(out: &PathBuf, command: &str, args: serde_json::Value) -> anyhow::Result<()> {
    let value = json!({
        "tool": {
            "name": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
        },
        "command": command,
        "args": args,
    });
    let mut path = out.clone().into_os_string();
    path.push(".meta.json");
    let path = PathBuf::from(path);
    std::fs::write(&path, format!("{value:#}\n"))
        .with_context(|| format!("cannot write {}", path.display()))
}

fn run_table1(args: Table1Args) -> Result<(), Failure> {
    if args.b.is_empty() || args.alpha0.is_empty() {
        return Err(anyhow::anyhow!("empty grid: --b and --alpha0 need at least one value each"))
            .or_usage();
    }
    let mut grid = Vec::new();
    for b_text in &args.b {
        let b = parse_bandwidth(b_text).or_usage()?;
        if !(b.is_finite() && b > 1.0) {
            return Err(anyhow::anyhow!("bandwidth B must be > 1, got `{b_text}`")).or_usage();
        }
        grid.push((b_text.clone(), b));
    }

    let mut w = csv_writer(&args.out)?;
    w.write_record(["b", "alpha0", "sigma2", "tau2", "i0", "rho2", "psi", "d", "b2d"])
        .or_runtime()?;
    for (b_text, b) in &grid {
        for &alpha0 in &args.alpha0 {
            let c = variance_constants(*b, alpha0, args.quad_tol)
                .with_context(|| format!("constants at B = {b_text}, alpha0 = {alpha0}"))
                .or_runtime()?;
            let d = args.digits;
            w.write_record([
                fmt_float(*b, d),
                fmt_float(alpha0, d),
                fmt_float(c.sigma2, d),
                fmt_float(c.tau2, d),
                fmt_float(c.i0, d),
                fmt_float(c.rho2, d),
                fmt_float(c.psi, d),
                fmt_float(c.d, d),
                fmt_float(c.b2_d(), d),
            ])
            .or_runtime()?;
        }
    }
    w.flush().or_runtime()?;
    if let Some(path) = &args.out {
        let resolved_b: Vec<f64> = grid.iter().map(|(_, b)| *b).collect();
        write_sidecar(
            path,
            "table1",
            json!({
                "b": resolved_b,
                "alpha0": args.alpha0,
                "quad_tol": args.quad_tol,
                "digits": args.digits,
            }),
        )
        .or_runtime()?;
    }
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let mut cfg = SimulateConfig::load(&args.config).or_usage()?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let plan = cfg.resolve().or_usage()?;

    if args.dry_run {
        let echo = serde_json::to_string_pretty(&cfg).or_runtime()?;
        println!("{echo}");
        return Ok(());
    }
    let out_dir = args.out.expect("clap requires --out without --dry-run");

    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("cannot configure the worker pool")
            .or_runtime()?;
    }

    let mut outcomes = Vec::with_capacity(plan.cells.len());
    for (i, cell) in plan.cells.iter().enumerate() {
        eprintln!(
            "cell {}/{}: L = {}, alpha0 = {}, R = {}",
            i + 1,
            plan.cells.len(),
            cell.l_max,
            cell.alpha0,
            plan.replications
        );
        let experiment = plan.experiment(cell).or_usage()?;
        let run = run_experiment(&experiment)
            .with_context(|| format!("cell L = {}, alpha0 = {}", cell.l_max, cell.alpha0))
            .or_runtime()?;
        let rows = summarize(&run)
            .with_context(|| format!("cell L = {}, alpha0 = {}", cell.l_max, cell.alpha0))
            .or_runtime()?;
        outcomes.push(CellOutcome { run, rows });
    }

    write_outputs(&out_dir, &cfg, &outcomes).or_runtime()?;
    println!(
        "wrote summary.csv, replications.csv, manifest.json to {}",
        out_dir.display()
    );
    Ok(())
}

/// Reads and validates the `l`, `cl_hat` columns: every multipole from the
/// smallest to the largest must appear exactly once.
fn read_spectrum_csv(path: &PathBuf) -> anyhow::Result<EmpiricalSpectrum> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let l_idx = headers
        .iter()
        .position(|h| h == "l")
        .context("input CSV is missing an `l` column")?;
    let cl_idx = headers
        .iter()
        .position(|h| h == "cl_hat")
        .context("input CSV is missing a `cl_hat` column")?;

    let mut rows: Vec<(u32, f64)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let l: u32 = record
            .get(l_idx)
            .with_context(|| format!("line {line}: missing `l` field"))?
            .parse()
            .with_context(|| format!("line {line}: `l` is not a multipole"))?;
        let cl: f64 = record
            .get(cl_idx)
            .with_context(|| format!("line {line}: missing `cl_hat` field"))?
            .parse()
            .with_context(|| format!("line {line}: `cl_hat` is not a number"))?;
        rows.push((l, cl));
    }
    if rows.is_empty() {
        bail!("input CSV has no data rows");
    }

    rows.sort_by_key(|&(l, _)| l);
    let mut gaps = Vec::new();
    for pair in rows.windows(2) {
        let (prev, next) = (pair[0].0, pair[1].0);
        if next == prev {
            bail!("duplicate multipole l = {next}");
        }
        if next > prev + 1 {
            if next == prev + 2 {
                gaps.push(format!("{}", prev + 1));
            } else {
                gaps.push(format!("{}..={}", prev + 1, next - 1));
            }
        }
    }
    if !gaps.is_empty() {
        bail!(
            "input spectrum is missing multipoles: {} (the range {}..={} must be complete)",
            gaps.join(", "),
            rows[0].0,
            rows[rows.len() - 1].0
        );
    }

    let l_min = rows[0].0;
    let values: Vec<f64> = rows.into_iter().map(|(_, cl)| cl).collect();
    Ok(EmpiricalSpectrum::from_values(l_min, values)?)
}

fn estimate_json(fit: &EstimateResult, predicted_sd: Option<f64>) -> serde_json::Value {
    json!({
        "alpha_hat": fit.alpha_hat,
        "g_hat": fit.g_hat,
        "objective": fit.objective_at_min,
        "score": fit.score_at_min,
        "curvature": fit.curvature,
        "j_range": [fit.j_range_used.0, fit.j_range_used.1],
        "boundary": fit.boundary_flag,
        "predicted_sd": predicted_sd,
    })
}

fn run_estimate(args: EstimateArgs) -> Result<(), Failure> {
    let b = parse_bandwidth(&args.b).or_usage()?;
    let config = EstimatorConfig {
        alpha_range: (args.alpha_min, args.alpha_max),
        opt_tol: args.opt_tol,
        ..EstimatorConfig::default()
    };
    config.validate().or_usage()?;
    let spec = read_spectrum_csv(&args.input).or_usage()?;

    let params = WindowParams::new(b, args.quad_tol).or_usage()?;
    let decomp =
        BandDecomposition::new(&params, spec.l_max(), spec.l_min()).or_runtime()?;
    let powers = band_powers(&spec, &decomp).or_runtime()?;
    let fit = minimize_profile(&powers, &decomp, &config).or_runtime()?;

    // The predicted sd sqrt(B^2 D)/L exists only where the variance
    // constants do, alpha >= 2.
    let predicted_sd = |alpha: f64| -> Option<f64> {
        if alpha < 2.0 {
            return None;
        }
        variance_constants(b, alpha, args.quad_tol)
            .ok()
            .map(|c| c.b2_d().sqrt() / spec.l_max() as f64)
    };

    let narrow = match args.narrow_g {
        Some(g) => {
            let j1 = narrow_band_range(decomp.j_l(), b, g).or_usage()?;
            let fit = estimate_narrow_band(&powers, &decomp, &config, j1).or_runtime()?;
            let mut value = estimate_json(&fit, predicted_sd(fit.alpha_hat));
            value["g"] = json!(g);
            value["j1"] = json!(j1);
            value
        }
        None => serde_json::Value::Null,
    };

    let report = json!({
        "input": {
            "path": args.input.display().to_string(),
            "l_min": spec.l_min(),
            "l_max": spec.l_max(),
            "b": b,
        },
        "config": {
            "alpha_range": [args.alpha_min, args.alpha_max],
            "opt_tol": args.opt_tol,
            "quad_tol": args.quad_tol,
            "narrow_g": args.narrow_g,
        },
        "full": estimate_json(&fit, predicted_sd(fit.alpha_hat)),
        "narrow": narrow,
    });
    let text = format!("{report:#}\n");
    match &args.out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("cannot write {}", path.display()))
            .or_runtime()?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run_dump_spectrum(args: DumpSpectrumArgs) -> Result<(), Failure> {
    let model = match args.kappa {
        Some(kappa) => SpectrumModel::with_kappa(args.alpha0, args.g0, kappa),
        None => SpectrumModel::pure(args.alpha0, args.g0),
    }
    .or_usage()?;
    let spec = if args.noise_free {
        noise_free_spectrum(&model, args.l_max, args.l_min)
    } else {
        sample_empirical_spectrum(&model, args.l_max, args.l_min, args.seed)
    }
    .or_usage()?;

    let mut w = csv_writer(&args.out)?;
    w.write_record(["l", "cl_true", "cl_hat"]).or_runtime()?;
    for (offset, cl_hat) in spec.values().iter().enumerate() {
        let l = spec.l_min() + offset as u32;
        let cl_true = model.cl_value(l).or_runtime()?;
        w.write_record([l.to_string(), format!("{cl_true}"), format!("{cl_hat}")])
            .or_runtime()?;
    }
    w.flush().or_runtime()?;
    if let Some(path) = &args.out {
        write_sidecar(
            path,
            "dump-spectrum",
            json!({
                "alpha0": args.alpha0,
                "g0": args.g0,
                "kappa": args.kappa,
                "l_min": args.l_min,
                "l_max": args.l_max,
                "seed": if args.noise_free { serde_json::Value::Null } else { json!(args.seed) },
                "noise_free": args.noise_free,
            }),
        )
        .or_runtime()?;
    }
    Ok(())
}
