use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cogmimo_core::sweep::{axis_values, lowsnr_table, mu_vs_p2_table, queue_table, run_sweep};
use cogmimo_core::{
    CovarianceMode, GridSpec, Normalization, QueueSpec, Report, RunSettings, ScenarioConfig, SweepAxis, SweepSpec,
    Table,
};

/// Effective capacity and low-power energy efficiency of cognitive MIMO links.
#[derive(Debug, Parser)]
#[command(name = "cogmimo", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// JSON scenario file; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Channel draws per sweep point.
    #[arg(long, global = true, default_value_t = 100_000)]
    samples: usize,
    /// Output CSV path (stdout if omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value = "per_hz")]
    normalization: Normalization,
    /// Input covariance: uniform, waterfill or beamform.
    #[arg(long, global = true, default_value = "uniform")]
    covariance: CovarianceMode,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep one parameter and report effective rates.
    Sweep(SweepArgs),
    /// Minimum energy per bit and wideband slope.
    LowsnrReport(LowSnrArgs),
    /// Compare simulated queue-tail decay with the QoS exponent.
    QueueValidate(QueueArgs),
    /// Largest feasible busy-to-idle power ratio against the idle power.
    MuVsP2(MuArgs),
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// p_int, snr, p_d, mu, theta or p2.
    #[arg(long)]
    axis: SweepAxis,
    /// Explicit axis values (dB for p_int, snr and p2).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with_all = ["from", "to", "step"])]
    values: Vec<f64>,
    #[arg(long, allow_negative_numbers = true)]
    from: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    to: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    /// QoS exponents; one row per axis value and exponent.
    #[arg(long, value_delimiter = ',')]
    theta: Vec<f64>,
    /// rate or ebn0 (snr axis only).
    #[arg(long, default_value = "rate")]
    report: Report,
    /// Add closed-form and standard-error columns.
    #[arg(long)]
    cross_validate: bool,
    #[arg(long, default_value_t = 101)]
    grid_mu: usize,
    #[arg(long, default_value_t = 101)]
    grid_p2: usize,
    /// Search every P2 grid point instead of only the cap.
    #[arg(long)]
    exhaustive: bool,
}

#[derive(Debug, Args)]
struct LowSnrArgs {
    /// Detection probabilities, one row each.
    #[arg(long = "p-d", value_delimiter = ',')]
    p_d: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    theta: Vec<f64>,
}

#[derive(Debug, Args)]
struct QueueArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0.005, 0.01, 0.05])]
    theta: Vec<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    frames: usize,
    #[arg(long, default_value_t = 4)]
    seeds: usize,
    /// Fixed arrival in bits/frame instead of the effective capacity.
    #[arg(long)]
    arrival: Option<f64>,
    /// Relative tolerance for the pass column.
    #[arg(long, default_value_t = 0.25)]
    tolerance: f64,
}

#[derive(Debug, Args)]
struct MuArgs {
    #[arg(long, default_value_t = -20.0, allow_negative_numbers = true)]
    from: f64,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    to: f64,
    #[arg(long, default_value_t = 0.5)]
    step: f64,
    /// Interference budgets in dB (defaults to the config value).
    #[arg(long = "p-int", value_delimiter = ',', allow_hyphen_values = true)]
    p_int: Vec<f64>,
}

fn default_axis_values(axis: SweepAxis) -> Result<Vec<f64>> {
    Ok(match axis {
        SweepAxis::PInt => axis_values(-30.0, 20.0, 1.0)?,
        SweepAxis::Snr => axis_values(-30.0, 10.0, 1.0)?,
        SweepAxis::PD => axis_values(0.5, 1.0, 0.05)?,
        SweepAxis::Mu => axis_values(0.0, 1.0, 0.05)?,
        SweepAxis::Theta => vec![0.0, 0.001, 0.01, 0.1, 1.0],
        SweepAxis::P2 => axis_values(-20.0, 10.0, 1.0)?,
    })
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig> {
    let config: ScenarioConfig = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
        }
        None => ScenarioConfig::default(),
    };
    config.resolve().context("invalid configuration")?;
    Ok(config)
}

fn build_table(cli: &Cli) -> Result<Table> {
    let g = &cli.global;
    let config = load_config(g.config.as_deref())?;
    let settings = RunSettings {
        samples: g.samples,
        seed: g.seed,
        normalization: g.normalization,
        mode: g.covariance,
    };
    let table = match &cli.command {
        Command::Sweep(a) => {
            let values = match (a.from, a.to, a.step) {
                _ if !a.values.is_empty() => a.values.clone(),
                (Some(from), Some(to), Some(step)) => axis_values(from, to, step)?,
                (None, None, None) => default_axis_values(a.axis)?,
                _ => bail!("--from, --to and --step must be given together"),
            };
            let mut grid = GridSpec::new(a.grid_mu, a.grid_p2)?;
            if a.exhaustive {
                grid = grid.exhaustive();
            }
            let mut spec = SweepSpec::new(a.axis, values, config)?;
            spec.settings = settings;
            spec.thetas = a.theta.clone();
            spec.report = a.report;
            spec.cross_validate = a.cross_validate;
            spec.grid = grid;
            run_sweep(&spec)?
        }
        Command::LowsnrReport(a) => lowsnr_table(&config, &settings, &a.p_d, &a.theta)?,
        Command::QueueValidate(a) => {
            let spec = QueueSpec {
                thetas: a.theta.clone(),
                frames: a.frames,
                seeds: a.seeds,
                arrival: a.arrival,
                tolerance: a.tolerance,
            };
            queue_table(&config, &settings, &spec)?
        }
        Command::MuVsP2(a) => mu_vs_p2_table(&config, &axis_values(a.from, a.to, a.step)?, &a.p_int)?,
    };
    Ok(table)
}

/// Writes through a sibling temporary file so a failed run leaves nothing behind.
fn write_output(out: Option<&Path>, csv: &str) -> Result<()> {
    let Some(path) = out else {
        std::io::stdout().lock().write_all(csv.as_bytes())?;
        return Ok(());
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let result = fs::write(&tmp, csv).and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(e).with_context(|| format!("writing {}", path.display()));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let table = build_table(cli)?;
    write_output(cli.global.out.as_deref(), &table.to_csv())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
