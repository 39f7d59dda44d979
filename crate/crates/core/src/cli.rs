//! `otfs-sim` command-line front end.
//!
//! Exit status: 0 on success, 1 when a run or self-test fails, 2 on usage
//! errors (bad flags, unreadable config, unknown override keys).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::selftest;
use crate::sim::plot::emit_plot_data;
use crate::sim::{write_iterations, write_metadata, write_results, BerRecord, Runner, SimConfig};

pub const THREADS_ENV: &str = "OTFS_SIM_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "otfs-sim", version, about = "OTFS link-level Monte-Carlo simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct RunArgs {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Results CSV; a `.meta.toml` sidecar is written next to it.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Override a configuration value (repeatable), e.g. `--set snr_grid_db=8,10,12`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Override `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads [env: OTFS_SIM_THREADS; default: available parallelism].
    #[arg(long)]
    threads: Option<usize>,
    /// Suppress the per-point progress log on stderr.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one operating point and print its BER table.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// SNR in dB; defaults to the first entry of `snr_grid_db`.
        #[arg(long)]
        snr: Option<f64>,
        /// Maximum velocity in m/s; defaults to `channel.v_max`.
        #[arg(long)]
        velocity: Option<f64>,
    },
    /// BER versus SNR at `channel.v_max`.
    SweepSnr(RunArgs),
    /// BER versus maximum velocity for every SNR in the grid.
    SweepVelocity(RunArgs),
    /// BER after each iteration of the iterative detectors.
    SweepIterations(RunArgs),
    /// Run the built-in invariant checks.
    Selftest,
    /// Convert a results CSV into columnar `.dat` files for plotting.
    EmitPlotData {
        /// Results or iteration CSV written by a sweep.
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Output directory.
        #[arg(long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
    },
}

/// Failure classified by exit status.
enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn load_config(args: &RunArgs) -> Result<SimConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => SimConfig::load(path).map_err(usage)?,
        None => SimConfig::default(),
    };
    let items = args
        .overrides
        .iter()
        .map(|item| {
            item.split_once('=')
                .map(|(k, v)| (k.trim(), v))
                .ok_or_else(|| Failure::Usage(format!("override `{item}` is not of the form key=value")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    cfg.apply_overrides(&items).map_err(usage)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn thread_count(args: &RunArgs) -> Result<Option<usize>, Failure> {
    if args.threads.is_some() {
        return Ok(args.threads);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| Failure::Usage(format!("{THREADS_ENV}={v} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

fn log_record(r: &BerRecord) {
    eprintln!(
        "{:<10} snr {:>5} dB  v {:>6.1} km/h  {:>7} errors / {:>9} bits  BER {:.3e}  frames {}{}",
        r.detector.id(),
        r.snr_db,
        r.velocity_mps * 3.6,
        r.bit_errors,
        r.bits,
        r.ber,
        r.frames,
        if r.censored { "  (censored)" } else { "" }
    );
}

fn print_table(records: &[BerRecord]) {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let _ = writeln!(out, "detector    snr_db  velocity_kmh      ber        bit_errors  frames  mean_iters");
    for r in records {
        let _ = writeln!(
            out,
            "{:<10} {:>7} {:>13.1} {:>12.4e} {:>11} {:>7} {:>11.2}",
            r.detector.id(),
            r.snr_db,
            r.velocity_mps * 3.6,
            r.ber,
            r.bit_errors,
            r.frames,
            r.mean_iters
        );
    }
}

fn runner<'a>(cfg: &'a SimConfig, args: &RunArgs) -> Result<Runner<'a>, Failure> {
    let runner = Runner::new(cfg, thread_count(args)?).map_err(usage)?;
    Ok(if args.quiet { runner } else { runner.on_record(log_record) })
}

fn finish(records: &[BerRecord], cfg: &SimConfig, out: Option<&Path>) -> Result<(), Failure> {
    print_table(records);
    if let Some(path) = out {
        write_results(records, cfg, path)?;
    }
    Ok(())
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Simulate { run, snr, velocity } => {
            let cfg = load_config(&run)?;
            let snr = snr.unwrap_or(cfg.snr_grid_db[0]);
            let velocity = velocity.unwrap_or(cfg.channel.v_max);
            if !snr.is_finite() || !(velocity.is_finite() && velocity >= 0.0) {
                return Err(Failure::Usage(format!("invalid operating point: snr {snr}, velocity {velocity}")));
            }
            let records = runner(&cfg, &run)?.run_point(&cfg.detectors, snr, velocity, false)?.records;
            finish(&records, &cfg, run.out.as_deref())
        }
        Command::SweepSnr(run) => {
            let cfg = load_config(&run)?;
            let records = runner(&cfg, &run)?.sweep_snr()?;
            finish(&records, &cfg, run.out.as_deref())
        }
        Command::SweepVelocity(run) => {
            let cfg = load_config(&run)?;
            let records = runner(&cfg, &run)?.sweep_velocity()?;
            finish(&records, &cfg, run.out.as_deref())
        }
        Command::SweepIterations(run) => {
            let cfg = load_config(&run)?;
            let (records, table) = runner(&cfg, &run)?.sweep_iterations()?;
            print_table(&records);
            if let Some(path) = run.out.as_deref() {
                write_iterations(&table, path)?;
                write_metadata(&records, &cfg, path)?;
            }
            Ok(())
        }
        Command::Selftest => {
            let results = selftest::run_all();
            for c in &results {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if results.iter().all(|c| c.passed) {
                Ok(())
            } else {
                Err(Failure::Run("self-test failed".into()))
            }
        }
        Command::EmitPlotData { input, out } => {
            for path in emit_plot_data(&input, &out)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            EXIT_FAILURE
        }
    }
}
