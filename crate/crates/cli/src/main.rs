//! `flexca`: validate scenarios, run them, and sweep them into CSV tables.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flexca::experiments::{seed_list, sweep, write_report_csv, Axis, SweepError};
use flexca::scenario::{render_diagnostics, Scenario, ScenarioError};
use flexca::sim::{run, SimError};
use flexca::tx_switching::FrameworkVariant;

const EXIT_PARSE: u8 = 3;
const EXIT_INVALID: u8 = 4;
const EXIT_RUNTIME: u8 = 5;
const EXIT_IO: u8 = 6;

#[derive(Parser)]
#[command(name = "flexca", version, about = "Flexible DL/UL carrier aggregation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and list every violation.
    Validate { path: PathBuf },
    /// Run one seed and write its metrics as a one-row CSV.
    Run {
        path: PathBuf,
        /// Defaults to 0.
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; defaults to `<out-dir>/<scenario>-seed<seed>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "FLEXCA_OUT_DIR", default_value = "results")]
        out_dir: PathBuf,
        /// Comparison arm (baseline, f1, f2) replacing the scenario's switching setup.
        #[arg(long)]
        framework: Option<FrameworkVariant>,
    },
    /// Sweep one axis over several seeds into a plot-ready CSV.
    Sweep {
        path: PathBuf,
        #[arg(long)]
        axis: Axis,
        /// Number of seeds; defaults to the scenario's `experiment.seeds`.
        #[arg(long)]
        seeds: Option<u32>,
        /// First seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; defaults to `<out-dir>/<scenario>-<axis>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "FLEXCA_OUT_DIR", default_value = "results")]
        out_dir: PathBuf,
        /// Worker threads; results do not depend on it.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Parse(m) => Failure::new(EXIT_PARSE, format!("parse error: {m}")),
            ScenarioError::Invalid(d) => {
                Failure::new(EXIT_INVALID, format!("validation failed:\n{}", render_diagnostics(&d)))
            }
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Scenario(s) => s.into(),
            other => Failure::new(EXIT_RUNTIME, other.to_string()),
        }
    }
}

impl From<SweepError> for Failure {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Sim(s) => s.into(),
            SweepError::AxisMismatch { .. } => Failure::new(EXIT_INVALID, e.to_string()),
            other => Failure::new(EXIT_RUNTIME, other.to_string()),
        }
    }
}

fn read_scenario(path: &Path) -> Result<Scenario, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::new(EXIT_IO, format!("cannot read {}: {e}", path.display())))?;
    Ok(Scenario::load(&text)?)
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so `path` is either complete or absent.
fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::new(EXIT_IO, format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    fill(tmp.as_file_mut()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn file_stem(s: &Scenario) -> String {
    s.name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { path } => {
            let s = read_scenario(&path)?;
            println!("{}: ok ({} cells, digest {})", path.display(), s.plan.configured_cells.len(), s.digest());
        }
        Command::Run { path, seed, out, out_dir, framework } => {
            let s = read_scenario(&path)?;
            let seed_defaulted = seed.is_none();
            let seed = seed.unwrap_or(0);
            if seed_defaulted {
                eprintln!("note: no --seed given, using seed 0");
            }
            let report = run(&s, seed, framework)?;
            let out = out.unwrap_or_else(|| out_dir.join(format!("{}-seed{seed}.csv", file_stem(&s))));
            write_atomic(&out, |w| write_report_csv(&report, seed_defaulted, w).map_err(std::io::Error::other))?;
            println!(
                "seed {seed}{}: mean UPT {:.3} Mbit/s over {} files, wrote {}",
                if seed_defaulted { " (default)" } else { "" },
                report.mean_upt_mbps,
                report.completed_files,
                out.display()
            );
        }
        Command::Sweep { path, axis, seeds, seed, out, out_dir, jobs } => {
            let s = read_scenario(&path)?;
            let seeds = seed_list(seed, seeds.unwrap_or(s.experiment.seeds));
            let table = sweep(&s, axis, &seeds, jobs)?;
            let out = out.unwrap_or_else(|| out_dir.join(format!("{}-{axis}.csv", file_stem(&s))));
            write_atomic(&out, |w| table.write_csv(w).map_err(std::io::Error::other))?;
            println!(
                "{axis}: {} points x {} seeds, wrote {}",
                table.aggregates.len(),
                seeds.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
