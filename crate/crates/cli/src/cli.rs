//! Command-line front end. Exit codes: 0 ok, 1 configuration error,
//! 2 numerical error, 3 I/O error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use psbr::dipole_geometry::ubiquity_check;
use psbr::DipoleVector;
use serde::Deserialize;

use crate::catalog;
use crate::config::{load_config, to_json, ExperimentConfig, LoadError};
use crate::field::run_field;
use crate::run::{json, run_experiment, run_steady_state, run_sweep, Bundle, RunError};

#[derive(Parser, Debug)]
#[command(name = "psbr", version, about = "Partial-secular Bloch-Redfield dynamics of a four-level system")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct Source {
    /// Experiment config (JSON).
    #[arg(long, value_name = "FILE", conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in preset: fig2, fig3, figS1, figS2, figS3 or figS4.
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Propagate one configuration and write trajectory, metrics and manifest.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Run the config's sweep section.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Worker threads; the output does not depend on it.
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
    /// Null-space steady state checked against long-run propagation.
    SteadyState {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
    /// Largest pairwise alignment of a set of transition dipoles.
    Ubiquity {
        /// JSON list of dipoles, each [x, y, z] or {"label": ..., "components": [x, y, z]}.
        #[arg(long, value_name = "FILE")]
        dipoles: PathBuf,
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
    },
    /// Stochastic-field visibility and pulse-coherence tables.
    Field {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        /// Write tables here instead of printing them.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
    /// List the presets, or write each as a config file into DIR.
    Presets {
        #[arg(long, value_name = "DIR")]
        write: Option<PathBuf>,
    },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure {
            code: e.exit_code(),
            message: e.to_string(),
        }
    }
}

fn config_failure(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    load_config(path).map_err(|e| match e {
        LoadError::Io(e) => io_failure(path, e),
        LoadError::Config(e) => config_failure(format!("{}: {e}", path.display())),
    })
}

fn resolve(src: &Source) -> Result<ExperimentConfig, Failure> {
    match (&src.config, &src.preset) {
        (Some(p), _) => load(p),
        (None, Some(name)) => catalog::by_name(name).ok_or_else(|| {
            config_failure(format!("unknown preset `{name}`; known: {}", catalog::NAMES.join(", ")))
        }),
        (None, None) => Err(config_failure("give --config or --preset")),
    }
}

fn out_dir(cli: &Option<PathBuf>, cfg: &ExperimentConfig) -> Result<PathBuf, Failure> {
    cli.clone()
        .or_else(|| cfg.output.directory.as_ref().map(PathBuf::from))
        .ok_or_else(|| config_failure("no output directory: pass --out or set output.directory"))
}

fn write(b: &Bundle, dir: &Path) -> Result<(), Failure> {
    b.write(dir)?;
    for n in b.names() {
        log::info!("wrote {}", dir.join(n).display());
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DipoleInput {
    Labeled(DipoleVector),
    Bare([f64; 3]),
}

fn load_dipoles(path: &Path) -> Result<Vec<DipoleVector>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let items: Vec<DipoleInput> = serde_json::from_str(&text).map_err(|e| {
        config_failure(format!(
            "{}: line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    Ok(items
        .into_iter()
        .enumerate()
        .map(|(k, d)| match d {
            DipoleInput::Labeled(v) => v,
            DipoleInput::Bare(c) => DipoleVector::new(format!("d{k}"), c),
        })
        .collect())
}

pub fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { source, out } => {
            let cfg = resolve(&source)?;
            let dir = out_dir(&out, &cfg)?;
            let (res, b) = run_experiment(&cfg)?;
            write(&b, &dir)?;
            let a = res.metrics.audit;
            log::info!(
                "{}: {} times, trace drift {:e}, min population {:e}",
                cfg.name,
                res.trajectory.len(),
                a.max_trace_drift,
                a.min_population
            );
        }
        Command::Sweep { source, out, jobs } => {
            let cfg = resolve(&source)?;
            let dir = out_dir(&out, &cfg)?;
            let (table, b) = run_sweep(&cfg, jobs)?;
            write(&b, &dir)?;
            let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                log::warn!("{failed} of {} sweep points failed", table.rows.len());
            }
        }
        Command::SteadyState { source, jobs } => {
            let cfg = resolve(&source)?;
            let reports = run_steady_state(&cfg, jobs)?;
            print!("{}", json(&reports));
        }
        Command::Ubiquity { dipoles, tolerance } => {
            let d = load_dipoles(&dipoles)?;
            let report = ubiquity_check(&d, tolerance).map_err(|e| config_failure(e.to_string()))?;
            print!("{}", json(&report));
        }
        Command::Field { config, out, jobs } => {
            let cfg = load(&config)?;
            let (_, b) = run_field(&cfg, jobs)?;
            match out {
                Some(dir) => write(&b, &dir)?,
                None => {
                    for (name, contents) in b.files.iter().filter(|(n, _)| n.ends_with(".csv")) {
                        println!("# {name}");
                        print!("{contents}");
                    }
                }
            }
        }
        Command::Presets { write: None } => {
            for c in catalog::all() {
                println!("{}\t{}", c.name, c.comment);
            }
        }
        Command::Presets { write: Some(dir) } => {
            let mut b = Bundle::default();
            for c in catalog::all() {
                b.add(format!("{}.json", c.name), to_json(&c));
            }
            write(&b, &dir)?;
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Usage errors count as configuration errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
