//! Command-line experiment runner for `hawkes-renewal`.
//!
//! Every command reads one [`config::ExperimentConfig`] (TOML), lets flags
//! override it, and writes its outputs plus a `manifest.json` into the
//! configured output directory.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod output;
pub mod validate;

use config::{ExperimentConfig, GridSpec, Member, Source};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Failed(String),
    #[error(transparent)]
    Model(#[from] hawkes_renewal::Error),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        use hawkes_renewal::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Model(E::InvalidKernel(_) | E::InvalidParameter { .. }) => 2,
            CliError::Io { .. } => 3,
            CliError::Failed(_) | CliError::Model(_) => 1,
        }
    }
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn exit_code(self) -> u8 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hawkes-renewal",
    version,
    about = "Simulate and analyse Hawkes processes with inhibition"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML experiment file; flags override its values.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Kernel as start:end:value segments separated by commas.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub kernel: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub horizon: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub replicas: Option<u64>,
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one events CSV per replica (and per coupled kernel).
    Simulate {
        /// Coupled members, e.g. h,h+ or h,g.
        #[arg(long, value_delimiter = ',')]
        coupling: Vec<Member>,
        #[arg(long)]
        max_events: Option<usize>,
    },
    /// Cut paths into renewal windows.
    Decompose {
        #[command(flatten)]
        input: WindowInput,
    },
    /// Law-of-large-numbers and CLT estimates from renewal windows.
    Estimate {
        #[command(flatten)]
        input: WindowInput,
    },
    /// Tabulate the rate function J.
    Rate {
        #[arg(long, value_enum)]
        source: Option<Source>,
        /// start:stop:step
        #[arg(long)]
        grid: Option<GridSpec>,
        #[arg(long)]
        windows: Option<usize>,
    },
    /// Closed-form constants for the configured kernel.
    Oracle,
    /// Run an invariant suite; exits 1 if any check fails.
    Validate {
        #[arg(long)]
        suite: Option<String>,
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        windows: Option<usize>,
    },
    /// Exponents of the deviation bounds for N_t / t.
    Deviations {
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        kappa_prime: Option<f64>,
        #[arg(long, value_enum)]
        source: Option<Source>,
    },
}

#[derive(Debug, Args)]
pub struct WindowInput {
    /// Events CSVs to read instead of simulating.
    #[arg(long, num_args = 1..)]
    pub events: Vec<PathBuf>,
    /// Simulate until this many windows close.
    #[arg(long)]
    pub windows: Option<usize>,
}

/// Writes a line to stdout, ignoring a closed pipe.
pub(crate) fn emit(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

/// Configuration file (or defaults) with every flag applied.
pub fn resolve(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let g = &cli.global;
    let mut cfg = match &g.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = g.lambda {
        cfg.lambda = Some(v);
    }
    if let Some(k) = &g.kernel {
        cfg.kernel = config::parse_kernel(k).map_err(CliError::Config)?;
    }
    if let Some(v) = g.horizon {
        cfg.horizon = v;
    }
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    if let Some(v) = g.replicas {
        cfg.replicas = v;
    }
    if let Some(v) = g.parallelism {
        cfg.parallelism = v;
    }
    if let Some(v) = &g.output {
        cfg.output = v.clone();
    }
    match &cli.command {
        Command::Simulate {
            coupling,
            max_events,
        } => {
            if !coupling.is_empty() {
                cfg.simulate.coupling = coupling.clone();
            }
            if max_events.is_some() {
                cfg.simulate.max_events = *max_events;
            }
        }
        Command::Decompose { input } | Command::Estimate { input } => {
            if input.windows.is_some() {
                cfg.windows.count = input.windows;
            }
        }
        Command::Rate {
            source,
            grid,
            windows,
        } => {
            if source.is_some() {
                cfg.rate.source = *source;
            }
            if let Some(g) = grid {
                cfg.rate.grid = g.clone();
            }
            if let Some(n) = windows {
                cfg.rate.windows = *n;
            }
        }
        Command::Oracle => {}
        Command::Validate {
            suite,
            seeds,
            windows,
        } => {
            if suite.is_some() {
                cfg.validate.suite = suite.clone();
            }
            if let Some(v) = seeds {
                cfg.validate.seeds = *v;
            }
            if let Some(v) = windows {
                cfg.validate.windows = *v;
            }
        }
        Command::Deviations {
            a,
            kappa,
            kappa_prime,
            source,
        } => {
            if a.is_some() {
                cfg.deviations.a = *a;
            }
            if let Some(v) = kappa {
                cfg.deviations.kappa = *v;
            }
            if let Some(v) = kappa_prime {
                cfg.deviations.kappa_prime = *v;
            }
            if source.is_some() {
                cfg.deviations.source = *source;
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<Verdict, CliError> {
    let cfg = resolve(cli)?;
    match &cli.command {
        Command::Simulate { .. } => commands::simulate(&cfg),
        Command::Decompose { input } => commands::decompose_cmd(&cfg, &input.events),
        Command::Estimate { input } => commands::estimate(&cfg, &input.events),
        Command::Rate { .. } => commands::rate(&cfg),
        Command::Oracle => commands::oracle(&cfg),
        Command::Validate { .. } => validate::validate(&cfg),
        Command::Deviations { .. } => commands::deviations(&cfg),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(v) => v.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
