//! `semfield` command line.
//!
//! Exit codes: 0 on success, 1 for usage and configuration errors, 2 for
//! failures after validation (I/O, corrupt inputs, training errors).

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use semfield::Error;

#[derive(Debug, Parser)]
#[command(name = "semfield", version, about = "Material-aware neural SDF mapping from simulated touch")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory. Nothing is written outside it.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Only print result lines.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a contact stream and dump it to `stream.sfts`.
    Simulate,
    /// Train a field on a simulated stream.
    Train {
        /// Independent runs with seeds `seed, seed+1, ...`, executed concurrently.
        #[arg(long, default_value_t = 1)]
        runs: u32,
    },
    /// Score a checkpoint on a freshly sampled ROI set.
    Evaluate {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// Scene file; defaults to the configured scene.
        #[arg(long, value_name = "PATH")]
        scene: Option<PathBuf>,
        /// Evaluation points; defaults to the configured count.
        #[arg(long)]
        points: Option<usize>,
        /// View direction of the mask image.
        #[arg(long, default_value = "z")]
        axis: String,
    },
    /// Extract the surface of a checkpoint as a colored PLY mesh.
    Export {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// Marching-cubes cells per axis; defaults to the configured resolution.
        #[arg(long)]
        resolution: Option<usize>,
        /// Scene file; when given, a difference-mask image is written too.
        #[arg(long, value_name = "PATH")]
        scene: Option<PathBuf>,
        #[arg(long, default_value = "z")]
        axis: String,
    },
    /// Train on a recorded stream instead of simulating one.
    Replay {
        #[arg(long, value_name = "PATH")]
        stream: PathBuf,
    },
}

/// Failure classes that map onto exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

pub(crate) fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

pub(crate) fn runtime(e: Error) -> Failure {
    Failure::Runtime(e.to_string())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = if cli.global.quiet { "error" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match commands::dispatch(&cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}
