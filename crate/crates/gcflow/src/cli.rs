//! Command line: `gcflow <profile|evolve|lemma|report> [flags]`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::AppResult;
use crate::formats::write_atomic;
use crate::report::{aggregate, Summary};
use crate::run::{run_evolve, run_lemma, run_profile};

#[derive(Debug, Parser)]
#[command(
    name = "gcflow",
    version,
    about = "Powers-of-Gauss-curvature flow experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the self-similar profile.
    Profile(RunArgs),
    /// Evolve initial data and check the asymptotics.
    Evolve(RunArgs),
    /// Randomised sweep of the ratio bounds.
    Lemma(RunArgs),
    /// Aggregate PASS/FAIL lines of every summary under a directory.
    Report {
        /// Results directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `output.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Accepted for compatibility; runs are sequential.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Overrides `evolve.snapshot_every`.
    #[arg(long)]
    pub snapshot_every: Option<f64>,
}

fn load(args: &RunArgs) -> AppResult<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.output.seed = seed;
    }
    if args.snapshot_every.is_some() {
        cfg.evolve.snapshot_every = args.snapshot_every;
    }
    let dir = cfg.output.dir.clone();
    Ok((cfg, dir))
}

/// Runs one command and returns its summary.
pub fn execute(cli: &Cli) -> AppResult<Summary> {
    let args = match &cli.command {
        Command::Report { out } => return aggregate(out),
        Command::Profile(a) | Command::Evolve(a) | Command::Lemma(a) => a,
    };
    let (cfg, dir) = load(args)?;
    let exp = cfg.check()?;
    // The resolved configuration travels with the results.
    write_atomic(&dir.join("config.toml"), cfg.to_toml_string().as_bytes())?;
    Ok(match &cli.command {
        Command::Profile(_) => run_profile(&exp, &dir)?.summary,
        Command::Evolve(_) => run_evolve(&exp, &dir, None)?.summary,
        Command::Lemma(_) => run_lemma(&exp, &dir)?.summary,
        Command::Report { .. } => unreachable!("handled above"),
    })
}

/// Parses `argv`, runs, prints and returns the exit status: 0 when every
/// check passes, 1 on check failures, 2 on solver errors, 3 on bad configs.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            print!("{summary}");
            i32::from(!summary.all_pass())
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
