//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::manifest::{validate, Experiment, Overrides};
use crate::output::Status;
use crate::run::execute;

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "TALBOT_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_GATE_FAILED: i32 = 1;
pub const EXIT_MANIFEST: i32 = 2;
pub const EXIT_ABORTED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "talbot", version, about = "Run periodic NLS dispersive-quantization experiments")]
pub struct Cli {
    /// Run manifest (TOML, `version = 1`).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Output directory; overrides `outputs.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to $TALBOT_THREADS, then 1.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Suppress progress messages.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, Subcommand)]
pub enum Command {
    /// Solve the cubic equation and record snapshots and conservation.
    Evolve,
    /// Gauss-sum translate tables checked against the exact propagator.
    Quantize,
    /// Grid increments and graph dimensions at rational and irrational times.
    Dichotomy,
    /// Coefficient decay of the nonlinear remainder against the datum.
    Smoothing,
    /// Supremum of the lattice-sum ratio over two ranges.
    LemmaScan,
    /// Nonlinear remainder against the first Picard iterate.
    PicardCheck,
    /// Print the resolved manifest without running anything.
    Validate,
}

impl Command {
    fn experiment(self) -> Option<Experiment> {
        match self {
            Command::Evolve => Some(Experiment::Evolve),
            Command::Quantize => Some(Experiment::Quantize),
            Command::Dichotomy => Some(Experiment::Dichotomy),
            Command::Smoothing => Some(Experiment::Smoothing),
            Command::LemmaScan => Some(Experiment::LemmaScan),
            Command::PicardCheck => Some(Experiment::PicardCheck),
            Command::Validate => None,
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<usize, String> {
    if let Some(n) = flag {
        return Ok(n.max(1));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(|n| n.max(1))
            .map_err(|_| format!("{THREADS_ENV}: expected a positive integer, got {v:?}")),
        Err(_) => Ok(1),
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_MANIFEST } else { EXIT_OK };
        }
    };
    run_cli(&cli)
}

pub fn run_cli(cli: &Cli) -> i32 {
    let text = match &cli.manifest {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return EXIT_MANIFEST;
            }
        },
        None => "version = 1\n".to_string(),
    };
    let overrides = Overrides {
        experiment: cli.command.experiment(),
        out_dir: cli.out.clone(),
    };
    let manifest = match validate(&text, &overrides) {
        Ok(m) => m,
        Err(errors) => {
            for e in &errors.0 {
                eprintln!("error: {e}");
            }
            return EXIT_MANIFEST;
        }
    };
    if let Command::Validate = cli.command {
        print!("{}", manifest.to_toml());
        return EXIT_OK;
    }
    let threads = match thread_count(cli.threads) {
        Ok(n) => n,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_MANIFEST;
        }
    };
    if !cli.quiet {
        eprintln!(
            "running {} on {} modes -> {}",
            manifest.experiment,
            manifest.grid.n_modes,
            manifest.outputs.dir.display()
        );
    }
    let outcome = match execute(&manifest, threads) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ABORTED;
        }
    };
    let summary = &outcome.summary;
    if !cli.quiet {
        for gate in &summary.gates {
            let mark = if gate.passed { "pass" } else { "FAIL" };
            eprintln!("  [{mark}] {}: {}", gate.name, gate.detail);
        }
    }
    if let Some(e) = &summary.error {
        eprintln!("error: run aborted: {e} (partial artifacts kept)");
    }
    match summary.status {
        Status::Passed => EXIT_OK,
        Status::GateFailed => EXIT_GATE_FAILED,
        Status::Aborted => EXIT_ABORTED,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn global_flags_follow_the_subcommand() {
        let cli = Cli::try_parse_from(["talbot", "quantize", "--threads", "2", "--quiet"]).unwrap();
        assert_eq!(cli.threads, Some(2));
        assert!(cli.quiet);
        assert!(matches!(cli.command, Command::Quantize));
    }

    #[test]
    fn explicit_threads_beat_the_environment() {
        assert_eq!(thread_count(Some(3)), Ok(3));
        assert_eq!(thread_count(Some(0)), Ok(1));
    }
}
