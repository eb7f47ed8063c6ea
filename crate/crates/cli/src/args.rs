//! Command-line arguments.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use svilab_core::metrics::RConvention;

use crate::commands::{cmd_bound, cmd_check, cmd_run};
use crate::config::{parse_config_file, OutputFormat, Overrides};

#[derive(Debug, Parser)]
#[command(name = "svilab", version, about = "Stochastic relaxed forward-backward experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Trace file path (overrides `output`).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
    /// Master seed (overrides `master_seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub log_every: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub r_convention: Option<RConventionArg>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every configured algorithm and write the trace file.
    Run { config: PathBuf },
    /// Report which convergence premises each configured run satisfies.
    Check { config: PathBuf },
    /// Compare the averaged-iterate bound with measured gap lower bounds.
    Bound { config: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RConventionArg {
    Diameter,
    DiameterSq,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            output: self.output.clone(),
            format: self.format.map(|f| match f {
                FormatArg::Csv => OutputFormat::Csv,
                FormatArg::Jsonl => OutputFormat::Jsonl,
            }),
            seed: self.seed,
            workers: self.workers,
            log_every: self.log_every,
            r_convention: self.r_convention.map(|r| match r {
                RConventionArg::Diameter => RConvention::Diameter,
                RConventionArg::DiameterSq => RConvention::DiameterSq,
            }),
        }
    }
}

/// Runs a parsed command line; reports go to `out`, errors to `err`.
pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let path = match &cli.command {
        Command::Run { config } | Command::Check { config } | Command::Bound { config } => config,
    };
    let result = parse_config_file(path, &cli.overrides())
        .map_err(crate::CliError::from)
        .and_then(|cfg| match cli.command {
            Command::Run { .. } => cmd_run(&cfg, out),
            Command::Check { .. } => cmd_check(&cfg, out),
            Command::Bound { .. } => cmd_bound(&cfg, out),
        });
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
