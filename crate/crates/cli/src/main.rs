mod args;
mod commands;
mod config;
mod error;
mod input;
mod output;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::config::{Format, RunConfig};
use crate::error::{config as config_error, CliResult};

/// Global settings after merging flags over the config file.
pub struct Context {
    pub cfg: RunConfig,
    pub format: Format,
    pub output: Option<std::path::PathBuf>,
    pub seed: Option<u64>,
    pub verbose: bool,
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let name = match &cli.command {
        Command::Residuals(_) => "residuals",
        Command::Corr(_) => "corr",
        Command::Theory(_) => "theory",
        Command::Ensemble(_) => "ensemble",
        Command::Contribution(_) => "contribution",
        Command::Simulate(_) => "simulate",
    };
    if let Some(sub) = &cfg.subcommand {
        if sub != name {
            return Err(config_error(format!("config is for subcommand '{sub}' but '{name}' was run")));
        }
    }
    let ctx = Context {
        format: cli.format.or(cfg.format).unwrap_or_default(),
        output: cli.output.clone().or_else(|| cfg.output.clone()),
        seed: cli.seed.or(cfg.seed),
        verbose: cli.verbose || cfg.verbose.unwrap_or(false),
        cfg,
    };
    match &cli.command {
        Command::Residuals(a) => commands::residuals(&ctx, a),
        Command::Corr(a) => commands::corr(&ctx, a),
        Command::Theory(a) => commands::theory(&ctx, a),
        Command::Ensemble(a) => commands::ensemble(&ctx, a),
        Command::Contribution(a) => commands::contribution(&ctx, a),
        Command::Simulate(a) => commands::simulate(&ctx, a),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(e.exit_code());
    }
}
