//! Experiment driver for the `fracperim` binary.
//!
//! Every subcommand loads an [`ExperimentConfig`], writes its artifacts plus
//! the effective `config.toml` into the output directory and returns an
//! [`Outcome`]. Exit codes: 0 pass, 2 property violated, 3 bad
//! configuration, 4 I/O failure.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod shapes;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use experiments::Outcome;

use output::OutDir;

#[derive(Debug, Parser)]
#[command(name = "fracperim", version, about = "Fractional perimeter minimization experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Record wall-clock time in reports (breaks byte-identical reruns).
    #[arg(long)]
    pub timing: bool,
    /// Configuration overrides as `section.key=value`.
    #[arg(value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decomposition identities on random set pairs.
    IdentityCheck {
        #[command(flatten)]
        common: Common,
        /// Scale every cross term by a small factor so the identities must fail.
        #[arg(long)]
        perturb_weights: bool,
    },
    /// Disk against square, rectangle and plus of equal cell count.
    Isoperimetric {
        #[command(flatten)]
        common: Common,
    },
    /// Rescaled asymmetry of small-volume minimizers.
    SmallVolume {
        #[command(flatten)]
        common: Common,
    },
    /// Dilation law of the energy.
    ScalingCheck {
        #[command(flatten)]
        common: Common,
    },
    /// Constancy of `H_s - g` along the boundary.
    MuCheck {
        #[command(flatten)]
        common: Common,
        /// `minimizer`, `disk`, `square`, `rectangle`, `plus`, `file` or `slab`.
        #[arg(long)]
        shape: Option<String>,
    },
    /// One minimization run.
    Minimize {
        #[command(flatten)]
        common: Common,
        /// Compare against exhaustive enumeration (tiny windows only).
        #[arg(long)]
        verify_oracle: bool,
    },
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::IdentityCheck { common, .. }
            | Command::Isoperimetric { common }
            | Command::SmallVolume { common }
            | Command::ScalingCheck { common }
            | Command::MuCheck { common, .. }
            | Command::Minimize { common, .. } => common,
        }
    }
}

/// Resolves defaults < file < overrides < named flags.
pub fn resolve_config(command: &Command) -> Result<ExperimentConfig> {
    let common = command.common();
    let mut cfg = ExperimentConfig::load(common.config.as_deref(), &common.overrides)?;
    if let Some(seed) = common.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.experiment.out = out.clone();
    }
    if common.timing {
        cfg.experiment.timing = true;
    }
    if let Command::MuCheck { shape: Some(shape), .. } = command {
        cfg.mu.shape = shape.clone();
    }
    Ok(cfg)
}

/// Runs a subcommand on an already resolved configuration.
pub fn execute(command: &Command, cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = OutDir::create(&cfg.experiment.out)?;
    out.text("config.toml", &cfg.to_toml())?;
    match command {
        Command::IdentityCheck { perturb_weights, .. } => experiments::identity::run(cfg, *perturb_weights, &mut out),
        Command::Isoperimetric { .. } => experiments::isoperimetric::run(cfg, &mut out),
        Command::SmallVolume { .. } => experiments::small_volume::run(cfg, &mut out),
        Command::ScalingCheck { .. } => experiments::scaling::run(cfg, &mut out),
        Command::MuCheck { .. } => experiments::mu::run(cfg, &mut out),
        Command::Minimize { verify_oracle, .. } => experiments::minimize::run(cfg, *verify_oracle, &mut out),
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = resolve_config(&cli.command)?;
    execute(&cli.command, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_overrides() {
        let cli = Cli::try_parse_from([
            "fracperim",
            "mu-check",
            "--seed",
            "7",
            "--shape",
            "disk",
            "experiment.seed=3",
            "mu.shape=square",
        ])
        .unwrap();
        let cfg = resolve_config(&cli.command).unwrap();
        assert_eq!(cfg.experiment.seed, 7);
        assert_eq!(cfg.mu.shape, "disk");
    }

    #[test]
    fn every_subcommand_parses() {
        for sub in ["identity-check", "isoperimetric", "small-volume", "scaling-check", "mu-check", "minimize"] {
            assert!(Cli::try_parse_from(["fracperim", sub, "--out", "x"]).is_ok(), "{sub}");
        }
        assert!(Cli::try_parse_from(["fracperim", "identity-check", "--perturb-weights"]).is_ok());
        assert!(Cli::try_parse_from(["fracperim", "minimize", "--verify-oracle"]).is_ok());
    }
}
