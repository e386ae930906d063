//! `ftlab`: fine-tuning laboratory for small dense networks.
//!
//! Exit codes: 0 success, 1 runtime failure (e.g. divergence), 2 invalid
//! configuration or inputs.

mod commands;
mod config;
mod experiment;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, FlatConfig};

#[derive(Parser)]
#[command(
    name = "ftlab",
    version,
    about = "Distance-constrained fine-tuning lab: pretrain, inject label noise, \
             fine-tune with projection and self-labeling, and diagnose runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `section.key = value` config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `out` key.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Global seed; overrides the config's `seed` key.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a source model from scratch and snapshot it.
    Pretrain(Common),
    /// Inject label noise and persist the dataset plus its record.
    #[command(name = "inject-noise")]
    InjectNoise(Common),
    /// Fine-tune (vanilla or constrained self-labeling) into a run directory.
    Train {
        #[command(flatten)]
        common: Common,
        /// Disable label correction (ablation).
        #[arg(long)]
        no_correction: bool,
        /// Disable loss reweighting (ablation).
        #[arg(long)]
        no_reweight: bool,
        /// Disable the distance constraints (ablation).
        #[arg(long)]
        no_regularization: bool,
    },
    /// Measure a snapshot against an anchor: distances, KL, perturbed loss,
    /// and the generalization bound.
    Diagnose {
        #[command(flatten)]
        common: Common,
        /// Weight snapshot to measure.
        #[arg(long)]
        snapshot: PathBuf,
        /// Anchor (pre-trained) weight snapshot.
        #[arg(long)]
        anchor: PathBuf,
    },
    /// Run a hyperparameter grid; summary selects by validation accuracy.
    Grid(Common),
}

/// Loads the config and applies flag overrides as config keys, so the
/// snapshot written into the run directory replays them.
fn load_config(common: &Common, flags: &[(&str, bool)]) -> anyhow::Result<(FlatConfig, PathBuf)> {
    let mut cfg = FlatConfig::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.set("seed", seed);
    }
    if let Some(out) = &common.out {
        cfg.set("out", out.display());
    }
    for (key, enabled) in flags {
        if *enabled {
            cfg.set(key, true);
        }
    }
    let out = match cfg.get_raw("out") {
        Some(path) => PathBuf::from(path),
        None => {
            return Err(
                ConfigError("out: missing (set the `out` key or pass --out)".into()).into(),
            )
        }
    };
    Ok((cfg, out))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Pretrain(common) => {
            let (cfg, out) = load_config(common, &[])?;
            commands::cmd_pretrain(&cfg, &out)
        }
        Command::InjectNoise(common) => {
            let (cfg, out) = load_config(common, &[])?;
            commands::cmd_inject_noise(&cfg, &out)
        }
        Command::Train {
            common,
            no_correction,
            no_reweight,
            no_regularization,
        } => {
            let (cfg, out) = load_config(
                common,
                &[
                    ("train.no_correction", *no_correction),
                    ("train.no_reweight", *no_reweight),
                    ("train.no_regularization", *no_regularization),
                ],
            )?;
            commands::cmd_train(&cfg, &out).map(|_| ())
        }
        Command::Diagnose {
            common,
            snapshot,
            anchor,
        } => {
            let (cfg, out) = load_config(common, &[])?;
            commands::cmd_diagnose(&cfg, snapshot, anchor, &out)
        }
        Command::Grid(common) => {
            let (cfg, out) = load_config(common, &[])?;
            commands::cmd_grid(&cfg, &out)
        }
    }
}

/// Invalid config or inputs exit with 2, runtime failures with 1.
fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 2;
        }
        if let Some(core) = cause.downcast_ref::<ftlab_core::Error>() {
            return if core.is_invalid_input() { 2 } else { 1 };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}
