//! Shared assembly: turn a config into data, splits, noise, and networks.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ndarray::Array2;

use ftlab_core::data::{self, Split};
use ftlab_core::nn::Activation;
use ftlab_core::noise::{self, AuxNoiseConfig, NoisyDataset};
use ftlab_core::seed::derive_seed;
use ftlab_core::trainer::{LrSchedule, NetSpec, TrainConfig};
use ftlab_core::{DistanceSchedule, SelfLabelConfig};

use crate::config::{ConfigError, FlatConfig};

pub struct ResolvedData {
    /// All rows, standardized if configured.
    pub features: Array2<f64>,
    /// True labels, 0-based contiguous.
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub split: Split,
    /// Train-split rows reserved for the correlated-noise auxiliary network.
    pub heldout: Vec<usize>,
    /// Train-split rows that make up the (possibly noisy) training set.
    pub target_train: Vec<usize>,
}

pub fn resolve_data(cfg: &FlatConfig, seed: u64) -> Result<ResolvedData> {
    let source = cfg.get_str_or("data.source", "blobs");
    let (mut features, labels, num_classes, default_standardize) = match source.as_str() {
        "blobs" => {
            let n = cfg.require_usize("data.n")?;
            let d = cfg.require_usize("data.d")?;
            let k = cfg.require_usize("data.classes")?;
            let separation = cfg.get_f64_or("data.separation", 3.0)?;
            let (features, labels) = data::make_blobs(n, d, k, separation, seed)?;
            (features, labels, k, false)
        }
        "csv" => {
            let path = PathBuf::from(cfg.require_str("data.csv_path")?);
            if !path.exists() {
                return Err(ConfigError(format!(
                    "data.csv_path: file not found: {}",
                    path.display()
                ))
                .into());
            }
            let loaded = data::load_csv(&path)
                .with_context(|| format!("data.csv_path: failed to load {}", path.display()))?;
            (loaded.features, loaded.labels, loaded.num_classes, true)
        }
        other => {
            return Err(ConfigError(format!(
                "data.source: expected blobs or csv, got `{other}`"
            ))
            .into())
        }
    };

    let fractions = (
        cfg.get_f64_or("split.train", 0.8)?,
        cfg.get_f64_or("split.val", 0.1)?,
        cfg.get_f64_or("split.test", 0.1)?,
    );
    let split = data::split(features.nrows(), fractions, seed)?;
    if split.train.is_empty() {
        return Err(ConfigError("split.train: training split is empty".into()).into());
    }

    if cfg.get_bool_or("data.standardize", default_standardize)? {
        data::standardize(&mut features, &split.train)?;
    }

    let noise_kind = cfg.get_str_or("noise.kind", "none");
    let (heldout, target_train) = if noise_kind == "correlated" {
        let fraction = cfg.get_f64_or("noise.heldout_fraction", 0.5)?;
        if !(0.0 < fraction && fraction < 1.0) {
            return Err(ConfigError(format!(
                "noise.heldout_fraction: {fraction} must be in (0, 1)"
            ))
            .into());
        }
        let cut = ((split.train.len() as f64 * fraction).ceil() as usize)
            .min(split.train.len() - 1)
            .max(1);
        (
            split.train[..cut].to_vec(),
            split.train[cut..].to_vec(),
        )
    } else {
        (Vec::new(), split.train.clone())
    };

    Ok(ResolvedData {
        features,
        labels,
        num_classes,
        split,
        heldout,
        target_train,
    })
}

pub struct TrainingSet {
    /// Rows `resolved.target_train`, in that order.
    pub ds: NoisyDataset,
    /// Metadata line for the noise record; `None` when no noise was applied.
    pub record_meta: Option<String>,
}

pub fn build_training_set(
    cfg: &FlatConfig,
    resolved: &ResolvedData,
    seed: u64,
) -> Result<TrainingSet> {
    let (features, labels) = data::take_rows(
        &resolved.features,
        &resolved.labels,
        &resolved.target_train,
    );
    let k = resolved.num_classes;
    let kind = cfg.get_str_or("noise.kind", "none");
    match kind.as_str() {
        "none" => Ok(TrainingSet {
            ds: NoisyDataset::clean(features, labels, k)?,
            record_meta: None,
        }),
        "independent" => {
            let rate = cfg.require_f64("noise.rate")?;
            let (noisy, _) = noise::inject_independent(&labels, rate, k, seed)?;
            let ds = NoisyDataset::with_noisy_labels(features, labels, noisy, k)?;
            let meta = format!(
                "kind=independent rate={rate} realized_rate={} seed={seed}",
                ds.realized_noise_rate()
            );
            Ok(TrainingSet {
                ds,
                record_meta: Some(meta),
            })
        }
        "correlated" => {
            let (held_features, held_labels) = data::take_rows(
                &resolved.features,
                &resolved.labels,
                &resolved.heldout,
            );
            let aux = AuxNoiseConfig {
                spec: NetSpec {
                    input_dim: resolved.features.ncols(),
                    hidden_widths: cfg
                        .get_usize_list("noise.aux_hidden")?
                        .or(cfg.get_usize_list("net.hidden")?)
                        .unwrap_or_else(|| vec![32]),
                    hidden_activation: activation(cfg, "net.activation")?,
                    num_classes: k,
                },
                learning_rate: cfg.get_f64_or("noise.aux_learning_rate", 0.1)?,
                batch_size: cfg.get_usize_or("noise.aux_batch_size", 32)?,
                target_accuracy: cfg.get_f64_or("noise.aux_target_accuracy", 0.75)?,
                max_epochs: cfg.get_usize_or("noise.aux_max_epochs", 200)?,
            };
            let outcome = noise::inject_correlated(
                &features,
                &labels,
                &held_features,
                &held_labels,
                &aux,
                derive_seed(seed, "noise"),
            )?;
            let meta = format!(
                "kind=correlated realized_rate={} aux_accuracy={} converged={} aux_epochs={} seed={seed}",
                outcome.realized_rate, outcome.aux_accuracy, outcome.converged, outcome.epochs_trained
            );
            let ds = NoisyDataset::with_noisy_labels(features, labels, outcome.labels, k)?;
            Ok(TrainingSet {
                ds,
                record_meta: Some(meta),
            })
        }
        "record" => {
            let path = PathBuf::from(cfg.require_str("noise.record_path")?);
            if !path.exists() {
                return Err(ConfigError(format!(
                    "noise.record_path: file not found: {}",
                    path.display()
                ))
                .into());
            }
            let file = std::fs::File::open(&path)?;
            let (meta, rows) = noise::read_noise_record(std::io::BufReader::new(file))?;
            let ds = noise::apply_noise_record(features, labels, &rows, k)?;
            Ok(TrainingSet {
                ds,
                record_meta: Some(meta),
            })
        }
        other => Err(ConfigError(format!(
            "noise.kind: expected none, independent, correlated, or record, got `{other}`"
        ))
        .into()),
    }
}

pub fn activation(cfg: &FlatConfig, key: &str) -> Result<Activation> {
    let name = cfg.get_str_or(key, "relu");
    Activation::from_name(&name).map_err(|e| ConfigError(format!("{key}: {e}")).into())
}

pub fn net_spec(cfg: &FlatConfig, input_dim: usize, num_classes: usize) -> Result<NetSpec> {
    Ok(NetSpec {
        input_dim,
        hidden_widths: cfg.get_usize_list("net.hidden")?.unwrap_or_else(|| vec![32]),
        hidden_activation: activation(cfg, "net.activation")?,
        num_classes,
    })
}

fn lr_schedule(cfg: &FlatConfig, key: &str) -> Result<LrSchedule> {
    match cfg.get_str_or(key, "none").as_str() {
        "none" => Ok(LrSchedule::Constant),
        "step" => Ok(LrSchedule::StepThirds),
        other => Err(ConfigError(format!("{key}: expected none or step, got `{other}`")).into()),
    }
}

/// Training hyperparameters from a config section (`pretrain` or `train`).
pub fn train_config(cfg: &FlatConfig, section: &str, seed: u64) -> Result<TrainConfig> {
    let key = |name: &str| format!("{section}.{name}");
    Ok(TrainConfig {
        learning_rate: cfg.get_f64_or(&key("learning_rate"), 0.05)?,
        batch_size: cfg.get_usize_or(&key("batch_size"), 32)?,
        epochs: cfg.get_usize_or(&key("epochs"), 30)?,
        seed,
        schedule: None,
        selflabel: None,
        eval_every: cfg.get_usize_or(&key("eval_every"), 1)?,
        lr_schedule: lr_schedule(cfg, &key("lr_decay"))?,
        snapshot_every: 0,
    })
}

/// The layer-wise schedule from `constraint.*`: an explicit radii list
/// overrides the `(base_d, gamma)` pair.
pub fn distance_schedule(cfg: &FlatConfig, num_layers: usize) -> Result<Option<DistanceSchedule>> {
    if let Some(radii) = cfg.get_f64_list("constraint.radii")? {
        if radii.len() != num_layers {
            return Err(ConfigError(format!(
                "constraint.radii: {} radii for a {num_layers}-layer network",
                radii.len()
            ))
            .into());
        }
        return Ok(Some(DistanceSchedule::new(radii)?));
    }
    match cfg.get_f64("constraint.base_d")? {
        Some(base_d) => {
            let gamma = cfg.get_f64_or("constraint.gamma", 1.0)?;
            Ok(Some(DistanceSchedule::exponential(
                base_d, gamma, num_layers,
            )?))
        }
        None => Ok(None),
    }
}

/// Self-labeling config; start indices given in epochs are converted to
/// steps using the training-set size and batch size (`*_step` keys win).
pub fn selflabel_config(
    cfg: &FlatConfig,
    steps_per_epoch: u64,
    ignore_correction: bool,
    ignore_reweight: bool,
) -> Result<Option<SelfLabelConfig>> {
    if !cfg.get_bool_or("selflabel.enabled", false)? {
        return Ok(None);
    }
    let start = |step_key: &str, epoch_key: &str, default_epochs: u64| -> Result<u64> {
        if let Some(step) = cfg.get_usize(step_key)? {
            return Ok(step as u64);
        }
        let epochs = cfg.get_u64_or(epoch_key, default_epochs)?;
        Ok(epochs.saturating_mul(steps_per_epoch))
    };
    let correction_start = if ignore_correction {
        u64::MAX
    } else {
        start(
            "selflabel.correction_start_step",
            "selflabel.correction_start_epoch",
            5,
        )?
    };
    let reweight_start = if ignore_reweight {
        u64::MAX
    } else {
        start(
            "selflabel.reweight_start_step",
            "selflabel.reweight_start_epoch",
            3,
        )?
    };
    let config = SelfLabelConfig {
        correction_start,
        correction_threshold: cfg.get_f64_or("selflabel.correction_threshold", 0.90)?,
        reweight_start,
        temperature: cfg.get_f64_or("selflabel.temperature", 1.0)?,
    };
    config.validate()?;
    Ok(Some(config))
}

/// Creates the run directory and writes the resolved config snapshot.
pub fn prepare_run_dir(out: &Path, cfg: &FlatConfig) -> Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.txt"), cfg.to_text())?;
    Ok(())
}
