//! Training loops: source pre-training, vanilla fine-tuning, and the full
//! constrained self-labeling fine-tune.
//!
//! All three share one inner loop so that degenerate configurations coincide
//! bit-for-bit: the constrained fine-tune with every radius infinite and
//! self-labeling disabled takes exactly the same arithmetic path as the
//! vanilla baseline. The loop is strictly sequential; per-epoch shuffles are
//! Fisher-Yates permutations drawn from seeds labeled `shuffle:<epoch>`.
//!
//! Step counting follows the optimizer: the counter `t` advances once per
//! mini-batch update, and both self-labeling start indices are compared
//! against it with strict `>`.

use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::constraint::{self, DistanceSchedule};
use crate::nn::{self, Activation, Gradients, Layer, Network};
use crate::noise::NoisyDataset;
use crate::seed::{derive_seed, rng_for};
use crate::selflabel::{self, CorrectionEvent, SelfLabelConfig};
use crate::{Error, Result};

/// Architecture of a fresh network: hidden widths with a shared activation,
/// then an identity-activated output layer of `num_classes` logits.
#[derive(Debug, Clone, PartialEq)]
pub struct NetSpec {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub hidden_activation: Activation,
    pub num_classes: usize,
}

impl NetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidParameter("input_dim must be positive".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidParameter(
                "num_classes must be at least 2".into(),
            ));
        }
        if self.hidden_widths.contains(&0) {
            return Err(Error::InvalidParameter(
                "hidden widths must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Seeded random initialization: weights uniform in
/// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
pub fn init_network(spec: &NetSpec, seed: u64) -> Result<Network> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(spec.hidden_widths.len() + 1);
    let mut in_dim = spec.input_dim;
    let widths = spec
        .hidden_widths
        .iter()
        .map(|&w| (w, spec.hidden_activation))
        .chain(std::iter::once((spec.num_classes, Activation::Identity)));
    for (out_dim, activation) in widths {
        let limit = 1.0 / (in_dim as f64).sqrt();
        let weights =
            Array2::from_shape_fn((out_dim, in_dim), |_| rng.random_range(-limit..limit));
        let bias = ndarray::Array1::zeros(out_dim);
        layers.push(Layer::new(weights, bias, activation)?);
        in_dim = out_dim;
    }
    Network::new(layers, spec.num_classes)
}

/// Learning-rate schedule over epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Multiply by 0.1 at each third of training (e.g. epochs 10 and 20 of 30).
    StepThirds,
}

/// Hyperparameters of one training run. Absent `schedule` means no
/// projection; absent `selflabel` means plain unweighted losses.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub schedule: Option<DistanceSchedule>,
    pub selflabel: Option<SelfLabelConfig>,
    /// Emit a metrics row every `eval_every` epochs (the final epoch always
    /// gets a row).
    pub eval_every: usize,
    pub lr_schedule: LrSchedule,
    /// Collect a weight snapshot every this many epochs (0 disables); the
    /// snapshots come back in [`FinetuneOutput::epoch_snapshots`].
    pub snapshot_every: usize,
}

impl TrainConfig {
    pub fn new(learning_rate: f64, batch_size: usize, epochs: usize, seed: u64) -> Self {
        TrainConfig {
            learning_rate,
            batch_size,
            epochs,
            seed,
            schedule: None,
            selflabel: None,
            eval_every: 1,
            lr_schedule: LrSchedule::Constant,
            snapshot_every: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "learning rate {} must be finite and >= 0",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be >= 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidParameter("eval_every must be >= 1".into()));
        }
        if let Some(sl) = &self.selflabel {
            sl.validate()?;
        }
        Ok(())
    }

    fn learning_rate_at(&self, epoch: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.learning_rate,
            LrSchedule::StepThirds => {
                let third = self.epochs.div_ceil(3).max(1);
                let drops = (epoch / third).min(2);
                self.learning_rate * 0.1f64.powi(drops as i32)
            }
        }
    }
}

/// Held-out data evaluated for metrics only; never used for decisions.
#[derive(Debug, Clone, Copy)]
pub struct EvalSplit<'a> {
    pub features: &'a Array2<f64>,
    pub labels: &'a [usize],
}

/// One row of per-epoch metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
    /// `train_accuracy - test_accuracy`, the memorization signal.
    pub generalization_gap: Option<f64>,
    /// Frobenius distance of each layer to the fine-tuning anchor.
    pub layer_distances: Vec<f64>,
    pub correction_events: usize,
    pub correction_precision: Option<f64>,
    pub mean_clean_weight: Option<f64>,
    pub mean_noisy_weight: Option<f64>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl EpochMetrics {
    pub fn csv_row(&self) -> String {
        let mut fields = vec![
            format!("{}", self.epoch),
            format!("{}", self.train_loss),
            format!("{}", self.train_accuracy),
            fmt_opt(self.test_accuracy),
            fmt_opt(self.generalization_gap),
        ];
        fields.extend(self.layer_distances.iter().map(|d| format!("{d}")));
        fields.push(format!("{}", self.correction_events));
        fields.push(fmt_opt(self.correction_precision));
        fields.push(fmt_opt(self.mean_clean_weight));
        fields.push(fmt_opt(self.mean_noisy_weight));
        fields.join(",")
    }
}

pub fn metrics_csv_header(num_layers: usize) -> String {
    let mut cols: Vec<String> = [
        "epoch",
        "train_loss",
        "train_accuracy",
        "test_accuracy",
        "generalization_gap",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend((0..num_layers).map(|i| format!("dist_{i}")));
    for extra in [
        "correction_events",
        "correction_precision",
        "mean_clean_weight",
        "mean_noisy_weight",
    ] {
        cols.push(extra.to_string());
    }
    cols.join(",")
}

pub fn write_metrics_csv<W: Write>(
    mut out: W,
    metrics: &[EpochMetrics],
    num_layers: usize,
) -> std::io::Result<()> {
    writeln!(out, "{}", metrics_csv_header(num_layers))?;
    for row in metrics {
        writeln!(out, "{}", row.csv_row())?;
    }
    Ok(())
}

/// Mean cross-entropy and top-1 accuracy (argmax ties to the lowest index).
pub fn evaluate(net: &Network, features: &Array2<f64>, labels: &[usize]) -> Result<(f64, f64)> {
    let n = features.nrows();
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{n} rows vs {} labels",
            labels.len()
        )));
    }
    let mut total_loss = 0.0;
    let mut correct = 0usize;
    for (row, &label) in features.rows().into_iter().zip(labels.iter()) {
        let pred = nn::forward(net, row)?;
        total_loss += nn::loss(&pred, label)?;
        if pred.argmax() == label {
            correct += 1;
        }
    }
    Ok((total_loss / n as f64, correct as f64 / n as f64))
}

/// Argmax predictions for every row.
pub fn predict_labels(net: &Network, features: &Array2<f64>) -> Result<Vec<usize>> {
    features
        .rows()
        .into_iter()
        .map(|row| nn::forward(net, row).map(|p| p.argmax()))
        .collect()
}

/// Full result of a fine-tuning run.
#[derive(Debug, Clone)]
pub struct FinetuneOutput {
    pub network: Network,
    pub metrics: Vec<EpochMetrics>,
    /// `(epoch, weights)` pairs collected per `TrainConfig::snapshot_every`.
    pub epoch_snapshots: Vec<(usize, Network)>,
}

struct LoopData<'a> {
    features: &'a Array2<f64>,
    working: &'a mut [usize],
    noise_mask: &'a [bool],
    true_labels: &'a [usize],
    num_classes: usize,
}

fn run_finetune(
    data: LoopData<'_>,
    init: &Network,
    cfg: &TrainConfig,
    test: Option<EvalSplit<'_>>,
) -> Result<FinetuneOutput> {
    cfg.validate()?;
    let n = data.features.nrows();
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    if data.working.len() != n || data.noise_mask.len() != n || data.true_labels.len() != n {
        return Err(Error::ShapeMismatch(
            "dataset fields have inconsistent lengths".into(),
        ));
    }
    if init.input_dim() != data.features.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "network expects {} inputs, data has {} columns",
            init.input_dim(),
            data.features.ncols()
        )));
    }
    if init.num_classes() != data.num_classes {
        return Err(Error::ShapeMismatch(format!(
            "network has {} classes, data has {}",
            init.num_classes(),
            data.num_classes
        )));
    }
    if cfg.batch_size > n {
        return Err(Error::InvalidParameter(format!(
            "batch_size {} exceeds dataset size {n}",
            cfg.batch_size
        )));
    }
    if let Some(schedule) = &cfg.schedule {
        if schedule.len() != init.num_layers() {
            return Err(Error::ShapeMismatch(format!(
                "schedule has {} radii, network has {} layers",
                schedule.len(),
                init.num_layers()
            )));
        }
    }

    let anchor = init;
    let mut net = init.clone();
    let mut metrics = Vec::new();
    let mut epoch_snapshots = Vec::new();
    let mut step: u64 = 0;
    let mut losses = Vec::with_capacity(cfg.batch_size);
    let mut weights = Vec::with_capacity(cfg.batch_size);
    let mut traces = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate_at(epoch);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_for(cfg.seed, &format!("shuffle:{epoch}")));

        let mut events: Vec<CorrectionEvent> = Vec::new();
        let mut weight_sums = [0.0f64; 2];
        let mut weight_counts = [0usize; 2];

        for batch in order.chunks(cfg.batch_size) {
            losses.clear();
            weights.clear();
            traces.clear();
            for &i in batch {
                let trace = nn::forward_trace(&net, data.features.row(i))?;
                if let Some(sl) = &cfg.selflabel {
                    if let Some(new_label) =
                        selflabel::maybe_correct(&trace.prediction, data.working[i], step, sl)
                    {
                        events.push(CorrectionEvent {
                            old_label: data.working[i],
                            new_label,
                            true_label: data.true_labels[i],
                        });
                        data.working[i] = new_label;
                    }
                }
                let loss = nn::loss(&trace.prediction, data.working[i])?;
                if !loss.is_finite() {
                    return Err(Error::Divergence { step });
                }
                let weight = match &cfg.selflabel {
                    Some(sl) => selflabel::weight(loss, step, sl),
                    None => 1.0,
                };
                losses.push(loss);
                weights.push(weight);
                traces.push(trace);
            }
            let batch_loss = selflabel::weighted_batch_loss(&losses, &weights)?;
            if !batch_loss.is_finite() {
                return Err(Error::Divergence { step });
            }
            let weight_total: f64 = weights.iter().sum();
            if cfg.selflabel.is_some() {
                for (k, &i) in batch.iter().enumerate() {
                    let group = usize::from(data.noise_mask[i]);
                    weight_sums[group] += weights[k] / weight_total;
                    weight_counts[group] += 1;
                }
            }

            let mut grad = Gradients::zeros_like(&net);
            for (k, &i) in batch.iter().enumerate() {
                let g = nn::backward_from_trace(&net, &traces[k], data.working[i])?;
                grad.add_scaled(weights[k] / weight_total, &g);
            }
            net.apply_gradients(lr, &grad)?;
            if let Some(schedule) = &cfg.schedule {
                constraint::project_in_place(&mut net, anchor, schedule)?;
            }
            step += 1;
        }

        if (epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs {
            let (train_loss, train_accuracy) = evaluate(&net, data.features, data.working)?;
            let test_accuracy = match test {
                Some(split) => Some(evaluate(&net, split.features, split.labels)?.1),
                None => None,
            };
            let mean_group = |g: usize| {
                if cfg.selflabel.is_some() && weight_counts[g] > 0 {
                    Some(weight_sums[g] / weight_counts[g] as f64)
                } else {
                    None
                }
            };
            metrics.push(EpochMetrics {
                epoch,
                train_loss,
                train_accuracy,
                test_accuracy,
                generalization_gap: test_accuracy.map(|t| train_accuracy - t),
                layer_distances: constraint::layer_distances(&net, anchor)?,
                correction_events: events.len(),
                correction_precision: selflabel::correction_precision(&events),
                mean_clean_weight: mean_group(0),
                mean_noisy_weight: mean_group(1),
            });
        }
        if cfg.snapshot_every > 0 && (epoch + 1) % cfg.snapshot_every == 0 {
            epoch_snapshots.push((epoch, net.clone()));
        }
    }
    Ok(FinetuneOutput {
        network: net,
        metrics,
        epoch_snapshots,
    })
}

/// Trains a fresh network from a seeded random init with plain mini-batch
/// SGD on unweighted cross-entropy.
pub fn pretrain(
    features: &Array2<f64>,
    labels: &[usize],
    spec: &NetSpec,
    cfg: &TrainConfig,
) -> Result<Network> {
    let init = init_network(spec, derive_seed(cfg.seed, "init"))?;
    let ds = NoisyDataset::clean(features.clone(), labels.to_vec(), spec.num_classes)?;
    let (net, _) = finetune_vanilla(&ds, &init, cfg, None)?;
    Ok(net)
}

/// Plain SGD from `init`: no projection, no self-labeling. Any schedule or
/// self-label config on `cfg` is ignored. Trains on the dataset's current
/// working labels and never mutates them.
pub fn finetune_vanilla(
    ds: &NoisyDataset,
    init: &Network,
    cfg: &TrainConfig,
    test: Option<EvalSplit<'_>>,
) -> Result<(Network, Vec<EpochMetrics>)> {
    finetune_vanilla_detailed(ds, init, cfg, test).map(|out| (out.network, out.metrics))
}

/// [`finetune_vanilla`] keeping the periodic weight snapshots.
pub fn finetune_vanilla_detailed(
    ds: &NoisyDataset,
    init: &Network,
    cfg: &TrainConfig,
    test: Option<EvalSplit<'_>>,
) -> Result<FinetuneOutput> {
    let stripped = TrainConfig {
        schedule: None,
        selflabel: None,
        ..cfg.clone()
    };
    let mut working = ds.working_labels().to_vec();
    run_finetune(
        LoopData {
            features: ds.features(),
            working: &mut working,
            noise_mask: ds.noise_mask(),
            true_labels: ds.true_labels(),
            num_classes: ds.num_classes(),
        },
        init,
        &stripped,
        test,
    )
}

/// The full constrained self-labeling fine-tune: per-batch forward, optional
/// label correction, optional loss reweighting, SGD on the normalized
/// weighted loss, then projection onto the layer-wise constraint balls.
///
/// Label corrections persist in `ds.working_labels`. A schedule is required;
/// leave `cfg.selflabel` empty for regularization-only training.
pub fn finetune_regsl(
    ds: &mut NoisyDataset,
    init: &Network,
    cfg: &TrainConfig,
    test: Option<EvalSplit<'_>>,
) -> Result<(Network, Vec<EpochMetrics>)> {
    finetune_regsl_detailed(ds, init, cfg, test).map(|out| (out.network, out.metrics))
}

/// [`finetune_regsl`] keeping the periodic weight snapshots.
pub fn finetune_regsl_detailed(
    ds: &mut NoisyDataset,
    init: &Network,
    cfg: &TrainConfig,
    test: Option<EvalSplit<'_>>,
) -> Result<FinetuneOutput> {
    if cfg.schedule.is_none() {
        return Err(Error::InvalidParameter(
            "constrained fine-tuning requires a distance schedule; \
             use radii of inf to disable individual layers"
                .into(),
        ));
    }
    let (features, working, noise_mask, true_labels, num_classes) = ds.parts_mut();
    run_finetune(
        LoopData {
            features,
            working,
            noise_mask,
            true_labels,
            num_classes,
        },
        init,
        cfg,
        test,
    )
}
