//! Label-noise models and ground-truth bookkeeping.
//!
//! Independent noise flips each label with a fixed probability, uniformly
//! over the other classes, so it depends only on the original class.
//! Correlated noise comes from an auxiliary classifier trained on a held-out
//! split: its argmax predictions on the target rows become the noisy labels,
//! which makes the noise input-dependent and its realized rate a measured
//! quantity rather than a dial.

use std::io::{BufRead, Write};

use ndarray::Array2;
use rand::Rng;

use crate::seed::{derive_seed, rng_for};
use crate::trainer::{self, NetSpec, TrainConfig};
use crate::{Error, Result};

/// A training set with a hidden true-label shadow for noise-aware metrics.
///
/// `noise_mask` records which labels disagreed with the truth *at injection
/// time* and never changes afterwards; label corrections mutate
/// `working_labels` only.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyDataset {
    features: Array2<f64>,
    true_labels: Vec<usize>,
    working_labels: Vec<usize>,
    noise_mask: Vec<bool>,
    num_classes: usize,
}

impl NoisyDataset {
    /// Dataset with no injected noise: working labels equal true labels.
    pub fn clean(features: Array2<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let working = labels.clone();
        Self::with_noisy_labels(features, labels, working, num_classes)
    }

    /// Dataset whose working labels start at `noisy_labels`; the mask is
    /// derived by comparing them with the true labels.
    pub fn with_noisy_labels(
        features: Array2<f64>,
        true_labels: Vec<usize>,
        noisy_labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        let n = features.nrows();
        if n == 0 {
            return Err(Error::EmptyBatch);
        }
        if true_labels.len() != n || noisy_labels.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{n} feature rows vs {} true and {} noisy labels",
                true_labels.len(),
                noisy_labels.len()
            )));
        }
        if num_classes < 2 {
            return Err(Error::InvalidParameter(
                "num_classes must be at least 2".into(),
            ));
        }
        for &label in true_labels.iter().chain(noisy_labels.iter()) {
            if label >= num_classes {
                return Err(Error::LabelOutOfRange {
                    label,
                    num_classes,
                });
            }
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "features contain non-finite values".into(),
            ));
        }
        let noise_mask = true_labels
            .iter()
            .zip(noisy_labels.iter())
            .map(|(t, w)| t != w)
            .collect();
        Ok(NoisyDataset {
            features,
            true_labels,
            working_labels: noisy_labels,
            noise_mask,
            num_classes,
        })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn true_labels(&self) -> &[usize] {
        &self.true_labels
    }

    pub fn working_labels(&self) -> &[usize] {
        &self.working_labels
    }

    pub fn noise_mask(&self) -> &[bool] {
        &self.noise_mask
    }

    /// Fraction of rows whose label was wrong at injection time.
    pub fn realized_noise_rate(&self) -> f64 {
        let flipped = self.noise_mask.iter().filter(|&&m| m).count();
        flipped as f64 / self.noise_mask.len() as f64
    }

    /// Disjoint borrows for the training loop.
    pub(crate) fn parts_mut(
        &mut self,
    ) -> (&Array2<f64>, &mut [usize], &[bool], &[usize], usize) {
        (
            &self.features,
            &mut self.working_labels,
            &self.noise_mask,
            &self.true_labels,
            self.num_classes,
        )
    }
}

/// Flips each label independently with probability `rate`; a flipped label
/// is drawn uniformly from the other `num_classes - 1` classes, so a flip
/// never reproduces the original label. Returns the noisy labels and the
/// flip mask.
pub fn inject_independent(
    labels: &[usize],
    rate: f64,
    num_classes: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<bool>)> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidParameter(format!(
            "noise rate {rate} must be in [0, 1]"
        )));
    }
    if num_classes < 2 {
        return Err(Error::InvalidParameter(
            "independent noise needs at least 2 classes".into(),
        ));
    }
    for &label in labels {
        if label >= num_classes {
            return Err(Error::LabelOutOfRange {
                label,
                num_classes,
            });
        }
    }
    let mut rng = rng_for(seed, "noise");
    let mut noisy = Vec::with_capacity(labels.len());
    let mut mask = Vec::with_capacity(labels.len());
    for &label in labels {
        if rng.random_bool(rate) {
            let mut target = rng.random_range(0..num_classes - 1);
            if target >= label {
                target += 1;
            }
            noisy.push(target);
            mask.push(true);
        } else {
            noisy.push(label);
            mask.push(false);
        }
    }
    Ok((noisy, mask))
}

/// Auxiliary-classifier setup for correlated noise.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxNoiseConfig {
    pub spec: NetSpec,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Training stops the first time accuracy on the target rows reaches
    /// this value (checked before training and after every epoch).
    pub target_accuracy: f64,
    pub max_epochs: usize,
}

/// Result of a correlated-noise injection.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedOutcome {
    pub labels: Vec<usize>,
    pub mask: Vec<bool>,
    /// Equals `1 - aux_accuracy` by construction.
    pub realized_rate: f64,
    /// Accuracy of the auxiliary network on the target rows.
    pub aux_accuracy: f64,
    pub epochs_trained: usize,
    /// False when `target_accuracy` was still unreached at `max_epochs`; the
    /// labels then come from the final epoch.
    pub converged: bool,
}

/// Trains a fresh auxiliary network on the held-out split until its accuracy
/// on the target rows first reaches `target_accuracy` (or `max_epochs`), then
/// labels the target rows with its argmax predictions.
pub fn inject_correlated(
    target_features: &Array2<f64>,
    target_true_labels: &[usize],
    heldout_features: &Array2<f64>,
    heldout_labels: &[usize],
    cfg: &AuxNoiseConfig,
    seed: u64,
) -> Result<CorrelatedOutcome> {
    if !(0.0..=1.0).contains(&cfg.target_accuracy) {
        return Err(Error::InvalidParameter(format!(
            "target accuracy {} must be in [0, 1]",
            cfg.target_accuracy
        )));
    }
    cfg.spec.validate()?;
    let heldout = NoisyDataset::clean(
        heldout_features.clone(),
        heldout_labels.to_vec(),
        cfg.spec.num_classes,
    )?;
    if target_features.nrows() == 0 {
        return Err(Error::EmptyBatch);
    }
    if target_true_labels.len() != target_features.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "{} target rows vs {} labels",
            target_features.nrows(),
            target_true_labels.len()
        )));
    }

    let mut net = trainer::init_network(&cfg.spec, derive_seed(seed, "init"))?;
    let accuracy_on_target = |net: &crate::nn::Network| -> Result<(Vec<usize>, f64)> {
        let preds = trainer::predict_labels(net, target_features)?;
        let hits = preds
            .iter()
            .zip(target_true_labels.iter())
            .filter(|(p, t)| p == t)
            .count();
        let acc = hits as f64 / preds.len() as f64;
        Ok((preds, acc))
    };

    let (mut preds, mut acc) = accuracy_on_target(&net)?;
    let mut epochs_trained = 0;
    while acc < cfg.target_accuracy && epochs_trained < cfg.max_epochs {
        let epoch_cfg = TrainConfig::new(
            cfg.learning_rate,
            cfg.batch_size.min(heldout.n()),
            1,
            derive_seed(seed, &format!("aux:{epochs_trained}")),
        );
        net = trainer::finetune_vanilla(&heldout, &net, &epoch_cfg, None)?.0;
        epochs_trained += 1;
        (preds, acc) = accuracy_on_target(&net)?;
    }

    let mask: Vec<bool> = preds
        .iter()
        .zip(target_true_labels.iter())
        .map(|(p, t)| p != t)
        .collect();
    let realized_rate = mask.iter().filter(|&&m| m).count() as f64 / mask.len() as f64;
    Ok(CorrelatedOutcome {
        labels: preds,
        mask,
        realized_rate,
        aux_accuracy: acc,
        epochs_trained,
        converged: acc >= cfg.target_accuracy,
    })
}

/// Writes the injection record: a `#`-prefixed metadata header, then
/// `index,true_label,noisy_label` rows. Reapplying the record reproduces the
/// injection exactly.
pub fn write_noise_record<W: Write>(mut out: W, ds: &NoisyDataset, meta: &str) -> Result<()> {
    writeln!(out, "# {meta}")?;
    writeln!(out, "index,true_label,noisy_label")?;
    for (i, (t, w)) in ds
        .true_labels()
        .iter()
        .zip(ds.working_labels().iter())
        .enumerate()
    {
        writeln!(out, "{i},{t},{w}")?;
    }
    Ok(())
}

/// One persisted injection: `(row index, true label, noisy label)`.
pub type NoiseRow = (usize, usize, usize);

/// Parsed noise record: header metadata plus the injection rows.
pub fn read_noise_record<R: BufRead>(input: R) -> Result<(String, Vec<NoiseRow>)> {
    let mut meta = String::new();
    let mut rows = Vec::new();
    for (line_no, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = line_no + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            meta = rest.trim().to_string();
            continue;
        }
        if trimmed == "index,true_label,noisy_label" {
            continue;
        }
        let mut fields = trimmed.split(',');
        let parse = |s: Option<&str>| -> Result<usize> {
            s.and_then(|v| v.trim().parse().ok()).ok_or(Error::Parse {
                line: line_no,
                message: format!("expected `index,true_label,noisy_label`, got `{trimmed}`"),
            })
        };
        let index = parse(fields.next())?;
        let true_label = parse(fields.next())?;
        let noisy_label = parse(fields.next())?;
        if fields.next().is_some() {
            return Err(Error::Parse {
                line: line_no,
                message: "too many columns".into(),
            });
        }
        rows.push((index, true_label, noisy_label));
    }
    Ok((meta, rows))
}

/// Rebuilds a noisy dataset from features, clean labels, and a recorded
/// injection.
pub fn apply_noise_record(
    features: Array2<f64>,
    true_labels: Vec<usize>,
    rows: &[NoiseRow],
    num_classes: usize,
) -> Result<NoisyDataset> {
    let mut noisy = true_labels.clone();
    for &(index, recorded_true, noisy_label) in rows {
        if index >= noisy.len() {
            return Err(Error::InvalidParameter(format!(
                "noise record row {index} out of range for {} rows",
                noisy.len()
            )));
        }
        if true_labels[index] != recorded_true {
            return Err(Error::InvalidParameter(format!(
                "noise record disagrees with dataset at row {index}: \
                 recorded true label {recorded_true}, dataset has {}",
                true_labels[index]
            )));
        }
        noisy[index] = noisy_label;
    }
    NoisyDataset::with_noisy_labels(features, true_labels, noisy, num_classes)
}
