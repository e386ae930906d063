//! Self-labeling: confidence-thresholded label correction and exponential
//! loss reweighting with per-batch normalization.
//!
//! Both mechanisms key off the global step counter `t` (one step per SGD
//! update). Correction fires once `t > correction_start` and the model is
//! confident above the threshold; reweighting assigns `exp(-loss/tau)` once
//! `t > reweight_start` and 1 before that. Weights are treated as constants
//! in the gradient.

use crate::nn::Prediction;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SelfLabelConfig {
    /// Step index after which corrections may fire (strict `>`).
    pub correction_start: u64,
    /// Confidence threshold, in (0, 1]. The comparison is strict, so 1.0
    /// disables correction entirely.
    pub correction_threshold: f64,
    /// Step index after which reweighting is active (strict `>`).
    pub reweight_start: u64,
    /// Reweighting temperature, > 0.
    pub temperature: f64,
}

impl SelfLabelConfig {
    pub fn validate(&self) -> Result<()> {
        let threshold_ok = self.correction_threshold > 0.0 && self.correction_threshold <= 1.0;
        if !threshold_ok {
            return Err(Error::InvalidParameter(format!(
                "correction threshold {} must be in (0, 1]",
                self.correction_threshold
            )));
        }
        if self.temperature <= 0.0 || !self.temperature.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "temperature {} must be positive and finite",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// One label correction, kept for precision bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorrectionEvent {
    pub old_label: usize,
    pub new_label: usize,
    pub true_label: usize,
}

/// Returns the corrected label iff `step > correction_start`, the top
/// probability strictly exceeds the threshold, and the argmax disagrees with
/// the current label. Argmax ties resolve to the lowest index.
pub fn maybe_correct(
    pred: &Prediction,
    current_label: usize,
    step: u64,
    cfg: &SelfLabelConfig,
) -> Option<usize> {
    if step <= cfg.correction_start {
        return None;
    }
    let candidate = pred.argmax();
    if pred.confidence() > cfg.correction_threshold && candidate != current_label {
        Some(candidate)
    } else {
        None
    }
}

/// Per-example weight `exp(-loss/tau)` once reweighting is active, 1 before.
pub fn weight(loss_value: f64, step: u64, cfg: &SelfLabelConfig) -> f64 {
    if step > cfg.reweight_start {
        (-loss_value / cfg.temperature).exp()
    } else {
        1.0
    }
}

/// Normalized weighted mean `sum(w*l) / sum(w)` over a mini-batch.
pub fn weighted_batch_loss(losses: &[f64], weights: &[f64]) -> Result<f64> {
    if losses.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if losses.len() != weights.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} losses vs {} weights",
            losses.len(),
            weights.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "weight sum {total} must be positive"
        )));
    }
    Ok(losses
        .iter()
        .zip(weights.iter())
        .map(|(l, w)| w * l)
        .sum::<f64>()
        / total)
}

/// Fraction of corrections that landed on the true label. `None` when no
/// corrections happened.
pub fn correction_precision(events: &[CorrectionEvent]) -> Option<f64> {
    if events.is_empty() {
        return None;
    }
    let hits = events
        .iter()
        .filter(|e| e.new_label == e.true_label)
        .count();
    Some(hits as f64 / events.len() as f64)
}

/// Mean batch-normalized weight (`w_i / sum(w)`) of the clean group and of
/// the noise-masked group. A missing group yields `None` on that side.
pub fn weight_gap(weights: &[f64], noise_mask: &[bool]) -> Result<(Option<f64>, Option<f64>)> {
    if weights.len() != noise_mask.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} weights vs {} mask entries",
            weights.len(),
            noise_mask.len()
        )));
    }
    if weights.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "weight sum {total} must be positive"
        )));
    }
    let mut sums = [0.0f64; 2];
    let mut counts = [0usize; 2];
    for (&w, &noisy) in weights.iter().zip(noise_mask.iter()) {
        let g = usize::from(noisy);
        sums[g] += w / total;
        counts[g] += 1;
    }
    let mean = |g: usize| {
        if counts[g] == 0 {
            None
        } else {
            Some(sums[g] / counts[g] as f64)
        }
    };
    Ok((mean(0), mean(1)))
}
