//! Subcommand implementations.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ndarray::Array2;

use ftlab_core::constraint::{distance_ratios, frobenius_norm, layer_distances};
use ftlab_core::diagnostics::{
    kl_gaussian, pacbayes_bound, perturbation_radius, perturbed_loss, schedule_bound_summary,
    spearman, BoundInputs, PerturbSpec,
};
use ftlab_core::nn::{loss_upper_bound, Network};
use ftlab_core::noise::write_noise_record;
use ftlab_core::seed::derive_seed;
use ftlab_core::snapshot::{load_network, save_network};
use ftlab_core::trainer::{
    self, evaluate, finetune_regsl_detailed, finetune_vanilla_detailed, init_network,
    write_metrics_csv, EvalSplit, FinetuneOutput,
};
use ftlab_core::{data, DistanceSchedule, EpochMetrics, NoisyDataset};

use crate::config::{ConfigError, FlatConfig};
use crate::experiment::{
    self, build_training_set, net_spec, prepare_run_dir, resolve_data, train_config,
    ResolvedData, TrainingSet,
};

fn global_seed(cfg: &FlatConfig) -> Result<u64> {
    cfg.get_u64_or("seed", 0)
}

fn write_metrics_file(path: &Path, metrics: &[EpochMetrics], num_layers: usize) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_metrics_csv(&mut out, metrics, num_layers)?;
    out.flush()?;
    Ok(())
}

fn eval_split<'a>(
    features: &'a Array2<f64>,
    labels: &'a [usize],
) -> Option<EvalSplit<'a>> {
    if features.nrows() == 0 {
        None
    } else {
        Some(EvalSplit { features, labels })
    }
}

/// Trains a source model on the config's train split and snapshots it.
pub fn cmd_pretrain(cfg: &FlatConfig, out: &Path) -> Result<()> {
    let seed = global_seed(cfg)?;
    let resolved = resolve_data(cfg, seed)?;
    prepare_run_dir(out, cfg)?;

    let (train_f, train_l) =
        data::take_rows(&resolved.features, &resolved.labels, &resolved.split.train);
    let (test_f, test_l) =
        data::take_rows(&resolved.features, &resolved.labels, &resolved.split.test);
    let spec = net_spec(cfg, resolved.features.ncols(), resolved.num_classes)?;
    let tc = train_config(cfg, "pretrain", seed)?;

    let ds = NoisyDataset::clean(train_f, train_l, resolved.num_classes)?;
    let init = init_network(&spec, derive_seed(seed, "init"))?;
    let (net, metrics) =
        trainer::finetune_vanilla(&ds, &init, &tc, eval_split(&test_f, &test_l))?;

    save_network(&out.join("weights").join("pretrained.txt"), &net)?;
    write_metrics_file(&out.join("metrics.csv"), &metrics, net.num_layers())?;
    eprintln!(
        "pretrained {} layers on {} rows -> {}",
        net.num_layers(),
        ds.n(),
        out.display()
    );
    Ok(())
}

/// Applies the configured noise model and persists the dataset plus its
/// injection record.
pub fn cmd_inject_noise(cfg: &FlatConfig, out: &Path) -> Result<()> {
    let seed = global_seed(cfg)?;
    if cfg.get_str_or("noise.kind", "none") == "none" {
        return Err(ConfigError(
            "noise.kind: inject-noise needs independent, correlated, or record".into(),
        )
        .into());
    }
    let resolved = resolve_data(cfg, seed)?;
    let ts = build_training_set(cfg, &resolved, seed)?;
    prepare_run_dir(out, cfg)?;

    data::save_csv(
        &out.join("dataset.csv"),
        ts.ds.features(),
        ts.ds.true_labels(),
    )?;
    let meta = ts.record_meta.clone().unwrap_or_default();
    let mut record = BufWriter::new(File::create(out.join("dataset.noise.csv"))?);
    write_noise_record(&mut record, &ts.ds, &meta)?;
    record.flush()?;
    eprintln!(
        "injected noise on {} rows (realized rate {}) -> {}",
        ts.ds.n(),
        ts.ds.realized_noise_rate(),
        out.display()
    );
    Ok(())
}

pub struct TrainOutcome {
    pub val_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
}

/// Fine-tunes per the config's `train.mode` and writes the run directory:
/// config snapshot, metrics.csv, start/final weight snapshots, and the noise
/// record when noise was injected.
pub fn cmd_train(cfg: &FlatConfig, out: &Path) -> Result<TrainOutcome> {
    let seed = global_seed(cfg)?;
    let resolved = resolve_data(cfg, seed)?;
    let mut ts = build_training_set(cfg, &resolved, seed)?;
    prepare_run_dir(out, cfg)?;

    let init = resolve_init(cfg, &resolved, seed)?;
    let mode = cfg.require_str("train.mode")?;
    let mut tc = train_config(cfg, "train", seed)?;
    tc.snapshot_every = cfg.get_usize_or("train.snapshot_every", 0)?;

    let steps_per_epoch = (ts.ds.n() as u64).div_ceil(tc.batch_size as u64);
    let no_correction = cfg.get_bool_or("train.no_correction", false)?;
    let no_reweight = cfg.get_bool_or("train.no_reweight", false)?;
    let no_regularization = cfg.get_bool_or("train.no_regularization", false)?;

    let (test_f, test_l) =
        data::take_rows(&resolved.features, &resolved.labels, &resolved.split.test);

    save_network(&out.join("weights").join("start.txt"), &init)?;

    let output: FinetuneOutput = match mode.as_str() {
        "vanilla" => finetune_vanilla_detailed(&ts.ds, &init, &tc, eval_split(&test_f, &test_l))?,
        "regsl" => {
            tc.schedule = if no_regularization {
                Some(DistanceSchedule::unconstrained(init.num_layers()))
            } else {
                match experiment::distance_schedule(cfg, init.num_layers())? {
                    Some(s) => Some(s),
                    None => {
                        return Err(ConfigError(
                            "constraint.base_d: required for train.mode = regsl \
                             (or pass --no-regularization)"
                                .into(),
                        )
                        .into())
                    }
                }
            };
            tc.selflabel =
                experiment::selflabel_config(cfg, steps_per_epoch, no_correction, no_reweight)?;
            finetune_regsl_detailed(&mut ts.ds, &init, &tc, eval_split(&test_f, &test_l))?
        }
        other => {
            return Err(ConfigError(format!(
                "train.mode: expected vanilla or regsl, got `{other}`"
            ))
            .into())
        }
    };

    save_network(&out.join("weights").join("final.txt"), &output.network)?;
    for (epoch, net) in &output.epoch_snapshots {
        save_network(&out.join("weights").join(format!("epoch_{epoch}.txt")), net)?;
    }
    write_metrics_file(
        &out.join("metrics.csv"),
        &output.metrics,
        output.network.num_layers(),
    )?;
    if let Some(meta) = &ts.record_meta {
        let mut record = BufWriter::new(File::create(out.join("dataset.noise.csv"))?);
        write_noise_record(&mut record, &ts.ds, meta)?;
        record.flush()?;
    }

    let (val_f, val_l) =
        data::take_rows(&resolved.features, &resolved.labels, &resolved.split.val);
    let val_accuracy = match eval_split(&val_f, &val_l) {
        Some(split) => Some(evaluate(&output.network, split.features, split.labels)?.1),
        None => None,
    };
    let test_accuracy = output.metrics.last().and_then(|m| m.test_accuracy);
    eprintln!(
        "trained mode={mode} for {} epochs -> {}",
        tc.epochs,
        out.display()
    );
    Ok(TrainOutcome {
        val_accuracy,
        test_accuracy,
    })
}

fn resolve_init(cfg: &FlatConfig, resolved: &ResolvedData, seed: u64) -> Result<Network> {
    match cfg.get_raw("train.init_snapshot") {
        Some(path) => {
            let path = PathBuf::from(path);
            if !path.exists() {
                return Err(ConfigError(format!(
                    "train.init_snapshot: file not found: {}",
                    path.display()
                ))
                .into());
            }
            let net = load_network(&path)
                .with_context(|| format!("train.init_snapshot: {}", path.display()))?;
            if net.input_dim() != resolved.features.ncols() {
                return Err(ConfigError(format!(
                    "train.init_snapshot: network expects {} inputs, data has {} columns",
                    net.input_dim(),
                    resolved.features.ncols()
                ))
                .into());
            }
            if net.num_classes() != resolved.num_classes {
                return Err(ConfigError(format!(
                    "train.init_snapshot: network has {} classes, data has {}",
                    net.num_classes(),
                    resolved.num_classes
                ))
                .into());
            }
            Ok(net)
        }
        None => {
            let spec = net_spec(cfg, resolved.features.ncols(), resolved.num_classes)?;
            Ok(init_network(&spec, derive_seed(seed, "init"))?)
        }
    }
}

struct ReportWriter {
    out: BufWriter<File>,
}

impl ReportWriter {
    fn new(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "metric,sigma,value,stderr")?;
        Ok(ReportWriter { out })
    }

    fn row(
        &mut self,
        metric: &str,
        sigma: Option<f64>,
        value: Option<f64>,
        stderr: Option<f64>,
    ) -> Result<()> {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        writeln!(
            self.out,
            "{metric},{},{},{}",
            fmt(sigma),
            fmt(value),
            fmt(stderr)
        )?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Measures a snapshot against its anchor: distances, KL, perturbed loss on
/// the configured training set, and the generalization bound.
pub fn cmd_diagnose(
    cfg: &FlatConfig,
    snapshot_path: &Path,
    anchor_path: &Path,
    out: &Path,
) -> Result<()> {
    let seed = global_seed(cfg)?;
    for (label, path) in [("snapshot", snapshot_path), ("anchor", anchor_path)] {
        if !path.exists() {
            return Err(ConfigError(format!(
                "{label}: file not found: {}",
                path.display()
            ))
            .into());
        }
    }
    let net = load_network(snapshot_path)
        .with_context(|| format!("snapshot: {}", snapshot_path.display()))?;
    let anchor = load_network(anchor_path)
        .with_context(|| format!("anchor: {}", anchor_path.display()))?;

    let resolved = resolve_data(cfg, seed)?;
    let ts: TrainingSet = build_training_set(cfg, &resolved, seed)?;
    if net.input_dim() != ts.ds.dim() || net.num_classes() != ts.ds.num_classes() {
        return Err(ConfigError(format!(
            "snapshot: network is {}->{} but data is {}->{}",
            net.input_dim(),
            net.num_classes(),
            ts.ds.dim(),
            ts.ds.num_classes()
        ))
        .into());
    }

    prepare_run_dir(out, cfg)?;
    let mut report = ReportWriter::new(&out.join("report.csv"))?;

    let (train_loss, train_accuracy) =
        evaluate(&net, ts.ds.features(), ts.ds.working_labels())?;
    report.row("train_loss", None, Some(train_loss), None)?;
    report.row("train_accuracy", None, Some(train_accuracy), None)?;

    let sigmas = cfg
        .get_f64_list("diagnose.sigmas")?
        .unwrap_or_else(|| vec![1e-2, 1e-3, 1e-4]);
    let samples = cfg.get_usize_or("diagnose.samples", 10)?;
    let perturb_biases = cfg.get_bool_or("diagnose.perturb_biases", true)?;
    let h = net.max_width().max(anchor.max_width());
    let l = net.num_layers();
    let delta = cfg.get_f64_or("bound.delta", 0.05)?;
    for &sigma in &sigmas {
        let mut spec = PerturbSpec::new(sigma, samples, seed);
        spec.perturb_biases = perturb_biases;
        let (mean, stderr) =
            perturbed_loss(&net, ts.ds.features(), ts.ds.working_labels(), &spec)?;
        report.row("perturbed_loss", Some(sigma), Some(mean), Some(stderr))?;
        report.row(
            "perturbation_radius",
            Some(sigma),
            Some(perturbation_radius(sigma, h, l, delta)?),
            None,
        )?;
        report.row(
            "kl_gaussian",
            Some(sigma),
            Some(kl_gaussian(&net, &anchor, sigma)?),
            None,
        )?;
    }

    let distances = layer_distances(&net, &anchor)?;
    for (i, d) in distances.iter().enumerate() {
        report.row(&format!("layer_distance_{i}"), None, Some(*d), None)?;
    }
    // Ratios are undefined against a zero-norm anchor layer; skip them then.
    if let Ok(ratios) = distance_ratios(&net, &anchor) {
        for (i, r) in ratios.iter().enumerate() {
            report.row(&format!("distance_ratio_{i}"), None, Some(*r), None)?;
        }
        let indices: Vec<f64> = (0..ratios.len()).map(|i| i as f64).collect();
        report.row(
            "spearman_layer_distance_ratio",
            None,
            spearman(&indices, &ratios),
            None,
        )?;
    }

    let schedule = experiment::distance_schedule(cfg, l)?;
    if let Some(s) = &schedule {
        if let Ok(sum_sq) = schedule_bound_summary(s) {
            report.row("schedule_sum_sq", None, Some(sum_sq), None)?;
        }
    }

    let inputs = bound_inputs(cfg, &net, &anchor, &ts, &distances, schedule.as_ref())?;
    report.row(
        "pacbayes_bound",
        None,
        Some(pacbayes_bound(train_loss, &inputs)?),
        None,
    )?;
    report.row("bound_input_L", None, Some(l as f64), None)?;
    report.row("bound_input_H", None, Some(inputs.h as f64), None)?;
    report.row("bound_input_C1", None, Some(inputs.c1), None)?;
    report.row("bound_input_C2", None, Some(inputs.c2), None)?;
    report.row("bound_input_eps", None, Some(inputs.eps), None)?;
    report.row("bound_input_delta", None, Some(inputs.delta), None)?;
    report.row("bound_input_n", None, Some(inputs.n as f64), None)?;
    for (i, b) in inputs.b.iter().enumerate() {
        report.row(&format!("bound_input_B_{i}"), None, Some(*b), None)?;
    }
    for (i, d) in inputs.d.iter().enumerate() {
        report.row(&format!("bound_input_D_{i}"), None, Some(*d), None)?;
    }
    report.finish()?;
    eprintln!("diagnose report -> {}", out.join("report.csv").display());
    Ok(())
}

/// Assembles bound inputs: explicit config values win, then the schedule,
/// then quantities measured from the snapshot pair and the data.
fn bound_inputs(
    cfg: &FlatConfig,
    net: &Network,
    anchor: &Network,
    ts: &TrainingSet,
    measured_distances: &[f64],
    schedule: Option<&DistanceSchedule>,
) -> Result<BoundInputs> {
    let l = net.num_layers();
    let b = match cfg.get_f64_list("bound.b")? {
        Some(list) => list,
        // The Frobenius norm upper-bounds the operator norm; the floor keeps
        // the > 1 requirement satisfied for small anchors.
        None => anchor
            .layers()
            .iter()
            .map(|layer| frobenius_norm(&layer.weights).max(1.0 + 1e-9))
            .collect(),
    };
    let d = match cfg.get_f64_list("bound.d")? {
        Some(list) => list,
        None => match schedule {
            Some(s) if s.radii().iter().all(|r| r.is_finite()) => s.radii().to_vec(),
            _ => measured_distances.to_vec(),
        },
    };
    if b.len() != l || d.len() != l {
        return Err(ConfigError(format!(
            "bound.b / bound.d: need {l} entries for a {l}-layer network"
        ))
        .into());
    }
    let c1 = match cfg.get_f64("bound.c1")? {
        Some(v) => v,
        None => ts
            .ds
            .features()
            .rows()
            .into_iter()
            .map(|row| row.dot(&row).sqrt())
            .fold(1.0f64, f64::max),
    };
    Ok(BoundInputs {
        b,
        d,
        c1,
        c2: cfg.get_f64_or("bound.c2", loss_upper_bound())?,
        h: net.max_width(),
        eps: cfg.get_f64_or("bound.eps", 0.1)?,
        delta: cfg.get_f64_or("bound.delta", 0.05)?,
        n: ts.ds.n(),
    })
}

/// One grid point: the parameter values in grid order.
#[derive(Debug, Clone, PartialEq)]
struct GridPoint {
    base_d: f64,
    gamma: f64,
    tau: f64,
    reweight_start_epoch: usize,
    correction_start_epoch: usize,
}

/// Runs the cartesian grid over `(base_d, gamma, tau, E_r, E_c)`, one run
/// directory per point, and writes a summary selecting the best row by
/// validation accuracy (ties: lexicographically smallest point).
pub fn cmd_grid(cfg: &FlatConfig, out: &Path) -> Result<()> {
    let base_d = match cfg.get_f64_list("grid.base_d")? {
        Some(list) => list,
        None => vec![cfg.get_f64_or("constraint.base_d", 1.0)?],
    };
    let gamma = match cfg.get_f64_list("grid.gamma")? {
        Some(list) => list,
        None => vec![cfg.get_f64_or("constraint.gamma", 1.0)?],
    };
    let tau = match cfg.get_f64_list("grid.tau")? {
        Some(list) => list,
        None => vec![cfg.get_f64_or("selflabel.temperature", 1.0)?],
    };
    let reweight = match cfg.get_usize_list("grid.reweight_start_epoch")? {
        Some(list) => list,
        None => vec![cfg.get_usize_or("selflabel.reweight_start_epoch", 3)?],
    };
    let correction = match cfg.get_usize_list("grid.correction_start_epoch")? {
        Some(list) => list,
        None => vec![cfg.get_usize_or("selflabel.correction_start_epoch", 5)?],
    };
    for (key, empty) in [
        ("grid.base_d", base_d.is_empty()),
        ("grid.gamma", gamma.is_empty()),
        ("grid.tau", tau.is_empty()),
        ("grid.reweight_start_epoch", reweight.is_empty()),
        ("grid.correction_start_epoch", correction.is_empty()),
    ] {
        if empty {
            return Err(ConfigError(format!("{key}: grid axis is empty")).into());
        }
    }

    prepare_run_dir(out, cfg)?;
    let mut points = Vec::new();
    for &bd in &base_d {
        for &g in &gamma {
            for &t in &tau {
                for &rw in &reweight {
                    for &cs in &correction {
                        points.push(GridPoint {
                            base_d: bd,
                            gamma: g,
                            tau: t,
                            reweight_start_epoch: rw,
                            correction_start_epoch: cs,
                        });
                    }
                }
            }
        }
    }

    let mut rows = Vec::with_capacity(points.len());
    for (index, point) in points.iter().enumerate() {
        let mut point_cfg = cfg.clone();
        point_cfg.set("constraint.base_d", point.base_d);
        point_cfg.set("constraint.gamma", point.gamma);
        point_cfg.set("selflabel.temperature", point.tau);
        point_cfg.set("selflabel.reweight_start_epoch", point.reweight_start_epoch);
        point_cfg.set(
            "selflabel.correction_start_epoch",
            point.correction_start_epoch,
        );
        let point_dir = out.join(format!("point_{index}"));
        let outcome = cmd_train(&point_cfg, &point_dir)?;
        let val = outcome.val_accuracy.ok_or_else(|| {
            ConfigError("split.val: grid selection needs a nonempty validation split".into())
        })?;
        rows.push((index, point.clone(), val, outcome.test_accuracy));
    }

    let best = rows
        .iter()
        .max_by(|(_, pa, va, _), (_, pb, vb, _)| {
            va.partial_cmp(vb)
                .unwrap()
                // On accuracy ties prefer the lexicographically smallest
                // point, i.e. the *greater* point loses the max.
                .then_with(|| point_key(pb).partial_cmp(&point_key(pa)).unwrap())
        })
        .map(|(i, ..)| *i)
        .expect("nonempty grid");

    let mut summary = BufWriter::new(File::create(out.join("summary.csv"))?);
    writeln!(
        summary,
        "point,base_d,gamma,tau,reweight_start_epoch,correction_start_epoch,val_accuracy,test_accuracy,best"
    )?;
    for (index, point, val, test) in &rows {
        writeln!(
            summary,
            "{index},{},{},{},{},{},{},{},{}",
            point.base_d,
            point.gamma,
            point.tau,
            point.reweight_start_epoch,
            point.correction_start_epoch,
            val,
            test.map(|t| format!("{t}")).unwrap_or_default(),
            index == &best
        )?;
    }
    summary.flush()?;
    eprintln!(
        "grid of {} points -> {} (best: point_{best})",
        rows.len(),
        out.display()
    );
    Ok(())
}

fn point_key(p: &GridPoint) -> (f64, f64, f64, usize, usize) {
    (
        p.base_d,
        p.gamma,
        p.tau,
        p.reweight_start_epoch,
        p.correction_start_epoch,
    )
}
