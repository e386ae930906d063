//! Acceptance suite: one test per criterion, each printing a PASS line
//! (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Criteria 8-10 share one five-seed experiment bundle (pretrain on a clean
//! source sample, then fine-tune four arms on a 60%-noise target task); it
//! is built once and reused across those tests.

use std::sync::LazyLock;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::Rng;

use ftlab_core::constraint::{frobenius_norm, project, project_in_place, DistanceSchedule};
use ftlab_core::data::{make_blobs, take_rows};
use ftlab_core::diagnostics::{kl_gaussian, pacbayes_bound, perturbed_loss_with, BoundInputs, PerturbSpec};
use ftlab_core::nn::{self, Activation, Gradients, Layer, Network};
use ftlab_core::noise::{inject_independent, NoisyDataset};
use ftlab_core::seed::{derive_seed, rng_for};
use ftlab_core::selflabel::{weight, weighted_batch_loss, SelfLabelConfig};
use ftlab_core::trainer::{
    evaluate, finetune_regsl, finetune_vanilla, init_network, pretrain, EpochMetrics, EvalSplit,
    NetSpec, TrainConfig,
};

#[allow(clippy::type_complexity)]
mod bound_oracle {
    include!("data/bound_oracle.rs");
}

fn pass(name: &str) {
    println!("acceptance {name}: PASS");
}

// ---------------------------------------------------------------- helpers

fn random_network(rng: &mut impl Rng, depth: usize, max_width: usize) -> (Network, Array1<f64>) {
    let activations = [Activation::ReLU, Activation::Tanh, Activation::Identity];
    let mut widths = vec![rng.random_range(2..=max_width)];
    for _ in 0..depth {
        widths.push(rng.random_range(2..=max_width));
    }
    let mut layers = Vec::new();
    for (i, pair) in widths.windows(2).enumerate() {
        let (input, output) = (pair[0], pair[1]);
        let scale = 1.0 / (input as f64).sqrt();
        let weights =
            Array2::from_shape_fn((output, input), |_| rng.random_range(-scale..scale));
        let bias = Array1::from_shape_fn(output, |_| rng.random_range(-0.3..0.3));
        layers.push(Layer::new(weights, bias, activations[i % activations.len()]).unwrap());
    }
    let num_classes = *widths.last().unwrap();
    let x = Array1::from_shape_fn(widths[0], |_| rng.random_range(-1.5..1.5));
    (Network::new(layers, num_classes).unwrap(), x)
}

/// Independent central-difference gradient of the cross-entropy loss.
fn finite_difference(net: &Network, x: &Array1<f64>, label: usize, h: f64) -> Gradients {
    let mut out = Gradients::zeros_like(net);
    let mut work = net.clone();
    let eval = |n: &Network| nn::loss(&nn::forward(n, x.view()).unwrap(), label).unwrap();
    for li in 0..net.num_layers() {
        let (rows, cols) = {
            let w = &net.layers()[li].weights;
            (w.nrows(), w.ncols())
        };
        for r in 0..rows {
            for c in 0..cols {
                let orig = work.layers()[li].weights[[r, c]];
                work.layers_mut()[li].weights[[r, c]] = orig + h;
                let up = eval(&work);
                work.layers_mut()[li].weights[[r, c]] = orig - h;
                let down = eval(&work);
                work.layers_mut()[li].weights[[r, c]] = orig;
                out.weights[li][[r, c]] = (up - down) / (2.0 * h);
            }
        }
        for b in 0..net.layers()[li].bias.len() {
            let orig = work.layers()[li].bias[b];
            work.layers_mut()[li].bias[b] = orig + h;
            let up = eval(&work);
            work.layers_mut()[li].bias[b] = orig - h;
            let down = eval(&work);
            work.layers_mut()[li].bias[b] = orig;
            out.biases[li][b] = (up - down) / (2.0 * h);
        }
    }
    out
}

fn max_relative_error(analytic: &Gradients, numeric: &Gradients) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, n) in analytic
        .weights
        .iter()
        .zip(numeric.weights.iter())
        .flat_map(|(aw, nw)| aw.iter().zip(nw.iter()))
        .chain(
            analytic
                .biases
                .iter()
                .zip(numeric.biases.iter())
                .flat_map(|(ab, nb)| ab.iter().zip(nb.iter())),
        )
    {
        // Central differences at h = 1e-5 resolve absolute values down to
        // roughly 1e-11; entries below the floor compare absolutely so the
        // quotient is not dominated by differencing noise.
        let denom = a.abs().max(n.abs()).max(1e-4);
        worst = worst.max((a - n).abs() / denom);
    }
    worst
}

// ------------------------------------------------------------ criterion 1

#[test]
fn c01_gradient_correctness() {
    let start = Instant::now();
    let mut rng = rng_for(1001, "init");
    for case in 0..50 {
        let depth = 1 + case % 4;
        let (net, x) = random_network(&mut rng, depth, 32);
        let label = rng.random_range(0..net.num_classes());
        let analytic = nn::backward(&net, x.view(), label).unwrap();
        let numeric = finite_difference(&net, &x, label, 1e-5);
        let err = max_relative_error(&analytic, &numeric);
        assert!(err < 1e-5, "case {case}: max relative error {err}");
    }
    assert!(start.elapsed() < Duration::from_secs(30));
    pass("1 gradient correctness");
}

// ------------------------------------------------------------ criterion 2

fn single_layer(weights: Array2<f64>) -> Network {
    let rows = weights.nrows();
    let layer = Layer::new(weights, Array1::zeros(rows), Activation::Identity).unwrap();
    Network::new(vec![layer], rows).unwrap()
}

#[test]
fn c02_projection_optimality() {
    let start = Instant::now();
    let mut rng = rng_for(1002, "init");
    for case in 0..100 {
        let w = Array2::from_shape_fn((4, 4), |_| rng.random_range(-2.0..2.0));
        let anchor_w = Array2::from_shape_fn((4, 4), |_| rng.random_range(-2.0..2.0));
        let radius = rng.random_range(0.05..2.0);
        let net = single_layer(w.clone());
        let anchor = single_layer(anchor_w.clone());
        let schedule = DistanceSchedule::new(vec![radius]).unwrap();

        let projected = project(&net, &anchor, &schedule).unwrap();
        let pw = &projected.layers()[0].weights;

        // In the ball.
        let dist = frobenius_norm(&(pw - &anchor_w));
        assert!(dist <= radius + 1e-9, "case {case}: dist {dist} > {radius}");

        // Idempotent.
        let twice = project(&projected, &anchor, &schedule).unwrap();
        for (a, b) in pw.iter().zip(twice.layers()[0].weights.iter()) {
            assert!((a - b).abs() <= 1e-12, "case {case}: projection not idempotent");
        }

        // At least as close to the original point as 10,000 sampled
        // in-ball points.
        let own = frobenius_norm(&(pw - &w));
        for _ in 0..10_000 {
            let direction = Array2::from_shape_fn((4, 4), |_| rng.random_range(-1.0..1.0f64));
            let norm = frobenius_norm(&direction);
            if norm == 0.0 {
                continue;
            }
            let u: f64 = rng.random_range(0.0..1.0f64);
            let point = &anchor_w + &(direction * (radius * u.powf(1.0 / 16.0) / norm));
            let candidate = frobenius_norm(&(&point - &w));
            assert!(
                own <= candidate + 1e-12,
                "case {case}: sampled point beats projection ({candidate} < {own})"
            );
        }

        // Non-expansive on a random pair.
        let other = Array2::from_shape_fn((4, 4), |_| rng.random_range(-2.0..2.0));
        let other_net = single_layer(other.clone());
        let other_projected = project(&other_net, &anchor, &schedule).unwrap();
        let before = frobenius_norm(&(&w - &other));
        let after = frobenius_norm(&(pw - &other_projected.layers()[0].weights));
        assert!(after <= before + 1e-12, "case {case}: projection expanded");
    }
    assert!(start.elapsed() < Duration::from_secs(60));
    pass("2 projection optimality");
}

// ------------------------------------------------------------ criterion 3

#[test]
fn c03_bound_arithmetic() {
    let start = Instant::now();

    // High-precision oracle values (see data/gen_bound_oracle.py).
    for (idx, (train_loss, b, d, c1, c2, h, eps, delta, n, expected)) in
        bound_oracle::BOUND_ORACLE.iter().enumerate()
    {
        let inputs = BoundInputs {
            b: b.to_vec(),
            d: d.to_vec(),
            c1: *c1,
            c2: *c2,
            h: *h,
            eps: *eps,
            delta: *delta,
            n: *n,
        };
        let value = pacbayes_bound(*train_loss, &inputs).unwrap();
        let rel = (value - expected).abs() / expected.abs();
        assert!(rel < 1e-12, "oracle case {idx}: relative error {rel}");

        // Component-wise monotonicity, a 5-point sweep per radius.
        for i in 0..inputs.b.len() {
            let mut previous = f64::NEG_INFINITY;
            for step in 0..5 {
                let mut swept = inputs.clone();
                swept.d[i] += step as f64;
                let v = pacbayes_bound(*train_loss, &swept).unwrap();
                assert!(v > previous, "case {idx}: bound not increasing in d[{i}]");
                previous = v;
            }
        }
    }

    // All-zero radii collapse to the tail-only closed form, exactly.
    let inputs = BoundInputs {
        b: vec![2.0, 3.0],
        d: vec![0.0, 0.0],
        c1: 2.0,
        c2: 10.0,
        h: 8,
        eps: 0.5,
        delta: 0.05,
        n: 1234,
    };
    let bound = pacbayes_bound(1.5, &inputs).unwrap();
    let reduced = 1.5 + 0.5 + 10.0 * ((3.0 * (1234.0f64 / 0.05).ln() + 8.0) / 1234.0).sqrt();
    assert_eq!(bound, reduced);

    // Worked single-layer example, value pinned by the same oracle.
    let single = BoundInputs {
        b: vec![2.0],
        d: vec![1.0],
        c1: 1.0,
        c2: 1.0,
        h: 2,
        eps: 0.1,
        delta: 0.05,
        n: 100,
    };
    let value = pacbayes_bound(0.5, &single).unwrap();
    let rel = (value - 12.848584329412704f64).abs() / 12.848584329412704;
    assert!(rel < 1e-12, "single-layer example off by {rel}");

    assert!(start.elapsed() < Duration::from_secs(5));
    pass("3 bound arithmetic");
}

// ------------------------------------------------------------ criterion 4

#[test]
fn c04_kl_identity() {
    // Ten fixed cases with hand-computed squared distances.
    let cases: [(f64, f64); 10] = [
        // (total squared distance, sigma)
        (4.0, 1.0),
        (4.0, 0.5),
        (1.0, 1.0),
        (25.0, 1.0),
        (25.0, 0.1),
        (2.25, 1.5),
        (0.25, 0.25),
        (9.0, 3.0),
        (16.0, 2.0),
        (0.0, 1.0),
    ];
    for (idx, &(sq, sigma)) in cases.iter().enumerate() {
        let side = sq.sqrt();
        let anchor = single_layer(Array2::zeros((2, 2)));
        let mut moved_w = Array2::zeros((2, 2));
        moved_w[[0, 0]] = side;
        let moved = single_layer(moved_w);
        let kl = kl_gaussian(&moved, &anchor, sigma).unwrap();
        let expected = sq / (2.0 * sigma * sigma);
        assert!(
            (kl - expected).abs() <= 1e-12 * expected.max(1.0),
            "case {idx}: kl {kl} vs {expected}"
        );
    }

    // After projection the KL respects the schedule budget at every sigma,
    // and kl * sigma^2 is constant across sigma.
    let spec = NetSpec {
        input_dim: 6,
        hidden_widths: vec![8, 5],
        hidden_activation: Activation::Tanh,
        num_classes: 3,
    };
    let anchor = init_network(&spec, 404).unwrap();
    let mut moved = anchor.clone();
    for layer in moved.layers_mut() {
        layer.weights.mapv_inplace(|w| w + 0.75);
    }
    let schedule = DistanceSchedule::exponential(0.3, 2.0, 3).unwrap();
    project_in_place(&mut moved, &anchor, &schedule).unwrap();
    let budget: f64 = schedule.radii().iter().map(|r| r * r).sum();
    let reference = kl_gaussian(&moved, &anchor, 1e-2).unwrap() * 1e-2 * 1e-2;
    for sigma in [1e-2, 1e-3, 1e-4] {
        let kl = kl_gaussian(&moved, &anchor, sigma).unwrap();
        // 1e-9 slack applied relatively: at sigma = 1e-4 the budget quotient
        // is ~1e8, where even one ulp of projection rounding exceeds an
        // absolute 1e-9.
        let cap = budget / (2.0 * sigma * sigma);
        assert!(kl <= cap * (1.0 + 1e-9) + 1e-9, "kl {kl} exceeds {cap}");
        let scaled = kl * sigma * sigma;
        assert!(
            (scaled - reference).abs() <= 1e-9 * reference,
            "kl*sigma^2 drifted: {scaled} vs {reference}"
        );
    }
    pass("4 kl identity");
}

// ------------------------------------------------------------ criterion 5

#[test]
fn c05_perturbed_loss_oracle() {
    let start = Instant::now();
    let weights = Array2::from_shape_vec((3, 2), vec![0.5, -1.0, 2.0, 0.25, -0.75, 1.5]).unwrap();
    let net = single_layer_rect(weights.clone());
    let x = ndarray::arr1(&[1.0, -2.0]);
    let y = ndarray::arr1(&[0.5, 0.0, -1.0]);
    let squared_error = |candidate: &Network| {
        let out = candidate.layers()[0].weights.dot(&x);
        (&out - &y).mapv(|v| v * v).sum()
    };

    let base = squared_error(&net);
    let sigma = 0.1;
    let m = 3.0;
    let expected = base + sigma * sigma * m * x.dot(&x);

    let mut spec = PerturbSpec::new(sigma, 100_000, 777);
    spec.perturb_biases = false;
    let (mean, std_error) = perturbed_loss_with(&net, &spec, squared_error).unwrap();
    assert!(
        (mean - expected).abs() <= 3.0 * std_error,
        "mean {mean} vs closed form {expected} (stderr {std_error})"
    );

    let zero = PerturbSpec::new(0.0, 10, 777);
    let (exact, stderr) = perturbed_loss_with(&net, &zero, squared_error).unwrap();
    assert_eq!(exact, base);
    assert_eq!(stderr, 0.0);
    assert!(start.elapsed() < Duration::from_secs(60));
    pass("5 perturbed-loss oracle");
}

fn single_layer_rect(weights: Array2<f64>) -> Network {
    let rows = weights.nrows();
    let layer = Layer::new(weights, Array1::zeros(rows), Activation::Identity).unwrap();
    Network::new(vec![layer], rows).unwrap()
}

// ------------------------------------------------------------ criterion 6

#[test]
fn c06_noise_model() {
    let labels: Vec<usize> = (0..10_000).map(|i| i % 10).collect();
    for seed in 0..20u64 {
        let (_, mask) = inject_independent(&labels, 0.4, 10, seed).unwrap();
        let rate = mask.iter().filter(|&&m| m).count() as f64 / mask.len() as f64;
        assert!(
            (0.38..=0.42).contains(&rate),
            "seed {seed}: realized rate {rate}"
        );
    }

    let (noisy, mask) = inject_independent(&labels, 0.0, 10, 3).unwrap();
    assert_eq!(noisy, labels);
    assert!(mask.iter().all(|&m| !m));

    let two_class: Vec<usize> = (0..500).map(|i| i % 2).collect();
    let (noisy, mask) = inject_independent(&two_class, 1.0, 2, 3).unwrap();
    assert!(mask.iter().all(|&m| m));
    assert!(noisy
        .iter()
        .zip(two_class.iter())
        .all(|(a, b)| *a == 1 - *b));
    pass("6 noise model");
}

// ------------------------------------------------------------ criterion 7

#[test]
fn c07_algorithm_equivalences() {
    let (features, labels) = make_blobs(400, 8, 4, 2.0, 71).unwrap();
    let (noisy, _) = inject_independent(&labels, 0.3, 4, 72).unwrap();
    let mut ds =
        NoisyDataset::with_noisy_labels(features.clone(), labels.clone(), noisy, 4).unwrap();
    let spec = NetSpec {
        input_dim: 8,
        hidden_widths: vec![16],
        hidden_activation: Activation::ReLU,
        num_classes: 4,
    };
    let init = init_network(&spec, 73).unwrap();
    let cfg = TrainConfig::new(0.05, 32, 6, 74);

    // Infinite radii + self-labeling off == vanilla, bit for bit.
    let (vanilla_net, vanilla_metrics) = finetune_vanilla(&ds, &init, &cfg, None).unwrap();
    let free = TrainConfig {
        schedule: Some(DistanceSchedule::unconstrained(2)),
        ..cfg.clone()
    };
    let (free_net, free_metrics) = finetune_regsl(&mut ds, &init, &free, None).unwrap();
    assert_eq!(vanilla_net, free_net);
    for (a, b) in vanilla_metrics.iter().zip(free_metrics.iter()) {
        assert_eq!(a.train_loss.to_bits(), b.train_loss.to_bits());
        assert_eq!(a.layer_distances, b.layer_distances);
    }

    // All-zero radii freeze the weight matrices exactly.
    let frozen_cfg = TrainConfig {
        schedule: Some(DistanceSchedule::exponential(0.0, 1.0, 2).unwrap()),
        ..cfg.clone()
    };
    let (frozen, _) = finetune_regsl(&mut ds, &init, &frozen_cfg, None).unwrap();
    for (trained, original) in frozen.layers().iter().zip(init.layers().iter()) {
        assert_eq!(trained.weights, original.weights);
    }

    // An unattainable threshold never corrects.
    let strict = TrainConfig {
        schedule: Some(DistanceSchedule::unconstrained(2)),
        selflabel: Some(SelfLabelConfig {
            correction_start: 0,
            correction_threshold: 1.0,
            reweight_start: u64::MAX,
            temperature: 1.0,
        }),
        ..cfg.clone()
    };
    let before = ds.working_labels().to_vec();
    let (_, metrics) = finetune_regsl(&mut ds, &init, &strict, None).unwrap();
    assert_eq!(ds.working_labels(), before.as_slice());
    assert!(metrics.iter().all(|m| m.correction_events == 0));

    // Huge temperature: the weighted batch loss equals the plain mean.
    let sl = SelfLabelConfig {
        correction_start: u64::MAX,
        correction_threshold: 1.0,
        reweight_start: 0,
        temperature: 1e12,
    };
    let mut rng = rng_for(75, "init");
    for _ in 0..100 {
        let losses: Vec<f64> = (0..16).map(|_| rng.random_range(0.0..30.0)).collect();
        let weights: Vec<f64> = losses.iter().map(|&l| weight(l, 1, &sl)).collect();
        let weighted = weighted_batch_loss(&losses, &weights).unwrap();
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        assert!(
            (weighted - mean).abs() < 1e-9,
            "weighted {weighted} vs mean {mean}"
        );
    }
    pass("7 algorithm equivalences");
}

// ------------------------------------------------- criteria 8-10 (bundle)

const BUNDLE_SEEDS: [u64; 5] = [11, 22, 33, 44, 55];
const BLOBS_DIM: usize = 20;
const BLOBS_CLASSES: usize = 10;
const BLOBS_SEPARATION: f64 = 3.2;
const NOISE_RATE: f64 = 0.6;
// Hidden width 256 gives ~7.7k parameters against 2000 training rows, so
// the unconstrained arms have real memorization capacity.
const HIDDEN_WIDTH: usize = 256;
const FINETUNE_EPOCHS: usize = 40;
const FINETUNE_LR: f64 = 0.1;
const REWEIGHT_START_EPOCH: u64 = 3;
const CORRECTION_START_EPOCH: u64 = 8;
const REWEIGHT_TEMPERATURE: f64 = 3.0;

struct Arm {
    metrics: Vec<EpochMetrics>,
    final_test_accuracy: f64,
    final_gap: f64,
}

struct SeedRun {
    anchor_test_accuracy: f64,
    vanilla: Arm,
    reg_only: Arm,
    full: Arm,
    selflabel_only: Arm,
}

struct Bundle {
    runs: Vec<SeedRun>,
    elapsed: Duration,
}

fn arm(metrics: Vec<EpochMetrics>) -> Arm {
    let last = metrics.last().expect("metrics nonempty").clone();
    Arm {
        final_test_accuracy: last.test_accuracy.expect("test split present"),
        final_gap: last.generalization_gap.expect("test split present"),
        metrics,
    }
}

fn run_seed(seed: u64) -> SeedRun {
    // One sample, three disjoint row ranges: source (pretraining), target
    // (noisy fine-tuning), test (clean evaluation). Rows are interleaved by
    // class, so contiguous ranges stay balanced.
    let total = 2000 + 2000 + 1000;
    let (features, labels) =
        make_blobs(total, BLOBS_DIM, BLOBS_CLASSES, BLOBS_SEPARATION, seed).unwrap();
    let source: Vec<usize> = (0..2000).collect();
    let target: Vec<usize> = (2000..4000).collect();
    let test: Vec<usize> = (4000..5000).collect();
    let (source_f, source_l) = take_rows(&features, &labels, &source);
    let (target_f, target_l) = take_rows(&features, &labels, &target);
    let (test_f, test_l) = take_rows(&features, &labels, &test);
    let eval_split = EvalSplit {
        features: &test_f,
        labels: &test_l,
    };

    let spec = NetSpec {
        input_dim: BLOBS_DIM,
        hidden_widths: vec![HIDDEN_WIDTH],
        hidden_activation: Activation::ReLU,
        num_classes: BLOBS_CLASSES,
    };
    let pre_cfg = TrainConfig::new(0.1, 32, 30, derive_seed(seed, "pretrain"));
    let anchor = pretrain(&source_f, &source_l, &spec, &pre_cfg).unwrap();
    let anchor_test_accuracy = evaluate(&anchor, &test_f, &test_l).unwrap().1;

    let (noisy, _) = inject_independent(&target_l, NOISE_RATE, BLOBS_CLASSES, seed).unwrap();
    let make_ds = || {
        NoisyDataset::with_noisy_labels(target_f.clone(), target_l.clone(), noisy.clone(), BLOBS_CLASSES)
            .unwrap()
    };

    let base_cfg = TrainConfig::new(
        FINETUNE_LR,
        32,
        FINETUNE_EPOCHS,
        derive_seed(seed, "finetune"),
    );
    let steps_per_epoch = (2000u64).div_ceil(base_cfg.batch_size as u64);
    let schedule = DistanceSchedule::exponential(0.5, 2.0, 2).unwrap();
    let selflabel = SelfLabelConfig {
        correction_start: CORRECTION_START_EPOCH * steps_per_epoch,
        correction_threshold: 0.90,
        reweight_start: REWEIGHT_START_EPOCH * steps_per_epoch,
        temperature: REWEIGHT_TEMPERATURE,
    };

    let ds = make_ds();
    let (_, vanilla_metrics) =
        finetune_vanilla(&ds, &anchor, &base_cfg, Some(eval_split)).unwrap();

    let reg_cfg = TrainConfig {
        schedule: Some(schedule.clone()),
        ..base_cfg.clone()
    };
    let mut ds_reg = make_ds();
    let (_, reg_metrics) =
        finetune_regsl(&mut ds_reg, &anchor, &reg_cfg, Some(eval_split)).unwrap();

    let full_cfg = TrainConfig {
        schedule: Some(schedule.clone()),
        selflabel: Some(selflabel.clone()),
        ..base_cfg.clone()
    };
    let mut ds_full = make_ds();
    let (_, full_metrics) =
        finetune_regsl(&mut ds_full, &anchor, &full_cfg, Some(eval_split)).unwrap();

    let sl_cfg = TrainConfig {
        schedule: Some(DistanceSchedule::unconstrained(2)),
        selflabel: Some(selflabel),
        ..base_cfg.clone()
    };
    let mut ds_sl = make_ds();
    let (_, sl_metrics) = finetune_regsl(&mut ds_sl, &anchor, &sl_cfg, Some(eval_split)).unwrap();

    SeedRun {
        anchor_test_accuracy,
        vanilla: arm(vanilla_metrics),
        reg_only: arm(reg_metrics),
        full: arm(full_metrics),
        selflabel_only: arm(sl_metrics),
    }
}

static BUNDLE: LazyLock<Bundle> = LazyLock::new(|| {
    let start = Instant::now();
    let runs = BUNDLE_SEEDS.iter().map(|&s| run_seed(s)).collect();
    Bundle {
        runs,
        elapsed: start.elapsed(),
    }
});

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}

#[test]
fn c08_memorization_gap() {
    let bundle = &*BUNDLE;
    for (i, run) in bundle.runs.iter().enumerate() {
        eprintln!(
            "seed[{i}] anchor={:.3} vanilla(test={:.3} gap={:+.3}) reg(test={:.3} gap={:+.3}) \
             full(test={:.3} gap={:+.3}) sl(test={:.3} gap={:+.3})",
            run.anchor_test_accuracy,
            run.vanilla.final_test_accuracy,
            run.vanilla.final_gap,
            run.reg_only.final_test_accuracy,
            run.reg_only.final_gap,
            run.full.final_test_accuracy,
            run.full.final_gap,
            run.selflabel_only.final_test_accuracy,
            run.selflabel_only.final_gap,
        );
    }

    // Setup premise: the pre-trained model's clean test accuracy sits near 0.9.
    let mut anchor_acc: Vec<f64> = bundle
        .runs
        .iter()
        .map(|r| r.anchor_test_accuracy)
        .collect();
    let anchor_median = median(&mut anchor_acc);
    assert!(
        (0.80..=0.97).contains(&anchor_median),
        "anchor clean accuracy {anchor_median} is not near 0.9"
    );

    // Margin pinned from the baseline run of this deterministic bundle
    // (observed ~0.65); the required floor is 10 accuracy points.
    let mut vanilla_gap: Vec<f64> = bundle.runs.iter().map(|r| r.vanilla.final_gap).collect();
    let mut reg_gap: Vec<f64> = bundle.runs.iter().map(|r| r.reg_only.final_gap).collect();
    let gap_margin = median(&mut vanilla_gap) - median(&mut reg_gap);
    assert!(
        gap_margin >= 0.10,
        "vanilla-minus-regularized gap margin {gap_margin} below 10 accuracy points"
    );
    assert!(
        gap_margin >= 0.50,
        "gap margin {gap_margin} fell below the pinned baseline of 0.50"
    );

    let mut vanilla_acc: Vec<f64> = bundle
        .runs
        .iter()
        .map(|r| r.vanilla.final_test_accuracy)
        .collect();
    let mut reg_acc: Vec<f64> = bundle
        .runs
        .iter()
        .map(|r| r.reg_only.final_test_accuracy)
        .collect();
    let mut full_acc: Vec<f64> = bundle
        .runs
        .iter()
        .map(|r| r.full.final_test_accuracy)
        .collect();
    let (vanilla_med, reg_med, full_med) = (
        median(&mut vanilla_acc),
        median(&mut reg_acc),
        median(&mut full_acc),
    );
    assert!(
        full_med >= reg_med,
        "full {full_med} below regularization-only {reg_med}"
    );
    assert!(
        reg_med > vanilla_med,
        "regularization-only {reg_med} not above vanilla {vanilla_med}"
    );
    // Pinned from the baseline run (observed ~0.36).
    assert!(
        reg_med - vanilla_med >= 0.20,
        "regularization-only lead {:.3} fell below the pinned baseline of 0.20",
        reg_med - vanilla_med
    );

    assert!(
        bundle.elapsed < Duration::from_secs(300),
        "bundle took {:?}",
        bundle.elapsed
    );
    pass("8 memorization gap");
}

#[test]
fn c09_weight_gap_direction() {
    let bundle = &*BUNDLE;
    for (i, run) in bundle.runs.iter().enumerate() {
        let rows: Vec<&EpochMetrics> = run
            .full
            .metrics
            .iter()
            .filter(|m| m.epoch as u64 >= REWEIGHT_START_EPOCH)
            .collect();
        assert!(!rows.is_empty());
        let favored = rows
            .iter()
            .filter(|m| {
                matches!(
                    (m.mean_noisy_weight, m.mean_clean_weight),
                    (Some(noisy), Some(clean)) if noisy < clean
                )
            })
            .count();
        let fraction = favored as f64 / rows.len() as f64;
        assert!(
            fraction >= 0.9,
            "seed {i}: clean weights beat noisy in only {fraction} of epochs"
        );
    }
    pass("9 weight-gap direction");
}

/// Per-epoch precisions of the first `k` epochs that corrected anything.
fn early_precisions(metrics: &[EpochMetrics], k: usize) -> Vec<f64> {
    metrics
        .iter()
        .filter(|m| m.correction_events > 0)
        .take(k)
        .map(|m| m.correction_precision.expect("events imply precision"))
        .collect()
}

/// Precision pooled over every correcting epoch of a run.
fn pooled_precision(metrics: &[EpochMetrics]) -> Option<f64> {
    let mut hits = 0.0;
    let mut total = 0.0;
    for m in metrics {
        if m.correction_events > 0 {
            let precision = m.correction_precision.expect("events imply precision");
            hits += precision * m.correction_events as f64;
            total += m.correction_events as f64;
        }
    }
    (total > 0.0).then_some(hits / total)
}

#[test]
fn c10_correction_precision_direction() {
    let bundle = &*BUNDLE;
    let chance = 1.0 / BLOBS_CLASSES as f64;
    let mut full_pooled = Vec::new();
    let mut sl_pooled = Vec::new();
    for (i, run) in bundle.runs.iter().enumerate() {
        let per_epoch = early_precisions(&run.full.metrics, 3);
        assert_eq!(per_epoch.len(), 3, "seed {i}: fewer than 3 correcting epochs");
        for (j, p) in per_epoch.iter().enumerate() {
            assert!(
                *p > chance,
                "seed {i}: correcting epoch {j} precision {p} not above chance {chance}"
            );
        }
        // The with/without-regularization comparison pools every correcting
        // epoch: both arms start near ceiling, the difference shows up as
        // the unregularized model drifts over training.
        let full = pooled_precision(&run.full.metrics).expect("full arm corrects");
        let sl = pooled_precision(&run.selflabel_only.metrics).expect("sl arm corrects");
        eprintln!(
            "seed[{i}] early {per_epoch:?}; pooled with reg {full:.3}, without {sl:.3}"
        );
        full_pooled.push(full);
        sl_pooled.push(sl);
    }
    let with_reg = median(&mut full_pooled);
    let without_reg = median(&mut sl_pooled);
    eprintln!("median pooled precision: with reg {with_reg:.3}, without {without_reg:.3}");
    assert!(
        with_reg >= without_reg,
        "precision with regularization {with_reg} below without {without_reg}"
    );
    pass("10 correction precision direction");
}

// ----------------------------------------------------------- criterion 11

#[test]
fn c11_run_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = "\
seed = 19
data.source = blobs
data.n = 800
data.d = 10
data.classes = 5
data.separation = 3.0
net.hidden = [24]
noise.kind = independent
noise.rate = 0.4
train.mode = regsl
train.learning_rate = 0.05
train.batch_size = 32
train.epochs = 8
constraint.base_d = 0.4
constraint.gamma = 2.0
selflabel.enabled = true
selflabel.reweight_start_epoch = 2
selflabel.correction_start_epoch = 3
";
    std::fs::write(dir.path().join("exp.txt"), config).unwrap();
    for out in ["a", "b"] {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_ftlab"))
            .args(["train", "--config", "exp.txt", "--out", out])
            .current_dir(dir.path())
            .status()
            .unwrap();
        assert!(status.success());
    }
    for file in [
        "metrics.csv",
        "dataset.noise.csv",
        "weights/start.txt",
        "weights/final.txt",
    ] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "file {file} differs between identical runs");
    }
    pass("11 run determinism");
}
