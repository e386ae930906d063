//! Minimal feedforward network with exact analytic gradients.
//!
//! Layers are dense affine transforms with an element-wise activation:
//! `a_i = psi(W_i a_{i-1} + b_i)`. The network output (after the final
//! layer's activation) is treated as the logit vector; predictions are its
//! softmax. All arithmetic is `f64`.
//!
//! Weight matrices are the only parameters subject to distance constraints
//! (see [`crate::constraint`]); biases are trained but never projected.

use ndarray::{Array1, Array2, ArrayView1};

use crate::{Error, Result};

/// Smallest probability fed to the log in cross-entropy. Keeps the loss
/// bounded above by [`loss_upper_bound`] and makes it usable in the
/// PAC-Bayes bound, which assumes a bounded loss.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Upper bound of the floored cross-entropy loss, `-ln(PROBABILITY_FLOOR)`.
pub fn loss_upper_bound() -> f64 {
    -PROBABILITY_FLOOR.ln()
}

/// Element-wise activation kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    ReLU,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::ReLU => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative with respect to the pre-activation. The ReLU subgradient
    /// at 0 is defined as 0.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::ReLU => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::ReLU => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "relu" => Ok(Activation::ReLU),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::InvalidParameter(format!(
                "unknown activation `{other}` (expected relu, tanh, or identity)"
            ))),
        }
    }
}

/// One dense layer: weight matrix (rows = output width, cols = input width),
/// bias vector (length = output width), and an activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        if weights.nrows() == 0 || weights.ncols() == 0 {
            return Err(Error::ShapeMismatch(
                "layer dimensions must be positive".into(),
            ));
        }
        if bias.len() != weights.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "bias length {} does not match output width {}",
                bias.len(),
                weights.nrows()
            )));
        }
        let layer = Layer {
            weights,
            bias,
            activation,
        };
        if !layer.is_finite() {
            return Err(Error::InvalidParameter(
                "layer contains non-finite entries".into(),
            ));
        }
        Ok(layer)
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite()) && self.bias.iter().all(|b| b.is_finite())
    }
}

/// Ordered stack of dense layers ending in a `num_classes`-wide output.
///
/// Cloning a network yields a deep, independent copy of all parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    num_classes: usize,
}

impl Network {
    pub fn new(layers: Vec<Layer>, num_classes: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::ShapeMismatch("network has no layers".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {} output width {} does not match layer {} input width {}",
                    i,
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        let last = layers.last().expect("nonempty");
        if last.out_dim() != num_classes {
            return Err(Error::ShapeMismatch(format!(
                "final layer output width {} does not match num_classes {}",
                last.out_dim(),
                num_classes
            )));
        }
        Ok(Network {
            layers,
            num_classes,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    /// Maximum width over all layers, input dimension included.
    pub fn max_width(&self) -> usize {
        self.layers
            .iter()
            .map(Layer::out_dim)
            .chain(std::iter::once(self.input_dim()))
            .max()
            .expect("nonempty")
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Layer::is_finite)
    }

    /// In-place SGD step: `W -= lr * gW`, `b -= lr * gb`.
    pub fn apply_gradients(&mut self, learning_rate: f64, grads: &Gradients) -> Result<()> {
        if grads.weights.len() != self.layers.len() {
            return Err(Error::ShapeMismatch(format!(
                "gradient has {} layers, network has {}",
                grads.weights.len(),
                self.layers.len()
            )));
        }
        for (layer, (gw, gb)) in self
            .layers
            .iter_mut()
            .zip(grads.weights.iter().zip(grads.biases.iter()))
        {
            layer.weights.scaled_add(-learning_rate, gw);
            layer.bias.scaled_add(-learning_rate, gb);
        }
        Ok(())
    }
}

/// Output of a forward pass: raw logits plus their softmax.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub logits: Array1<f64>,
    pub probabilities: Array1<f64>,
}

impl Prediction {
    /// Index of the largest probability; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(self.probabilities.as_slice().expect("contiguous"))
    }

    /// Largest predicted probability.
    pub fn confidence(&self) -> f64 {
        self.probabilities.iter().copied().fold(f64::MIN, f64::max)
    }
}

/// Lowest-index argmax, the tie-break used everywhere in this crate.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax (max subtraction).
pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = logits.mapv(|z| (z - max).exp());
    let sum: f64 = out.sum();
    out.mapv_inplace(|e| e / sum);
    out
}

/// Per-layer cache of a forward pass, enough to run the backward pass
/// without recomputing activations.
pub struct Trace {
    /// `activations[0]` is the input; `activations[i]` the output of layer `i-1`.
    activations: Vec<Array1<f64>>,
    /// `pre_activations[i]` is `W_i a_{i-1} + b_i`.
    pre_activations: Vec<Array1<f64>>,
    pub prediction: Prediction,
}

/// Forward pass keeping intermediate values for a later backward pass.
pub fn forward_trace(net: &Network, x: ArrayView1<f64>) -> Result<Trace> {
    if x.len() != net.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "input length {} does not match network input width {}",
            x.len(),
            net.input_dim()
        )));
    }
    let mut activations = Vec::with_capacity(net.num_layers() + 1);
    let mut pre_activations = Vec::with_capacity(net.num_layers());
    activations.push(x.to_owned());
    for layer in net.layers() {
        let z = layer.weights.dot(activations.last().expect("nonempty")) + &layer.bias;
        let a = z.mapv(|v| layer.activation.apply(v));
        pre_activations.push(z);
        activations.push(a);
    }
    let logits = activations.last().expect("nonempty").clone();
    let probabilities = softmax(logits.view());
    Ok(Trace {
        activations,
        pre_activations,
        prediction: Prediction {
            logits,
            probabilities,
        },
    })
}

/// Forward pass producing logits and softmax probabilities.
pub fn forward(net: &Network, x: ArrayView1<f64>) -> Result<Prediction> {
    forward_trace(net, x).map(|t| t.prediction)
}

/// Cross-entropy of a prediction against a class index, floored at
/// [`PROBABILITY_FLOOR`] so the value is bounded. Non-finite probabilities
/// propagate to a non-finite loss so divergence stays detectable.
pub fn loss(pred: &Prediction, label: usize) -> Result<f64> {
    let k = pred.probabilities.len();
    if label >= k {
        return Err(Error::LabelOutOfRange {
            label,
            num_classes: k,
        });
    }
    let p = pred.probabilities[label];
    let floored = if p < PROBABILITY_FLOOR {
        PROBABILITY_FLOOR
    } else {
        p
    };
    Ok(-floored.ln())
}

/// Per-layer gradients, same shapes as the network's weights and biases.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            weights: net
                .layers()
                .iter()
                .map(|l| Array2::zeros(l.weights.raw_dim()))
                .collect(),
            biases: net
                .layers()
                .iter()
                .map(|l| Array1::zeros(l.bias.raw_dim()))
                .collect(),
        }
    }

    /// `self += coeff * other`.
    pub fn add_scaled(&mut self, coeff: f64, other: &Gradients) {
        for (acc, g) in self.weights.iter_mut().zip(other.weights.iter()) {
            acc.scaled_add(coeff, g);
        }
        for (acc, g) in self.biases.iter_mut().zip(other.biases.iter()) {
            acc.scaled_add(coeff, g);
        }
    }
}

/// Gradient of the cross-entropy loss for one example, reusing a forward
/// trace. The softmax/cross-entropy pair gives `dL/dlogits = p - onehot`.
pub fn backward_from_trace(net: &Network, trace: &Trace, label: usize) -> Result<Gradients> {
    let k = net.num_classes();
    if label >= k {
        return Err(Error::LabelOutOfRange {
            label,
            num_classes: k,
        });
    }
    let mut grads = Gradients::zeros_like(net);
    // dL/da for the current layer's output, starting at the logits.
    let mut d_output = trace.prediction.probabilities.clone();
    d_output[label] -= 1.0;
    for (i, layer) in net.layers().iter().enumerate().rev() {
        let z = &trace.pre_activations[i];
        let d_pre = ndarray::Zip::from(&d_output)
            .and(z)
            .map_collect(|&d, &zv| d * layer.activation.derivative(zv));
        let input = &trace.activations[i];
        // Outer product d_pre x input.
        for (r, &dr) in d_pre.iter().enumerate() {
            let mut row = grads.weights[i].row_mut(r);
            row.scaled_add(dr, input);
        }
        grads.biases[i].assign(&d_pre);
        if i > 0 {
            d_output = layer.weights.t().dot(&d_pre);
        }
    }
    Ok(grads)
}

/// Analytic gradient of `loss(forward(net, x), label)` with respect to every
/// weight and bias.
pub fn backward(net: &Network, x: ArrayView1<f64>, label: usize) -> Result<Gradients> {
    let trace = forward_trace(net, x)?;
    backward_from_trace(net, &trace, label)
}
