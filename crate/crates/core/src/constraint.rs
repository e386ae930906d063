//! Layer-wise Frobenius-ball constraints.
//!
//! Each layer's weight matrix is kept inside a Frobenius ball of radius
//! `D_i` around an anchor (the pre-trained weights). Radii come either from
//! an explicit list or from the exponential schedule `D * gamma^i`, which is
//! tight at the bottom of the stack and loose at the top. Projection is the
//! closed-form radial scaling onto the ball; biases are never constrained.

use ndarray::Array2;

use crate::nn::Network;
use crate::{Error, Result};

/// Frobenius norm of a matrix.
pub fn frobenius_norm(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Per-layer constraint radii. A radius may be `f64::INFINITY` to leave a
/// layer unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSchedule {
    radii: Vec<f64>,
}

impl DistanceSchedule {
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::InvalidParameter("schedule has no radii".into()));
        }
        for (i, &r) in radii.iter().enumerate() {
            if r.is_nan() || r < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "radius {i} is {r}, must be >= 0"
                )));
            }
        }
        Ok(DistanceSchedule { radii })
    }

    /// Radii `base_d * gamma^i` for `i = 0..num_layers`, nondecreasing up
    /// the stack since `gamma >= 1`.
    pub fn exponential(base_d: f64, gamma: f64, num_layers: usize) -> Result<Self> {
        if !base_d.is_finite() || base_d < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "base distance {base_d} must be finite and >= 0"
            )));
        }
        if !gamma.is_finite() || gamma < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "scale factor {gamma} must be finite and >= 1"
            )));
        }
        if num_layers == 0 {
            return Err(Error::InvalidParameter(
                "schedule needs at least one layer".into(),
            ));
        }
        let radii = (0..num_layers)
            .map(|i| base_d * gamma.powi(i as i32))
            .collect();
        Ok(DistanceSchedule { radii })
    }

    /// All-infinite radii: every layer unconstrained.
    pub fn unconstrained(num_layers: usize) -> Self {
        DistanceSchedule {
            radii: vec![f64::INFINITY; num_layers],
        }
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }
}

fn check_shapes(net: &Network, anchor: &Network) -> Result<()> {
    if net.num_layers() != anchor.num_layers() {
        return Err(Error::ShapeMismatch(format!(
            "network has {} layers, anchor has {}",
            net.num_layers(),
            anchor.num_layers()
        )));
    }
    for (i, (a, b)) in net.layers().iter().zip(anchor.layers().iter()).enumerate() {
        if a.weights.raw_dim() != b.weights.raw_dim() {
            return Err(Error::ShapeMismatch(format!(
                "layer {i} weight shapes differ: {:?} vs {:?}",
                a.weights.shape(),
                b.weights.shape()
            )));
        }
    }
    Ok(())
}

/// Projects every weight matrix onto its Frobenius ball around the anchor:
/// `W <- What + min(1, D/||W - What||_F) * (W - What)`.
///
/// A layer already inside its ball is left untouched (bit-exact), which also
/// covers the degenerate `D = 0`, `||W - What|| = 0` case. Biases are not
/// modified.
pub fn project_in_place(
    net: &mut Network,
    anchor: &Network,
    schedule: &DistanceSchedule,
) -> Result<()> {
    check_shapes(net, anchor)?;
    if schedule.len() != net.num_layers() {
        return Err(Error::ShapeMismatch(format!(
            "schedule has {} radii, network has {} layers",
            schedule.len(),
            net.num_layers()
        )));
    }
    for ((layer, anchor_layer), &radius) in net
        .layers_mut()
        .iter_mut()
        .zip(anchor.layers().iter())
        .zip(schedule.radii().iter())
    {
        if radius.is_infinite() {
            continue;
        }
        let diff = &layer.weights - &anchor_layer.weights;
        let dist = frobenius_norm(&diff);
        if dist <= radius {
            continue;
        }
        let scale = radius / dist;
        layer.weights = &anchor_layer.weights + &(diff * scale);
    }
    Ok(())
}

/// Out-of-place variant of [`project_in_place`].
pub fn project(net: &Network, anchor: &Network, schedule: &DistanceSchedule) -> Result<Network> {
    let mut out = net.clone();
    project_in_place(&mut out, anchor, schedule)?;
    Ok(out)
}

/// Frobenius distance of each weight matrix to the anchor.
pub fn layer_distances(net: &Network, anchor: &Network) -> Result<Vec<f64>> {
    check_shapes(net, anchor)?;
    Ok(net
        .layers()
        .iter()
        .zip(anchor.layers().iter())
        .map(|(a, b)| frobenius_norm(&(&a.weights - &b.weights)))
        .collect())
}

/// Per-layer distance divided by the anchor layer's own norm.
pub fn distance_ratios(net: &Network, anchor: &Network) -> Result<Vec<f64>> {
    check_shapes(net, anchor)?;
    let mut out = Vec::with_capacity(net.num_layers());
    for (i, (a, b)) in net.layers().iter().zip(anchor.layers().iter()).enumerate() {
        let denom = frobenius_norm(&b.weights);
        if denom == 0.0 {
            return Err(Error::DegenerateAnchor { layer: i });
        }
        out.push(frobenius_norm(&(&a.weights - &b.weights)) / denom);
    }
    Ok(out)
}
