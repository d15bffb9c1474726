//! Statistics encoder: conv stack, then global weighted averaging of the
//! feature maps into one frame-describing vector. The averaging weights are
//! a softmax over a learned spatial logit map that the final conv layer
//! emits as one extra channel.

use super::{ConvTrace, StatsVector};
use crate::error::{Error, Result};
use crate::ops::{activation, activation_adjoint, conv2d, conv2d_adjoint, Padding};
use crate::tensor::{KernelStack, Tensor};
use crate::topology::TopologySpec;

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Softmax-weighted global average: `out_c = Σ_p softmax(logits)_p · features(p, c)`.
pub fn global_weighted_average(features: &Tensor, weight_logits: &Tensor) -> Result<StatsVector> {
    check_gwa_dims(features, weight_logits)?;
    let w = softmax(weight_logits.data());
    let ch = features.channels();
    let mut out = vec![0.0f64; ch];
    for (p, &wp) in w.iter().enumerate() {
        let base = p * ch;
        for c in 0..ch {
            out[c] += wp * features.data()[base + c];
        }
    }
    Ok(StatsVector(out))
}

pub struct GwaGrads {
    pub features: Tensor,
    pub logits: Tensor,
}

/// Reverse-mode gradients of [`global_weighted_average`] w.r.t. the feature
/// maps and the weight logits.
pub fn global_weighted_average_adjoint(
    features: &Tensor,
    weight_logits: &Tensor,
    grad_stats: &[f64],
) -> Result<GwaGrads> {
    check_gwa_dims(features, weight_logits)?;
    let ch = features.channels();
    if grad_stats.len() != ch {
        return Err(Error::contract(
            "global average adjoint: gradient length must equal feature channels",
        ));
    }
    let w = softmax(weight_logits.data());
    let pixels = w.len();
    let mut grad_features = vec![0.0f64; pixels * ch];
    // s_p = <grad_stats, features(p, ·)>; grad_logits = w ⊙ (s − <w, s>)
    let mut s = vec![0.0f64; pixels];
    for p in 0..pixels {
        let base = p * ch;
        let mut acc = 0.0;
        for c in 0..ch {
            grad_features[base + c] = w[p] * grad_stats[c];
            acc += grad_stats[c] * features.data()[base + c];
        }
        s[p] = acc;
    }
    let dot: f64 = w.iter().zip(&s).map(|(a, b)| a * b).sum();
    let grad_logits: Vec<f64> = w.iter().zip(&s).map(|(&wp, &sp)| wp * (sp - dot)).collect();
    Ok(GwaGrads {
        features: Tensor::from_op(features.height(), features.width(), ch, grad_features),
        logits: Tensor::from_op(
            weight_logits.height(),
            weight_logits.width(),
            1,
            grad_logits,
        ),
    })
}

fn check_gwa_dims(features: &Tensor, logits: &Tensor) -> Result<()> {
    if logits.channels() != 1 {
        return Err(Error::contract("weight logits must be single-channel"));
    }
    if features.height() != logits.height() || features.width() != logits.width() {
        return Err(Error::contract(format!(
            "global average: features {}x{} vs logits {}x{}",
            features.height(),
            features.width(),
            logits.height(),
            logits.width()
        )));
    }
    Ok(())
}

pub struct StatsTrace {
    pub(crate) layers: Vec<ConvTrace>,
    pub(crate) features: Tensor,
    pub(crate) logits: Tensor,
}

pub fn stats_forward(
    frame: &Tensor,
    stats_params: &[KernelStack],
    spec: &TopologySpec,
) -> Result<StatsVector> {
    stats_forward_traced(frame, stats_params, spec).map(|(v, _)| v)
}

/// Run the conv stack (reflect padding) and the global average, recording
/// per-layer inputs for the adjoint pass.
pub fn stats_forward_traced(
    frame: &Tensor,
    stats_params: &[KernelStack],
    spec: &TopologySpec,
) -> Result<(StatsVector, StatsTrace)> {
    if frame.channels() != spec.input_channels {
        return Err(Error::contract(format!(
            "stats: frame has {} channels, topology expects {}",
            frame.channels(),
            spec.input_channels
        )));
    }
    if stats_params.len() != spec.stats_layers.len() {
        return Err(Error::contract("stats: parameter/layer count mismatch"));
    }
    let mut x = frame.clone();
    let mut layers = Vec::with_capacity(stats_params.len());
    for (kernel, layer) in stats_params.iter().zip(&spec.stats_layers) {
        let pre = conv2d(&x, kernel, Padding::Reflect)?;
        let post = activation(&pre, layer.activation);
        layers.push(ConvTrace {
            input: x,
            pre_activation: pre,
        });
        x = post;
    }
    let d_s = spec.stats_vector_dim;
    let features = x.channel_range(0, d_s)?;
    let logits = x.channel(d_s)?;
    let stats = global_weighted_average(&features, &logits)?;
    Ok((
        stats,
        StatsTrace {
            layers,
            features,
            logits,
        },
    ))
}

/// Gradients of every stats-layer kernel given the upstream gradient of the
/// statistics vector. The gradient w.r.t. the frame itself is discarded.
pub fn stats_backward(
    trace: &StatsTrace,
    stats_params: &[KernelStack],
    spec: &TopologySpec,
    grad_stats: &[f64],
) -> Result<Vec<KernelStack>> {
    let gwa = global_weighted_average_adjoint(&trace.features, &trace.logits, grad_stats)?;
    let mut grad_x = Tensor::concat_channels(&[&gwa.features, &gwa.logits])?;
    let mut grads = vec![None; stats_params.len()];
    for j in (0..stats_params.len()).rev() {
        let grad_pre =
            activation_adjoint(&trace.layers[j].pre_activation, spec.stats_layers[j].activation, &grad_x)?;
        let conv_grads =
            conv2d_adjoint(&trace.layers[j].input, &stats_params[j], Padding::Reflect, &grad_pre)?;
        grads[j] = Some(conv_grads.kernel);
        grad_x = conv_grads.input;
    }
    Ok(grads.into_iter().map(|g| g.unwrap()).collect())
}
