//! Trainable parameter set and the end-to-end forward/backward composition.

use std::ops::Range;


use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::engine::{
    mix_backward, mix_weights_traced, DenseLayer, KernelBank, MixTrace, ProcessWeights,
};
use super::process::{process_backward, process_forward_traced, ProcessTrace};
use super::stats::{stats_backward, stats_forward_traced, StatsTrace};
use super::PrefVector;
use crate::error::{Error, Result};
use crate::tensor::{KernelStack, Tensor};
use crate::topology::TopologySpec;

/// Every trainable parameter of the system: statistics-encoder convolutions
/// (the final layer includes the averaging logit map as its last output
/// channel), the weight-engine FCNN, and the kernel bank.
///
/// The same struct doubles as the gradient container — gradients have the
/// shape of their parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub stats: Vec<KernelStack>,
    pub fcnn: Vec<DenseLayer>,
    pub bank: KernelBank,
}

impl ModelParams {
    pub fn zeros(spec: &TopologySpec) -> Result<Self> {
        spec.validate()?;
        let stats = (0..spec.stats_layers.len())
            .map(|j| {
                let l = &spec.stats_layers[j];
                KernelStack::zeros(l.out_channels, spec.stats_in_channels(j), l.taps, l.taps)
            })
            .collect::<Result<Vec<_>>>()?;
        let widths = spec.fcnn_widths();
        let fcnn = widths
            .windows(2)
            .map(|w| DenseLayer::zeros(w[0], w[1]))
            .collect();
        let bank = KernelBank {
            layers: (0..spec.process_layers.len())
                .map(|j| {
                    let l = &spec.process_layers[j];
                    (0..spec.kernels_per_layer[j])
                        .map(|_| {
                            KernelStack::zeros(
                                l.out_channels,
                                spec.process_in_channels(j),
                                l.taps,
                                l.taps,
                            )
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(ModelParams { stats, fcnn, bank })
    }

    /// Fully random parameters (He-scaled normals everywhere). Used by
    /// gradient checks and tests that need a generic point in weight space.
    pub fn random(spec: &TopologySpec, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(spec)?;
        let mut rng = rand::SeedableRng::seed_from_u64(seed);
        params.randomize(&mut rng, false);
        Ok(params)
    }

    /// Training initialization: He-scaled normals, with the FCNN output
    /// layer shrunk by 100x. Mixing coefficients then start near zero, so
    /// the trunk contributes almost nothing and the model begins close to
    /// the bicubic path — but no activation is pinned at exactly zero, so
    /// every gradient path is live from the first step.
    pub fn init(spec: &TopologySpec, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(spec)?;
        let mut rng = rand::SeedableRng::seed_from_u64(seed);
        params.randomize(&mut rng, true);
        Ok(params)
    }

    fn randomize(&mut self, rng: &mut ChaCha8Rng, small_fcnn_output: bool) {
        let he = |fan_in: usize| Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
        // Biases get small random values rather than zeros: a zero bias
        // behind a relu-dead patch pins pre-activations at exactly 0.0,
        // which both stalls training and puts finite differences on the
        // relu kink.
        for k in &mut self.stats {
            let dist = he(k.in_channels * k.k_h * k.k_w);
            for w in &mut k.weights {
                *w = dist.sample(rng);
            }
            for b in &mut k.bias {
                *b = 0.01 * dist.sample(rng);
            }
        }
        let last = self.fcnn.len() - 1;
        for (l, layer) in self.fcnn.iter_mut().enumerate() {
            let scale = if small_fcnn_output && l == last {
                0.01
            } else {
                1.0
            };
            let dist = he(layer.in_dim);
            for w in &mut layer.weights {
                *w = scale * dist.sample(rng);
            }
            for b in &mut layer.bias {
                *b = scale * 0.01 * dist.sample(rng);
            }
        }
        for layer in &mut self.bank.layers {
            for k in layer.iter_mut() {
                let dist = he(k.in_channels * k.k_h * k.k_w);
                for w in &mut k.weights {
                    *w = dist.sample(rng);
                }
                for b in &mut k.bias {
                    *b = 0.01 * dist.sample(rng);
                }
            }
        }
    }

    pub fn validate(&self, spec: &TopologySpec) -> Result<()> {
        if self.stats.len() != spec.stats_layers.len() {
            return Err(Error::contract("params: stats layer count mismatch"));
        }
        for (j, k) in self.stats.iter().enumerate() {
            let l = &spec.stats_layers[j];
            if k.out_channels != l.out_channels
                || k.in_channels != spec.stats_in_channels(j)
                || k.k_h != l.taps
                || k.k_w != l.taps
            {
                return Err(Error::contract(format!("params: stats layer {j} shape")));
            }
        }
        let widths = spec.fcnn_widths();
        if self.fcnn.len() + 1 != widths.len() {
            return Err(Error::contract("params: fcnn depth mismatch"));
        }
        for (l, layer) in self.fcnn.iter().enumerate() {
            if layer.in_dim != widths[l] || layer.out_dim != widths[l + 1] {
                return Err(Error::contract(format!("params: fcnn layer {l} shape")));
            }
        }
        self.bank.validate(spec)
    }

    pub fn num_params(&self) -> usize {
        self.stats.iter().map(|k| k.num_params()).sum::<usize>()
            + self.fcnn.iter().map(|l| l.num_params()).sum::<usize>()
            + self.bank.num_params()
    }

    /// Canonical flat layout: stats layers (weights, bias), FCNN layers
    /// (weights, bias), bank layers candidate-major (weights, bias). The
    /// checkpoint format and the gradient check both use this order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for k in &self.stats {
            out.extend_from_slice(&k.weights);
            out.extend_from_slice(&k.bias);
        }
        for l in &self.fcnn {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        for layer in &self.bank.layers {
            for k in layer {
                out.extend_from_slice(&k.weights);
                out.extend_from_slice(&k.bias);
            }
        }
        out
    }

    pub fn from_flat(spec: &TopologySpec, flat: &[f64]) -> Result<Self> {
        let mut params = Self::zeros(spec)?;
        if flat.len() != params.num_params() {
            return Err(Error::contract(format!(
                "flat parameter vector has {} values, topology needs {}",
                flat.len(),
                params.num_params()
            )));
        }
        let mut pos = 0usize;
        let mut take = |len: usize| {
            let s = &flat[pos..pos + len];
            pos += len;
            s
        };
        for k in &mut params.stats {
            let (wl, bl) = (k.weights.len(), k.bias.len());
            k.weights.copy_from_slice(take(wl));
            k.bias.copy_from_slice(take(bl));
        }
        for l in &mut params.fcnn {
            let (wl, bl) = (l.weights.len(), l.bias.len());
            l.weights.copy_from_slice(take(wl));
            l.bias.copy_from_slice(take(bl));
        }
        for layer in &mut params.bank.layers {
            for k in layer.iter_mut() {
                let (wl, bl) = (k.weights.len(), k.bias.len());
                k.weights.copy_from_slice(take(wl));
                k.bias.copy_from_slice(take(bl));
            }
        }
        Ok(params)
    }

    /// Named tensors in flat order; offsets and lengths are in elements.
    pub fn tensor_entries(&self) -> Vec<TensorEntry> {
        let mut entries = Vec::new();
        let mut offset = 0usize;
        let mut push = |name: String, shape: Vec<usize>, len: usize, offset: &mut usize| {
            entries.push(TensorEntry {
                name,
                shape,
                offset: *offset,
                len,
            });
            *offset += len;
        };
        for (j, k) in self.stats.iter().enumerate() {
            push(
                format!("stats.{j}.weight"),
                vec![k.out_channels, k.in_channels, k.k_h, k.k_w],
                k.weights.len(),
                &mut offset,
            );
            push(format!("stats.{j}.bias"), vec![k.out_channels], k.bias.len(), &mut offset);
        }
        for (l, layer) in self.fcnn.iter().enumerate() {
            push(
                format!("fcnn.{l}.weight"),
                vec![layer.out_dim, layer.in_dim],
                layer.weights.len(),
                &mut offset,
            );
            push(format!("fcnn.{l}.bias"), vec![layer.out_dim], layer.bias.len(), &mut offset);
        }
        for (j, layer) in self.bank.layers.iter().enumerate() {
            for (i, k) in layer.iter().enumerate() {
                push(
                    format!("bank.{j}.{i}.weight"),
                    vec![k.out_channels, k.in_channels, k.k_h, k.k_w],
                    k.weights.len(),
                    &mut offset,
                );
                push(
                    format!("bank.{j}.{i}.bias"),
                    vec![k.out_channels],
                    k.bias.len(),
                    &mut offset,
                );
            }
        }
        entries
    }

    /// Flat-index ranges per parameter group for gradient verification:
    /// the stats convolutions, the averaging logit map (the final stats
    /// layer's extra output channel), the FCNN, and the bank.
    pub fn group_ranges(&self, spec: &TopologySpec) -> Vec<(String, Vec<Range<usize>>)> {
        let mut stats_ranges = Vec::new();
        let mut logit_ranges = Vec::new();
        let mut offset = 0usize;
        let last = self.stats.len() - 1;
        for (j, k) in self.stats.iter().enumerate() {
            let w_len = k.weights.len();
            let b_len = k.bias.len();
            if j == last {
                // split the logit channel (the last out channel) off
                let per_out = k.in_channels * k.k_h * k.k_w;
                let d_s = spec.stats_vector_dim;
                stats_ranges.push(offset..offset + d_s * per_out);
                logit_ranges.push(offset + d_s * per_out..offset + w_len);
                stats_ranges.push(offset + w_len..offset + w_len + d_s);
                logit_ranges.push(offset + w_len + d_s..offset + w_len + b_len);
            } else {
                stats_ranges.push(offset..offset + w_len + b_len);
            }
            offset += w_len + b_len;
        }
        let fcnn_len: usize = self.fcnn.iter().map(|l| l.num_params()).sum();
        let fcnn_ranges = vec![offset..offset + fcnn_len];
        offset += fcnn_len;
        let bank_len = self.bank.num_params();
        let bank_ranges = vec![offset..offset + bank_len];
        vec![
            ("stats_convs".to_string(), stats_ranges),
            ("logit_map".to_string(), logit_ranges),
            ("fcnn".to_string(), fcnn_ranges),
            ("bank".to_string(), bank_ranges),
        ]
    }

    /// Elementwise `self += scale * other`; shapes must match.
    pub fn accumulate(&mut self, other: &ModelParams, scale: f64) {
        for (a, b) in self.stats.iter_mut().zip(&other.stats) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += scale * y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += scale * y;
            }
        }
        for (a, b) in self.fcnn.iter_mut().zip(&other.fcnn) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += scale * y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += scale * y;
            }
        }
        for (a, b) in self.bank.layers.iter_mut().zip(&other.bank.layers) {
            for (ka, kb) in a.iter_mut().zip(b) {
                for (x, y) in ka.weights.iter_mut().zip(&kb.weights) {
                    *x += scale * y;
                }
                for (x, y) in ka.bias.iter_mut().zip(&kb.bias) {
                    *x += scale * y;
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

/// Recorded intermediates of one end-to-end forward pass.
pub struct SrTrace {
    pub(crate) stats: StatsTrace,
    pub(crate) mix: MixTrace,
    pub(crate) process: ProcessTrace,
    pub(crate) weights: ProcessWeights,
}

impl SrTrace {
    pub fn weights(&self) -> &ProcessWeights {
        &self.weights
    }
}

/// One frame through the full system with freshly generated weights; the
/// dual-rate weight reuse lives in the runtime, not here.
pub fn sr_forward(
    frame: &Tensor,
    params: &ModelParams,
    prefs: &PrefVector,
    spec: &TopologySpec,
) -> Result<Tensor> {
    sr_forward_traced(frame, params, prefs, spec).map(|(t, _)| t)
}

pub fn sr_forward_traced(
    frame: &Tensor,
    params: &ModelParams,
    prefs: &PrefVector,
    spec: &TopologySpec,
) -> Result<(Tensor, SrTrace)> {
    let (stats, stats_trace) = stats_forward_traced(frame, &params.stats, spec)?;
    let (weights, mix_trace) =
        mix_weights_traced(&stats, prefs, &params.fcnn, &params.bank, spec, 0)?;
    let (out, process_trace) = process_forward_traced(frame, &weights, spec)?;
    Ok((
        out,
        SrTrace {
            stats: stats_trace,
            mix: mix_trace,
            process: process_trace,
            weights,
        },
    ))
}

/// Reverse-mode gradients of a scalar loss w.r.t. every parameter, given
/// the upstream gradient of the output frame. Returns a gradient container
/// shaped like [`ModelParams`].
pub fn sr_backward(
    trace: &SrTrace,
    params: &ModelParams,
    spec: &TopologySpec,
    grad_output: &Tensor,
) -> Result<ModelParams> {
    let grad_mixed = process_backward(&trace.process, &trace.weights, spec, grad_output)?;
    let (bank_grads, fcnn_grads, grad_stats) =
        mix_backward(&trace.mix, &params.fcnn, &params.bank, spec, &grad_mixed)?;
    let stats_grads = stats_backward(&trace.stats, &params.stats, spec, &grad_stats)?;
    Ok(ModelParams {
        stats: stats_grads,
        fcnn: fcnn_grads,
        bank: KernelBank { layers: bank_grads },
    })
}
