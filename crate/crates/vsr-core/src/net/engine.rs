//! Weight engine: a fully connected network maps the statistics and
//! preference vectors to mixing coefficients, and the trainable kernel bank
//! is linearly combined into the process network's concrete weights:
//! `ker_j = Σ_i α_ij · ker_ij`, biases mixed by the same mechanism.

use super::{PrefVector, StatsVector};
use crate::error::{Error, Result};
use crate::tensor::KernelStack;
use crate::topology::TopologySpec;

/// Fully connected layer; weights row-major (out, in).
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseLayer {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        let mut out = self.bias.clone();
        for (o, out_v) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            *out_v += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        out
    }
}

/// Trainable kernel collection: `layers[j][i]` is candidate i for process
/// layer j, carrying both its kernel taps and its bias candidates.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelBank {
    pub layers: Vec<Vec<KernelStack>>,
}

impl KernelBank {
    pub fn validate(&self, spec: &TopologySpec) -> Result<()> {
        if self.layers.len() != spec.process_layers.len() {
            return Err(Error::contract("bank: layer count mismatch"));
        }
        for (j, candidates) in self.layers.iter().enumerate() {
            if candidates.len() != spec.kernels_per_layer[j] {
                return Err(Error::contract(format!(
                    "bank layer {j}: expected {} candidates, has {}",
                    spec.kernels_per_layer[j],
                    candidates.len()
                )));
            }
            let layer = &spec.process_layers[j];
            let in_c = spec.process_in_channels(j);
            for (i, k) in candidates.iter().enumerate() {
                if k.out_channels != layer.out_channels
                    || k.in_channels != in_c
                    || k.k_h != layer.taps
                    || k.k_w != layer.taps
                {
                    return Err(Error::contract(format!(
                        "bank kernel ({j},{i}) shape does not match process layer {j}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.iter())
            .map(|k| k.num_params())
            .sum()
    }
}

/// Per-layer mixing coefficients α_ij (and β_ij when biases mix
/// independently).
#[derive(Clone, Debug, PartialEq)]
pub struct MixCoefficients {
    pub per_layer: Vec<Vec<f64>>,
}

impl MixCoefficients {
    /// Hand-built coefficients for experiments and tests.
    pub fn forced(per_layer: Vec<Vec<f64>>) -> Self {
        MixCoefficients { per_layer }
    }
}

/// One materialized, immutable set of process-network weights.
///
/// Generation is a monotone counter assigned by the caller; the checksum
/// covers every tap, bias and the per-layer generation stamps so a torn
/// snapshot can be detected.
#[derive(Clone, Debug)]
pub struct ProcessWeights {
    layers: Vec<KernelStack>,
    layer_generations: Vec<u64>,
    generation: u64,
    checksum: u64,
}

impl ProcessWeights {
    pub fn new(layers: Vec<KernelStack>, generation: u64) -> Self {
        let layer_generations = vec![generation; layers.len()];
        let checksum = Self::compute_checksum(&layers, &layer_generations, generation);
        ProcessWeights {
            layers,
            layer_generations,
            generation,
            checksum,
        }
    }

    pub fn layers(&self) -> &[KernelStack] {
        &self.layers
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// All layers stamped with the snapshot generation and the checksum
    /// intact — the no-tearing invariant.
    pub fn verify(&self) -> bool {
        self.layer_generations.iter().all(|&g| g == self.generation)
            && Self::compute_checksum(&self.layers, &self.layer_generations, self.generation)
                == self.checksum
    }

    fn compute_checksum(layers: &[KernelStack], stamps: &[u64], generation: u64) -> u64 {
        let mut h = Fnv64::new();
        h.write_u64(generation);
        for (k, &stamp) in layers.iter().zip(stamps) {
            h.write_u64(stamp);
            for &w in k.weights.iter().chain(k.bias.iter()) {
                h.write_u64(w.to_bits());
            }
        }
        h.finish()
    }
}

/// FNV-1a, 64-bit; stable across platforms so checksums can be persisted.
struct Fnv64(u64);

impl Fnv64 {
    fn new() -> Self {
        Fnv64(0xcbf29ce484222325)
    }

    fn write_u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

pub struct FcnnTrace {
    /// Input of each layer.
    pub(crate) inputs: Vec<Vec<f64>>,
    /// Pre-activation output of each layer.
    pub(crate) pre_acts: Vec<Vec<f64>>,
}

/// Dense stack: relu on hidden layers, identity on the output layer.
pub fn fcnn_forward(input: &[f64], layers: &[DenseLayer]) -> Result<(Vec<f64>, FcnnTrace)> {
    if layers.is_empty() {
        return Err(Error::contract("fcnn: no layers"));
    }
    let mut x = input.to_vec();
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pre_acts = Vec::with_capacity(layers.len());
    let last = layers.len() - 1;
    for (l, layer) in layers.iter().enumerate() {
        if x.len() != layer.in_dim {
            return Err(Error::contract(format!(
                "fcnn layer {l}: input width {} != {}",
                x.len(),
                layer.in_dim
            )));
        }
        let pre = layer.apply(&x);
        inputs.push(x);
        let post = if l == last {
            pre.clone()
        } else {
            pre.iter().map(|&v| v.max(0.0)).collect()
        };
        pre_acts.push(pre);
        x = post;
    }
    Ok((x, FcnnTrace { inputs, pre_acts }))
}

/// Backprop through the dense stack. Returns per-layer parameter gradients
/// and the gradient w.r.t. the stack input.
pub fn fcnn_backward(
    trace: &FcnnTrace,
    layers: &[DenseLayer],
    grad_out: &[f64],
) -> Result<(Vec<DenseLayer>, Vec<f64>)> {
    let last = layers.len() - 1;
    let mut grad_y = grad_out.to_vec();
    let mut grads = vec![DenseLayer::zeros(0, 0); layers.len()];
    for l in (0..layers.len()).rev() {
        let layer = &layers[l];
        let pre = &trace.pre_acts[l];
        let x = &trace.inputs[l];
        // relu' on hidden layers, identity on the output layer
        let grad_pre: Vec<f64> = if l == last {
            grad_y
        } else {
            grad_y
                .iter()
                .zip(pre)
                .map(|(&g, &p)| if p > 0.0 { g } else { 0.0 })
                .collect()
        };
        let mut g = DenseLayer::zeros(layer.in_dim, layer.out_dim);
        for o in 0..layer.out_dim {
            g.bias[o] = grad_pre[o];
            let row = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            for (i, r) in row.iter_mut().enumerate() {
                *r = grad_pre[o] * x[i];
            }
        }
        let mut grad_x = vec![0.0f64; layer.in_dim];
        for o in 0..layer.out_dim {
            let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            for (i, gx) in grad_x.iter_mut().enumerate() {
                *gx += grad_pre[o] * row[i];
            }
        }
        grads[l] = g;
        grad_y = grad_x;
    }
    Ok((grads, grad_y))
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Split the raw FCNN output into per-layer kernel coefficients (and bias
/// coefficients when they mix independently), applying the optional simplex
/// normalization.
fn coefficients_from_raw(
    raw: &[f64],
    spec: &TopologySpec,
) -> Result<(MixCoefficients, Option<MixCoefficients>)> {
    if raw.len() != spec.fcnn_output_dim() {
        return Err(Error::contract(format!(
            "weight engine: raw coefficient width {} != {}",
            raw.len(),
            spec.fcnn_output_dim()
        )));
    }
    let mut cursor = 0usize;
    let mut split = |counts: &[usize]| -> Vec<Vec<f64>> {
        counts
            .iter()
            .map(|&m| {
                let mut v = raw[cursor..cursor + m].to_vec();
                cursor += m;
                if spec.simplex_mixing {
                    softmax_in_place(&mut v);
                }
                v
            })
            .collect()
    };
    let alpha = MixCoefficients {
        per_layer: split(&spec.kernels_per_layer),
    };
    let beta = if spec.independent_bias_mixing {
        Some(MixCoefficients {
            per_layer: split(&spec.kernels_per_layer),
        })
    } else {
        None
    };
    Ok((alpha, beta))
}

/// Linearly combine the bank: `ker_j = Σ_i α_ij · ker_ij`, biases with
/// `beta` when given, otherwise with the same α.
pub fn mix_with_coefficients(
    bank: &KernelBank,
    alpha: &MixCoefficients,
    beta: Option<&MixCoefficients>,
    generation: u64,
) -> Result<ProcessWeights> {
    if alpha.per_layer.len() != bank.layers.len() {
        return Err(Error::contract("mixing: coefficient layer count mismatch"));
    }
    let mut layers = Vec::with_capacity(bank.layers.len());
    for (j, candidates) in bank.layers.iter().enumerate() {
        let a = &alpha.per_layer[j];
        let b = beta.map(|b| &b.per_layer[j]).unwrap_or(a);
        if a.len() != candidates.len() || b.len() != candidates.len() {
            return Err(Error::contract(format!(
                "mixing: layer {j} expects {} coefficients",
                candidates.len()
            )));
        }
        let proto = &candidates[0];
        let mut weights = vec![0.0f64; proto.weights.len()];
        let mut bias = vec![0.0f64; proto.bias.len()];
        for (i, k) in candidates.iter().enumerate() {
            let (ai, bi) = (a[i], b[i]);
            for (acc, w) in weights.iter_mut().zip(&k.weights) {
                *acc += ai * w;
            }
            for (acc, w) in bias.iter_mut().zip(&k.bias) {
                *acc += bi * w;
            }
        }
        layers.push(KernelStack::from_op(
            proto.out_channels,
            proto.in_channels,
            proto.k_h,
            proto.k_w,
            weights,
            bias,
        ));
    }
    Ok(ProcessWeights::new(layers, generation))
}

pub struct MixTrace {
    pub(crate) fcnn: FcnnTrace,
    pub(crate) alpha: MixCoefficients,
    pub(crate) beta: Option<MixCoefficients>,
}

/// The full weight engine: FCNN on (statistics ‖ preferences), then bank
/// mixing. The result is immutable and stamped with `generation`.
pub fn mix_weights(
    stats: &StatsVector,
    prefs: &PrefVector,
    fcnn: &[DenseLayer],
    bank: &KernelBank,
    spec: &TopologySpec,
    generation: u64,
) -> Result<ProcessWeights> {
    mix_weights_traced(stats, prefs, fcnn, bank, spec, generation).map(|(w, _)| w)
}

pub fn mix_weights_traced(
    stats: &StatsVector,
    prefs: &PrefVector,
    fcnn: &[DenseLayer],
    bank: &KernelBank,
    spec: &TopologySpec,
    generation: u64,
) -> Result<(ProcessWeights, MixTrace)> {
    if stats.0.len() != spec.stats_vector_dim {
        return Err(Error::contract(format!(
            "weight engine: stats vector length {} != {}",
            stats.0.len(),
            spec.stats_vector_dim
        )));
    }
    if prefs.len() != spec.pref_dim {
        return Err(Error::contract(format!(
            "weight engine: preference length {} != {}",
            prefs.len(),
            spec.pref_dim
        )));
    }
    let mut input = Vec::with_capacity(spec.fcnn_input_dim());
    input.extend_from_slice(&stats.0);
    input.extend_from_slice(prefs.values());
    let (raw, fcnn_trace) = fcnn_forward(&input, fcnn)?;
    let (alpha, beta) = coefficients_from_raw(&raw, spec)?;
    let weights = mix_with_coefficients(bank, &alpha, beta.as_ref(), generation)?;
    Ok((
        weights,
        MixTrace {
            fcnn: fcnn_trace,
            alpha,
            beta,
        },
    ))
}

/// Backprop through mixing and the FCNN.
///
/// `grad_layers[j]` holds gradients w.r.t. the mixed kernel and bias of
/// process layer j. Returns bank gradients, FCNN gradients and the gradient
/// w.r.t. the statistics vector (the preference slice is dropped).
pub fn mix_backward(
    trace: &MixTrace,
    fcnn: &[DenseLayer],
    bank: &KernelBank,
    spec: &TopologySpec,
    grad_layers: &[KernelStack],
) -> Result<(Vec<Vec<KernelStack>>, Vec<DenseLayer>, Vec<f64>)> {
    if grad_layers.len() != bank.layers.len() {
        return Err(Error::contract("mix_backward: layer count mismatch"));
    }
    let mut bank_grads = Vec::with_capacity(bank.layers.len());
    let mut grad_alpha: Vec<Vec<f64>> = Vec::with_capacity(bank.layers.len());
    let mut grad_beta: Vec<Vec<f64>> = Vec::with_capacity(bank.layers.len());
    for (j, candidates) in bank.layers.iter().enumerate() {
        let g = &grad_layers[j];
        let a = &trace.alpha.per_layer[j];
        let b = trace
            .beta
            .as_ref()
            .map(|m| &m.per_layer[j])
            .unwrap_or(a);
        let mut layer_grads = Vec::with_capacity(candidates.len());
        let mut ga = Vec::with_capacity(candidates.len());
        let mut gb = Vec::with_capacity(candidates.len());
        for (i, k) in candidates.iter().enumerate() {
            // ∂L/∂ker_ij = α_ij · G_j ; ∂L/∂α_ij = <G_j, ker_ij>
            let gw: Vec<f64> = g.weights.iter().map(|&v| a[i] * v).collect();
            let gbias: Vec<f64> = g.bias.iter().map(|&v| b[i] * v).collect();
            let dot_w: f64 = g.weights.iter().zip(&k.weights).map(|(x, y)| x * y).sum();
            let dot_b: f64 = g.bias.iter().zip(&k.bias).map(|(x, y)| x * y).sum();
            if trace.beta.is_some() {
                ga.push(dot_w);
                gb.push(dot_b);
            } else {
                ga.push(dot_w + dot_b);
            }
            layer_grads.push(KernelStack::from_op(
                k.out_channels,
                k.in_channels,
                k.k_h,
                k.k_w,
                gw,
                gbias,
            ));
        }
        bank_grads.push(layer_grads);
        grad_alpha.push(ga);
        if trace.beta.is_some() {
            grad_beta.push(gb);
        }
    }

    // Fold the simplex jacobian per layer, then concatenate back into the
    // raw FCNN output order (kernel block, then bias block).
    let fold = |coeffs: &MixCoefficients, grads: Vec<Vec<f64>>| -> Vec<f64> {
        let mut out = Vec::new();
        for (a, g) in coeffs.per_layer.iter().zip(grads) {
            if spec.simplex_mixing {
                let dot: f64 = a.iter().zip(&g).map(|(x, y)| x * y).sum();
                out.extend(a.iter().zip(&g).map(|(&ai, &gi)| ai * (gi - dot)));
            } else {
                out.extend(g);
            }
        }
        out
    };
    let mut grad_raw = fold(&trace.alpha, grad_alpha);
    if let Some(beta) = &trace.beta {
        grad_raw.extend(fold(beta, grad_beta));
    }

    let (fcnn_grads, grad_input) = fcnn_backward(&trace.fcnn, fcnn, &grad_raw)?;
    let grad_stats = grad_input[..spec.stats_vector_dim].to_vec();
    Ok((bank_grads, fcnn_grads, grad_stats))
}
