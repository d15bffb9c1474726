//! End-to-end gradient training on capture-sim datasets, gradient
//! verification against finite differences, and the bicubic-baseline
//! evaluator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::capture::TrainingPair;
use crate::error::{Error, Result};
use crate::net::{sr_backward, sr_forward, sr_forward_traced, ModelParams, PrefVector};
use crate::ops::{bicubic_resize, Scale};
use crate::parallel::map_indexed;
use crate::tensor::Tensor;
use crate::topology::TopologySpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    L2,
    L1,
}

/// Scalar loss and its gradient w.r.t. the prediction.
pub fn loss(pred: &Tensor, label: &Tensor, kind: LossKind) -> Result<(f64, Tensor)> {
    if pred.shape() != label.shape() {
        return Err(Error::contract(format!(
            "loss: prediction {:?} vs label {:?}",
            pred.shape(),
            label.shape()
        )));
    }
    let n = pred.len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    match kind {
        LossKind::L2 => {
            for (&p, &l) in pred.data().iter().zip(label.data()) {
                let d = p - l;
                total += d * d;
                grad.push(2.0 * d / n);
            }
        }
        LossKind::L1 => {
            for (&p, &l) in pred.data().iter().zip(label.data()) {
                let d = p - l;
                total += d.abs();
                // subgradient 0 at the tie
                let sign = if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                grad.push(sign / n);
            }
        }
    }
    Ok((
        total / n,
        Tensor::from_op(pred.height(), pred.width(), pred.channels(), grad),
    ))
}

/// PSNR in dB on [0,1] images, capped at 99 dB for identical inputs.
pub fn psnr(pred: &Tensor, label: &Tensor) -> Result<f64> {
    let (l2, _) = loss(pred, label, LossKind::L2)?;
    if l2 <= 0.0 {
        return Ok(99.0);
    }
    Ok((10.0 * (1.0 / l2).log10()).min(99.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub loss: LossKind,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) {
            return Err(Error::contract("learning_rate must be >= 0"));
        }
        if self.steps == 0 {
            return Err(Error::contract("steps must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::contract("batch_size must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Mean batch loss per step.
    pub trace: Vec<f64>,
}

/// Mini-batch gradient descent over the dataset.
///
/// Preference inputs train as free conditioning variables drawn uniformly
/// from [0,1]. When `batch_size` covers the whole dataset, every step runs
/// the full batch in dataset order with per-pair preferences fixed for the
/// run, so the loss trace is a pure function of the parameters; smaller
/// batches resample members and preferences each step. Either way a single
/// seeded stream drives all draws, so runs reproduce bit-for-bit. Per-pair
/// gradients may be computed in parallel; they are reduced in batch order.
pub fn train(
    pairs: &[TrainingPair],
    params: ModelParams,
    spec: &TopologySpec,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    params.validate(spec)?;
    if pairs.is_empty() {
        return Err(Error::contract("train: empty dataset"));
    }
    for (i, p) in pairs.iter().enumerate() {
        if p.ratio != spec.upscale {
            return Err(Error::contract(format!(
                "train: pair {i} has ratio {}, topology upscales by {}",
                p.ratio, spec.upscale
            )));
        }
        if p.input.channels() != 1 {
            return Err(Error::contract("train: pairs must be single-channel luma"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let full_batch = cfg.batch_size >= pairs.len();
    let draw_prefs = |rng: &mut ChaCha8Rng| {
        PrefVector::new((0..spec.pref_dim).map(|_| rng.random::<f64>()).collect())
            .expect("uniform draws lie in [0,1]")
    };
    let fixed_prefs: Vec<PrefVector> = (0..pairs.len()).map(|_| draw_prefs(&mut rng)).collect();

    let mut flat = params.to_flat();
    let mut adam_m = vec![0.0f64; flat.len()];
    let mut adam_v = vec![0.0f64; flat.len()];
    let mut trace = Vec::with_capacity(cfg.steps);
    let mut current = params;

    for step in 0..cfg.steps {
        let (batch, prefs): (Vec<usize>, Vec<PrefVector>) = if full_batch {
            ((0..pairs.len()).collect(), fixed_prefs.clone())
        } else {
            let batch: Vec<usize> = (0..cfg.batch_size)
                .map(|_| rng.random_range(0..pairs.len()))
                .collect();
            let prefs = (0..cfg.batch_size).map(|_| draw_prefs(&mut rng)).collect();
            (batch, prefs)
        };

        let results: Vec<Result<(f64, Option<ModelParams>)>> = map_indexed(batch.len(), |b| {
            let pair = &pairs[batch[b]];
            let (pred, tr) = sr_forward_traced(&pair.input, &current, &prefs[b], spec)?;
            let (value, grad_pred) = loss(&pred, &pair.label, cfg.loss)?;
            if !value.is_finite() {
                // overflow: skip the backward pass, the loss check below
                // reports divergence
                return Ok((value, None));
            }
            let grads = sr_backward(&tr, &current, spec, &grad_pred)?;
            Ok((value, Some(grads)))
        });

        let mut batch_loss = 0.0;
        let mut grad_acc: Option<ModelParams> = None;
        let scale = 1.0 / batch.len() as f64;
        for res in results {
            let (value, grads) = res?;
            batch_loss += value * scale;
            let Some(grads) = grads else { continue };
            match &mut grad_acc {
                Some(acc) => acc.accumulate(&grads, scale),
                None => {
                    let mut acc = ModelParams::zeros(spec)?;
                    acc.accumulate(&grads, scale);
                    grad_acc = Some(acc);
                }
            }
        }
        if !batch_loss.is_finite() {
            return Err(Error::Diverged { step });
        }
        trace.push(batch_loss);

        let grad_flat = grad_acc.ok_or(Error::Diverged { step })?.to_flat();
        if grad_flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { step });
        }
        match cfg.optimizer {
            Optimizer::Sgd => {
                for (p, g) in flat.iter_mut().zip(&grad_flat) {
                    *p -= cfg.learning_rate * g;
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let t = (step + 1) as f64;
                let bc1 = 1.0 - beta1.powf(t);
                let bc2 = 1.0 - beta2.powf(t);
                for i in 0..flat.len() {
                    let g = grad_flat[i];
                    adam_m[i] = beta1 * adam_m[i] + (1.0 - beta1) * g;
                    adam_v[i] = beta2 * adam_v[i] + (1.0 - beta2) * g * g;
                    let m_hat = adam_m[i] / bc1;
                    let v_hat = adam_v[i] / bc2;
                    flat[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
        // overflow guard: parameters this large can only produce Inf/NaN
        // downstream, so report divergence before the next forward pass
        if flat.iter().any(|v| !v.is_finite() || v.abs() > 1e100) {
            return Err(Error::Diverged { step });
        }
        current = ModelParams::from_flat(spec, &flat)?;
    }

    Ok(TrainOutcome {
        params: current,
        trace,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalRow {
    pub model_psnr: f64,
    pub bicubic_psnr: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub mean_model_psnr: f64,
    pub mean_bicubic_psnr: f64,
}

/// Per-pair PSNR of the model output and of the plain bicubic upscale
/// against the label. Only meaningful on synthetic pairs, where labels
/// exist.
pub fn evaluate(
    params: &ModelParams,
    spec: &TopologySpec,
    pairs: &[TrainingPair],
    prefs: &PrefVector,
) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::contract("evaluate: empty dataset"));
    }
    let rows = map_indexed(pairs.len(), |i| -> Result<EvalRow> {
        let pair = &pairs[i];
        let pred = sr_forward(&pair.input, params, prefs, spec)?;
        let base = bicubic_resize(&pair.input, Scale::up(spec.upscale as u32))?;
        Ok(EvalRow {
            model_psnr: psnr(&pred, &pair.label)?,
            bicubic_psnr: psnr(&base, &pair.label)?,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let n = rows.len() as f64;
    let mean_model_psnr = rows.iter().map(|r| r.model_psnr).sum::<f64>() / n;
    let mean_bicubic_psnr = rows.iter().map(|r| r.bicubic_psnr).sum::<f64>() / n;
    Ok(EvalReport {
        rows,
        mean_model_psnr,
        mean_bicubic_psnr,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckGroup {
    pub name: String,
    pub samples: usize,
    pub max_rel_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub groups: Vec<GradCheckGroup>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.groups
            .iter()
            .map(|g| g.max_rel_err)
            .fold(0.0, f64::max)
    }
}

/// Compare adjoint-chain gradients of the loss against central finite
/// differences on a random subsample of each parameter group.
///
/// Relative error uses `|a − n| / max(|a|, |n|, 1e-6)` so zero-gradient
/// parameters compare cleanly.
pub fn grad_check(
    params: &ModelParams,
    spec: &TopologySpec,
    pair: &TrainingPair,
    prefs: &PrefVector,
    eps: f64,
    samples_per_group: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    params.validate(spec)?;
    let (pred, trace) = sr_forward_traced(&pair.input, params, prefs, spec)?;
    let (_, grad_pred) = loss(&pred, &pair.label, LossKind::L2)?;
    let analytic = sr_backward(&trace, params, spec, &grad_pred)?.to_flat();

    let base_flat = params.to_flat();
    let loss_at = |flat: &[f64]| -> Result<f64> {
        let p = ModelParams::from_flat(spec, flat)?;
        let pred = sr_forward(&pair.input, &p, prefs, spec)?;
        Ok(loss(&pred, &pair.label, LossKind::L2)?.0)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups = Vec::new();
    for (name, ranges) in params.group_ranges(spec) {
        let indices: Vec<usize> = ranges.iter().flat_map(|r| r.clone()).collect();
        let picks: Vec<usize> = if indices.len() <= samples_per_group {
            indices.clone()
        } else {
            (0..samples_per_group)
                .map(|_| indices[rng.random_range(0..indices.len())])
                .collect()
        };
        let errs = map_indexed(picks.len(), |k| -> Result<f64> {
            let idx = picks[k];
            let mut flat = base_flat.clone();
            flat[idx] = base_flat[idx] + eps;
            let up = loss_at(&flat)?;
            flat[idx] = base_flat[idx] - eps;
            let down = loss_at(&flat)?;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[idx];
            Ok((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6))
        });
        let mut max_rel_err = 0.0f64;
        for e in errs {
            max_rel_err = max_rel_err.max(e?);
        }
        groups.push(GradCheckGroup {
            name,
            samples: picks.len(),
            max_rel_err,
        });
    }
    Ok(GradCheckReport { groups })
}
