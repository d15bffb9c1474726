//! Finite-difference verification of every adjoint, primitive by primitive,
//! and the network-level gradient checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vsr_core::capture::{Provenance, TrainingPair};
use vsr_core::net::{
    global_weighted_average, global_weighted_average_adjoint, mix_with_coefficients,
    sr_backward, sr_forward, sr_forward_traced, KernelBank, MixCoefficients, ModelParams,
    PrefVector,
};
use vsr_core::ops::{
    activation, activation_adjoint, bicubic_resize, bicubic_resize_adjoint, conv2d,
    conv2d_adjoint, decimate, decimate_adjoint, pixel_shuffle, pixel_shuffle_adjoint, Activation,
    Padding, Scale,
};
use vsr_core::tensor::{KernelStack, Tensor};
use vsr_core::topology::TopologySpec;
use vsr_core::train::{grad_check, loss, LossKind};

const FD_EPS: f64 = 1e-5;
const FD_TOL: f64 = 1e-4;

fn rand_tensor(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Tensor {
    Tensor::from_fn(h, w, c, |_, _, _| rng.random::<f64>() - 0.5)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Scalar objective <out, w> with fixed random weights; its gradient w.r.t.
/// the op output is exactly `w`, so each adjoint can be checked in
/// isolation against central differences.
struct Objective {
    weights: Vec<f64>,
}

impl Objective {
    fn new(rng: &mut ChaCha8Rng, len: usize) -> Self {
        Objective {
            weights: (0..len).map(|_| rng.random::<f64>() - 0.5).collect(),
        }
    }

    fn value(&self, t: &Tensor) -> f64 {
        t.data().iter().zip(&self.weights).map(|(a, b)| a * b).sum()
    }

    fn grad(&self, shape: (usize, usize, usize)) -> Tensor {
        Tensor::new(shape.0, shape.1, shape.2, self.weights.clone()).unwrap()
    }
}

fn check_input_gradient(
    seed: u64,
    input: &Tensor,
    forward: impl Fn(&Tensor) -> Tensor,
    analytic: impl Fn(&Tensor) -> Tensor,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = forward(input);
    let obj = Objective::new(&mut rng, out.len());
    let grads = analytic(&obj.grad(out.shape()));
    let mut worst = 0.0f64;
    for idx in 0..input.len() {
        let mut up = input.data().to_vec();
        up[idx] += FD_EPS;
        let up = Tensor::new(input.height(), input.width(), input.channels(), up).unwrap();
        let mut dn = input.data().to_vec();
        dn[idx] -= FD_EPS;
        let dn = Tensor::new(input.height(), input.width(), input.channels(), dn).unwrap();
        let fd = (obj.value(&forward(&up)) - obj.value(&forward(&dn))) / (2.0 * FD_EPS);
        worst = worst.max(rel_err(grads.data()[idx], fd));
    }
    worst
}

#[test]
fn conv2d_adjoint_matches_finite_differences() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = rand_tensor(&mut rng, 6, 6, 2);
        let kernel = KernelStack::new(
            3,
            2,
            3,
            3,
            (0..3 * 2 * 9).map(|_| rng.random::<f64>() - 0.5).collect(),
            (0..3).map(|_| rng.random::<f64>() - 0.5).collect(),
        )
        .unwrap();
        for padding in [Padding::Reflect, Padding::Zero, Padding::Valid] {
            // input gradient
            let worst_input = check_input_gradient(
                seed,
                &input,
                |x| conv2d(x, &kernel, padding).unwrap(),
                |g| conv2d_adjoint(&input, &kernel, padding, g).unwrap().input,
            );
            assert!(
                worst_input < FD_TOL,
                "{padding:?} seed {seed}: input grad rel err {worst_input}"
            );
            // weight and bias gradients
            let out = conv2d(&input, &kernel, padding).unwrap();
            let obj = Objective::new(&mut ChaCha8Rng::seed_from_u64(seed ^ 77), out.len());
            let grads = conv2d_adjoint(&input, &kernel, padding, &obj.grad(out.shape())).unwrap();
            let mut worst = 0.0f64;
            for idx in 0..kernel.weights.len() {
                let mut up = kernel.clone();
                up.weights[idx] += FD_EPS;
                let mut dn = kernel.clone();
                dn.weights[idx] -= FD_EPS;
                let fd = (obj.value(&conv2d(&input, &up, padding).unwrap())
                    - obj.value(&conv2d(&input, &dn, padding).unwrap()))
                    / (2.0 * FD_EPS);
                worst = worst.max(rel_err(grads.kernel.weights[idx], fd));
            }
            for idx in 0..kernel.bias.len() {
                let mut up = kernel.clone();
                up.bias[idx] += FD_EPS;
                let mut dn = kernel.clone();
                dn.bias[idx] -= FD_EPS;
                let fd = (obj.value(&conv2d(&input, &up, padding).unwrap())
                    - obj.value(&conv2d(&input, &dn, padding).unwrap()))
                    / (2.0 * FD_EPS);
                worst = worst.max(rel_err(grads.kernel.bias[idx], fd));
            }
            assert!(
                worst < FD_TOL,
                "{padding:?} seed {seed}: param grad rel err {worst}"
            );
        }
    }
}

#[test]
fn activation_adjoint_matches_finite_differences() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let input = rand_tensor(&mut rng, 6, 6, 1);
        for kind in [
            Activation::Relu,
            Activation::LeakyRelu(0.1),
            Activation::Identity,
        ] {
            let worst = check_input_gradient(
                seed,
                &input,
                |x| activation(x, kind),
                |g| activation_adjoint(&input, kind, g).unwrap(),
            );
            assert!(worst < FD_TOL, "{kind:?} seed {seed}: rel err {worst}");
        }
    }
}

#[test]
fn bicubic_adjoint_matches_finite_differences() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let input = rand_tensor(&mut rng, 6, 6, 1);
        for scale in [Scale::up(2), Scale::up(3), Scale::down(2)] {
            let worst = check_input_gradient(
                seed,
                &input,
                |x| bicubic_resize(x, scale).unwrap(),
                |g| bicubic_resize_adjoint(6, 6, scale, g).unwrap(),
            );
            assert!(worst < FD_TOL, "{scale:?} seed {seed}: rel err {worst}");
        }
    }
}

#[test]
fn shuffle_and_decimate_adjoints_match_finite_differences() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let shuffle_in = rand_tensor(&mut rng, 3, 3, 4);
        let worst = check_input_gradient(
            seed,
            &shuffle_in,
            |x| pixel_shuffle(x, 2).unwrap(),
            |g| pixel_shuffle_adjoint(g, 2).unwrap(),
        );
        assert!(worst < FD_TOL, "pixel_shuffle seed {seed}: rel err {worst}");

        let dec_in = rand_tensor(&mut rng, 6, 6, 2);
        let worst = check_input_gradient(
            seed,
            &dec_in,
            |x| decimate(x, 2, (1, 0)).unwrap(),
            |g| decimate_adjoint(6, 6, 2, (1, 0), g).unwrap(),
        );
        assert!(worst < FD_TOL, "decimate seed {seed}: rel err {worst}");
    }
}

#[test]
fn global_average_adjoint_matches_finite_differences() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + seed);
        let features = rand_tensor(&mut rng, 5, 4, 3);
        let logits = rand_tensor(&mut rng, 5, 4, 1);
        let grad_stats: Vec<f64> = (0..3).map(|_| rng.random::<f64>() - 0.5).collect();
        let grads = global_weighted_average_adjoint(&features, &logits, &grad_stats).unwrap();
        let value = |f: &Tensor, l: &Tensor| -> f64 {
            let v = global_weighted_average(f, l).unwrap();
            v.0.iter().zip(&grad_stats).map(|(a, b)| a * b).sum()
        };
        let mut worst = 0.0f64;
        for idx in 0..features.len() {
            let mut up = features.data().to_vec();
            up[idx] += FD_EPS;
            let up = Tensor::new(5, 4, 3, up).unwrap();
            let mut dn = features.data().to_vec();
            dn[idx] -= FD_EPS;
            let dn = Tensor::new(5, 4, 3, dn).unwrap();
            let fd = (value(&up, &logits) - value(&dn, &logits)) / (2.0 * FD_EPS);
            worst = worst.max(rel_err(grads.features.data()[idx], fd));
        }
        for idx in 0..logits.len() {
            let mut up = logits.data().to_vec();
            up[idx] += FD_EPS;
            let up = Tensor::new(5, 4, 1, up).unwrap();
            let mut dn = logits.data().to_vec();
            dn[idx] -= FD_EPS;
            let dn = Tensor::new(5, 4, 1, dn).unwrap();
            let fd = (value(&features, &up) - value(&features, &dn)) / (2.0 * FD_EPS);
            worst = worst.max(rel_err(grads.logits.data()[idx], fd));
        }
        assert!(worst < FD_TOL, "seed {seed}: rel err {worst}");
    }
}

fn random_pair(spec: &TopologySpec, h: usize, w: usize, seed: u64) -> TrainingPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TrainingPair {
        input: Tensor::from_fn(h, w, 1, |_, _, _| rng.random::<f64>()),
        label: Tensor::from_fn(spec.upscale * h, spec.upscale * w, 1, |_, _, _| {
            rng.random::<f64>()
        }),
        ratio: spec.upscale,
        psf: None,
        seed,
        provenance: Provenance::Capture,
    }
}

#[test]
fn linear_submodel_gradients_are_exact() {
    // A configuration where the loss is exactly quadratic along every
    // parameter coordinate outside the logit map: identity activations,
    // one stats layer (so feature params never touch the logits), a
    // single-layer weight engine, one process layer. Central differences
    // are then exact up to rounding and the adjoint chain must agree to
    // 1e-8. The logit map runs through the softmax, which is not
    // polynomial, so it is held to the standard 1e-4.
    let spec = TopologySpec {
        input_channels: 1,
        stats_layers: vec![vsr_core::topology::ConvLayerSpec::new(
            5,
            3,
            Activation::Identity,
        )],
        stats_vector_dim: 4,
        fcnn_hidden: vec![],
        kernels_per_layer: vec![3],
        process_layers: vec![vsr_core::topology::ConvLayerSpec::new(
            4,
            3,
            Activation::Identity,
        )],
        upscale: 2,
        pref_dim: 1,
        simplex_mixing: false,
        independent_bias_mixing: false,
    };
    spec.validate().unwrap();
    let params = ModelParams::random(&spec, 5).unwrap();
    let pair = random_pair(&spec, 6, 6, 31);
    let prefs = PrefVector::neutral(spec.pref_dim);

    let (pred, trace) = sr_forward_traced(&pair.input, &params, &prefs, &spec).unwrap();
    let (_, grad_pred) = loss(&pred, &pair.label, LossKind::L2).unwrap();
    let analytic = sr_backward(&trace, &params, &spec, &grad_pred).unwrap().to_flat();
    let base = params.to_flat();
    let eps = 1e-5;
    let loss_at = |flat: &[f64]| -> f64 {
        let p = ModelParams::from_flat(&spec, flat).unwrap();
        let pred = sr_forward(&pair.input, &p, &prefs, &spec).unwrap();
        loss(&pred, &pair.label, LossKind::L2).unwrap().0
    };
    for (name, ranges) in params.group_ranges(&spec) {
        for idx in ranges.iter().flat_map(|r| r.clone()) {
            let mut up = base.clone();
            up[idx] += eps;
            let mut dn = base.clone();
            dn[idx] -= eps;
            let numeric = (loss_at(&up) - loss_at(&dn)) / (2.0 * eps);
            let a = analytic[idx];
            if name == "logit_map" {
                // the logit path runs through the softmax, which is not
                // polynomial; standard tolerance applies
                assert!(rel_err(a, numeric) < FD_TOL, "{name} idx {idx}");
            } else {
                // quadratic along this coordinate: exact up to rounding
                assert!(
                    (a - numeric).abs() <= 1e-8 * a.abs().max(numeric.abs()) + 1e-10,
                    "{name} idx {idx}: analytic {a:e} vs numeric {numeric:e}"
                );
            }
        }
    }
}

#[test]
fn full_tiny_topology_passes_grad_check_over_seeds() {
    let spec = TopologySpec::tiny(2);
    let prefs = PrefVector::new(vec![0.25]).unwrap();
    for seed in 0..3u64 {
        let params = ModelParams::random(&spec, 100 + seed).unwrap();
        let pair = random_pair(&spec, 6, 6, 200 + seed);
        let report = grad_check(&params, &spec, &pair, &prefs, FD_EPS, 120, seed).unwrap();
        assert!(
            report.max_rel_err() < FD_TOL,
            "seed {seed}: {:#?}",
            report.groups
        );
    }
}

#[test]
fn flagged_mixing_modes_pass_grad_check() {
    // simplex-normalized coefficients and independently mixed biases take
    // different backward paths through the weight engine
    for (simplex, independent) in [(true, false), (false, true), (true, true)] {
        let mut spec = TopologySpec::tiny(2);
        spec.simplex_mixing = simplex;
        spec.independent_bias_mixing = independent;
        spec.validate().unwrap();
        let params = ModelParams::random(&spec, 55).unwrap();
        let pair = random_pair(&spec, 6, 6, 56);
        let prefs = PrefVector::new(vec![0.7]).unwrap();
        let report = grad_check(&params, &spec, &pair, &prefs, FD_EPS, 120, 57).unwrap();
        assert!(
            report.max_rel_err() < FD_TOL,
            "simplex={simplex} independent={independent}: {:#?}",
            report.groups
        );
    }
}

#[test]
fn zero_bank_still_receives_gradient() {
    // zeroing the bank makes the model reproduce bicubic; the residual
    // mismatch keeps the loss positive and the trunk gradient flows into
    // the bank through the mixing coefficients
    let spec = TopologySpec::tiny(2);
    let mut params = ModelParams::random(&spec, 9).unwrap();
    for layer in &mut params.bank.layers {
        for k in layer.iter_mut() {
            k.weights.iter_mut().for_each(|w| *w = 0.0);
            k.bias.iter_mut().for_each(|b| *b = 0.0);
        }
    }
    let pair = random_pair(&spec, 6, 6, 77);
    let prefs = PrefVector::neutral(spec.pref_dim);
    let (pred, trace) = sr_forward_traced(&pair.input, &params, &prefs, &spec).unwrap();
    let (value, grad_pred) = loss(&pred, &pair.label, LossKind::L2).unwrap();
    assert!(value > 0.0);
    let grads = sr_backward(&trace, &params, &spec, &grad_pred).unwrap();
    let bank_grad_norm: f64 = grads
        .bank
        .layers
        .iter()
        .flatten()
        .flat_map(|k| k.weights.iter().chain(k.bias.iter()))
        .map(|g| g * g)
        .sum();
    assert!(
        bank_grad_norm > 0.0,
        "bank gradient vanished with a zero bank"
    );
    // and the model output really is the bicubic path
    let zero_alpha = MixCoefficients::forced(
        spec.kernels_per_layer.iter().map(|&m| vec![0.0; m]).collect(),
    );
    let bank = KernelBank {
        layers: params.bank.layers.clone(),
    };
    let _ = mix_with_coefficients(&bank, &zero_alpha, None, 1).unwrap();
    let direct = sr_forward(&pair.input, &params, &prefs, &spec).unwrap();
    let bicubic = bicubic_resize(&pair.input, Scale::up(2)).unwrap();
    assert_eq!(direct, bicubic);
}
