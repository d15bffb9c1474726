//! Property tests for the operation invariants.

use proptest::prelude::*;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vsr_core::capture::{make_pair, simulate_capture, CaptureConfig, PairConfig};
use vsr_core::net::{mix_with_coefficients, ModelParams, MixCoefficients, PrefVector};
use vsr_core::ops::{
    bicubic_resize, conv2d, pixel_shuffle, pixel_unshuffle, Padding, Scale,
};
use vsr_core::psf::Psf;
use vsr_core::tensor::{KernelStack, Tensor};
use vsr_core::topology::TopologySpec;

fn tensor_strategy(h: usize, w: usize, c: usize) -> impl Strategy<Value = Tensor> {
    proptest::collection::vec(-2.0f64..2.0, h * w * c)
        .prop_map(move |data| Tensor::new(h, w, c, data).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conv_linearity_in_input(
        x in tensor_strategy(5, 6, 1),
        y in tensor_strategy(5, 6, 1),
        taps in proptest::collection::vec(-1.0f64..1.0, 9),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let k = KernelStack::single(3, 3, taps).unwrap();
        let combined = Tensor::from_fn(5, 6, 1, |r, c, ch| a * x.at(r, c, ch) + b * y.at(r, c, ch));
        for pad in [Padding::Reflect, Padding::Zero, Padding::Valid] {
            let lhs = conv2d(&combined, &k, pad).unwrap();
            let cx = conv2d(&x, &k, pad).unwrap();
            let cy = conv2d(&y, &k, pad).unwrap();
            for i in 0..lhs.len() {
                let rhs = a * cx.data()[i] + b * cy.data()[i];
                prop_assert!((lhs.data()[i] - rhs).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shuffle_roundtrip_is_identity(
        n in 2usize..=4,
        h in 1usize..=3,
        w in 1usize..=3,
        seed in 0u64..1000,
    ) {
        let mut state = seed.wrapping_mul(0x2545F4914F6CDD1D).wrapping_add(1);
        let x = Tensor::from_fn(h, w, n * n, |_, _, _| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        });
        let img = pixel_shuffle(&x, n).unwrap();
        prop_assert_eq!(img.shape(), (n * h, n * w, 1));
        prop_assert_eq!(pixel_unshuffle(&img, n).unwrap(), x);
    }

    #[test]
    fn bicubic_reproduces_affine_fields(
        c0 in -1.0f64..1.0,
        gr in -0.1f64..0.1,
        gc in -0.1f64..0.1,
        factor in 2u32..=4,
    ) {
        let img = Tensor::from_fn(8, 8, 1, |r, c, _| c0 + gr * r as f64 + gc * c as f64);
        let up = bicubic_resize(&img, Scale::up(factor)).unwrap();
        let f = factor as f64;
        for r in 0..up.height() {
            for c in 0..up.width() {
                let sr = (r as f64 + 0.5) / f - 0.5;
                let sc = (c as f64 + 0.5) / f - 0.5;
                // interior of the source grid, clear of edge clamping
                if sr >= 1.0 && sc >= 1.0 && sr <= 6.0 && sc <= 6.0 {
                    let want = c0 + gr * sr + gc * sc;
                    prop_assert!((up.at(r, c, 0) - want).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn capture_of_constant_is_constant(
        value in 0.05f64..0.95,
        sigma in 0.4f64..1.2,
        aniso in 1.0f64..2.0,
        theta in 0.0f64..std::f64::consts::PI,
        s in 1usize..=3,
    ) {
        let hr = Tensor::filled(36, 36, 1, value);
        let psf = Psf::parametric(sigma, sigma / aniso, theta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = simulate_capture(&hr, &psf, &CaptureConfig::clean(s), &mut rng);
        prop_assume!(out.is_ok()); // small scales with wide kernels can be rejected
        for &v in out.unwrap().data() {
            prop_assert!((v - value).abs() < 1e-9);
        }
    }

    #[test]
    fn capture_pairs_stay_in_unit_range_and_aligned(
        seed in 0u64..500,
        sigma in 0.4f64..0.9,
        noise in 0.0f64..0.2,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hr = vsr_core::synth::synthetic_scene(80, 80, &mut rng);
        let psf = Psf::parametric(sigma, sigma, 0.0).unwrap();
        let cfg = PairConfig { noise_sigma: noise, ..PairConfig::clean(2, 2) };
        let pair = make_pair(&hr, &psf, &cfg, &mut rng).unwrap();
        prop_assert_eq!(pair.label.height(), 2 * pair.input.height());
        prop_assert_eq!(pair.label.width(), 2 * pair.input.width());
        for t in [&pair.input, &pair.label] {
            for &v in t.data() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn sr_output_shape_is_exactly_r_times_input(
        h in 4usize..=9,
        w in 4usize..=9,
        r in 2usize..=3,
        seed in 0u64..100,
    ) {
        let spec = TopologySpec::tiny(r);
        let params = ModelParams::random(&spec, seed).unwrap();
        let frame = Tensor::from_fn(h, w, 1, |rr, cc, _| ((rr * 7 + cc) % 11) as f64 / 11.0);
        let out = vsr_core::net::sr_forward(&frame, &params, &PrefVector::neutral(1), &spec).unwrap();
        prop_assert_eq!(out.shape(), (r * h, r * w, 1));
        prop_assert!(out.is_finite());
    }

    #[test]
    fn mixing_endpoints_pick_bank_entries(
        seed in 0u64..200,
        pick in 0usize..2,
    ) {
        let mut spec = TopologySpec::tiny(2);
        spec.kernels_per_layer = vec![2, 2];
        let bank = ModelParams::random(&spec, seed).unwrap().bank;
        let mut alpha = vec![vec![0.0; 2]; 2];
        for layer in &mut alpha {
            layer[pick] = 1.0;
        }
        let mixed = mix_with_coefficients(&bank, &MixCoefficients::forced(alpha), None, 1).unwrap();
        for (j, layer) in bank.layers.iter().enumerate() {
            prop_assert_eq!(&mixed.layers()[j].weights, &layer[pick].weights);
            prop_assert_eq!(&mixed.layers()[j].bias, &layer[pick].bias);
        }
    }
}
