//! Procedural high-resolution test scenes.
//!
//! Sums of oriented cosine gratings plus soft blobs give detail at several
//! scales, which is what a super-resolution data factory needs from its
//! sources. Deterministic for a given RNG stream.

use rand::Rng;

use crate::tensor::Tensor;

/// A synthetic grayscale scene in [0,1].
pub fn synthetic_scene(height: usize, width: usize, rng: &mut impl Rng) -> Tensor {
    let gratings: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|k| {
            // frequency rises with k so coarse and fine structure both appear
            let freq = 0.02 + 0.45 * (k as f64 / 6.0).powi(2) * rng.random::<f64>();
            let angle = rng.random::<f64>() * std::f64::consts::PI;
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            let amp = 0.5f64.powi(k) + 0.05;
            (freq, angle, phase, amp)
        })
        .collect();
    let blobs: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random::<f64>() * height as f64,
                rng.random::<f64>() * width as f64,
                (0.05 + 0.15 * rng.random::<f64>()) * height.min(width) as f64,
                rng.random::<f64>() - 0.5,
            )
        })
        .collect();

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let raw = Tensor::from_fn(height, width, 1, |r, c, _| {
        let (y, x) = (r as f64, c as f64);
        let mut v = 0.0;
        for &(freq, angle, phase, amp) in &gratings {
            let u = x * angle.cos() + y * angle.sin();
            v += amp * (std::f64::consts::TAU * freq * u + phase).cos();
        }
        for &(by, bx, radius, amp) in &blobs {
            let d2 = (y - by).powi(2) + (x - bx).powi(2);
            v += amp * (-d2 / (2.0 * radius * radius)).exp();
        }
        lo = lo.min(v);
        hi = hi.max(v);
        v
    });
    let span = (hi - lo).max(1e-12);
    raw.map(|v| 0.02 + 0.96 * (v - lo) / span)
}
