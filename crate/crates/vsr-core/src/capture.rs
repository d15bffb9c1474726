//! Capture simulation: synthesize training pairs by imitating two camera
//! captures of the same scene at scale factors S and S·R.
//!
//! One capture = blur by the PSF stretched to the simulation scale (valid
//! convolution, so no synthetic boundary statistics), crop, decimate, then
//! the optional tone curve and sensor noise, and clip to [0,1].

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{bicubic_resize, conv2d, decimate, Padding, Scale};
use crate::psf::{stretch_psf, Psf};
use crate::tensor::{KernelStack, Tensor};

/// Parameters of a single capture simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureConfig {
    /// Simulation factor S; the output is S times smaller than the source.
    pub scale: usize,
    /// Additive Gaussian sensor noise (post-decimation), 0 disables.
    #[serde(default)]
    pub noise_sigma: f64,
    /// Optional monotone tone curve, applied as x^gamma before noise.
    #[serde(default)]
    pub tone_gamma: Option<f64>,
}

impl CaptureConfig {
    pub fn clean(scale: usize) -> Self {
        CaptureConfig {
            scale,
            noise_sigma: 0.0,
            tone_gamma: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.scale == 0 {
            return Err(Error::contract("capture scale must be >= 1"));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::contract("noise_sigma must be >= 0"));
        }
        if let Some(g) = self.tone_gamma {
            if g <= 0.0 {
                return Err(Error::contract("tone_gamma must be positive"));
            }
        }
        Ok(())
    }
}

/// Where a pair came from: the two-capture simulation or the plain
/// downscaling shortcut kept for A/B comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Capture,
    Downscale,
}

/// One low/high-resolution training pair with its provenance record.
#[derive(Clone, Debug)]
pub struct TrainingPair {
    pub input: Tensor,
    pub label: Tensor,
    pub ratio: usize,
    pub psf: Option<Psf>,
    pub seed: u64,
    pub provenance: Provenance,
}

impl TrainingPair {
    pub fn validate(&self) -> Result<()> {
        if self.label.height() != self.ratio * self.input.height()
            || self.label.width() != self.ratio * self.input.width()
        {
            return Err(Error::contract(format!(
                "pair: label {}x{} is not {}x input {}x{}",
                self.label.height(),
                self.label.width(),
                self.ratio,
                self.input.height(),
                self.input.width()
            )));
        }
        for t in [&self.input, &self.label] {
            if t.data().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::contract("pair samples must lie in [0,1]"));
            }
        }
        Ok(())
    }
}

/// Simulate one capture of `hr`: stretched-PSF blur (valid), crop to the
/// largest region divisible by S, decimate with phase (0,0), tone curve,
/// noise, clip.
pub fn simulate_capture(
    hr: &Tensor,
    psf: &Psf,
    cfg: &CaptureConfig,
    rng: &mut impl Rng,
) -> Result<Tensor> {
    cfg.validate()?;
    let kernel = stretch_psf(psf, cfg.scale)?;
    let blurred = blur_valid(hr, &kernel)?;
    let s = cfg.scale;
    let crop_h = (blurred.height() / s) * s;
    let crop_w = (blurred.width() / s) * s;
    if crop_h == 0 || crop_w == 0 {
        return Err(Error::contract(format!(
            "image too small: need at least {}x{} source pixels for scale {s} and a {}x{} kernel",
            kernel.k_h + s - 1,
            kernel.k_w + s - 1,
            kernel.k_h,
            kernel.k_w
        )));
    }
    let cropped = blurred.crop(0, 0, crop_h, crop_w)?;
    let small = decimate(&cropped, s, (0, 0))?;
    Ok(finish_capture(small, cfg, rng))
}

/// Depthwise valid convolution of a (possibly multi-channel) image with a
/// single-channel kernel. Errors when the kernel exceeds the image.
fn blur_valid(hr: &Tensor, kernel: &KernelStack) -> Result<Tensor> {
    if hr.height() < kernel.k_h || hr.width() < kernel.k_w {
        return Err(Error::contract(format!(
            "image {}x{} is smaller than the {}x{} blur kernel",
            hr.height(),
            hr.width(),
            kernel.k_h,
            kernel.k_w
        )));
    }
    if hr.channels() == 1 {
        return conv2d(hr, kernel, Padding::Valid);
    }
    let planes = (0..hr.channels())
        .map(|c| conv2d(&hr.channel(c)?, kernel, Padding::Valid))
        .collect::<Result<Vec<_>>>()?;
    Tensor::concat_channels(&planes.iter().collect::<Vec<_>>())
}

fn finish_capture(mut t: Tensor, cfg: &CaptureConfig, rng: &mut impl Rng) -> Tensor {
    if let Some(gamma) = cfg.tone_gamma {
        t = t.map(|v| v.max(0.0).powf(gamma));
    }
    if cfg.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_sigma).expect("validated sigma");
        let data = t
            .data()
            .iter()
            .map(|&v| v + normal.sample(rng))
            .collect::<Vec<_>>();
        t = Tensor::from_op(t.height(), t.width(), t.channels(), data);
    }
    t.map(|v| v.clamp(0.0, 1.0))
}

/// Pair-generation parameters: simulation factor S for the label capture
/// (the input capture uses S·R) plus the shared realism extras.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub s: usize,
    pub r: usize,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub tone_gamma: Option<f64>,
    /// Apply noise/tone to the label capture as well (default) or to the
    /// input capture only.
    #[serde(default = "default_true")]
    pub degrade_label: bool,
}

fn default_true() -> bool {
    true
}

impl PairConfig {
    pub fn clean(s: usize, r: usize) -> Self {
        PairConfig {
            s,
            r,
            noise_sigma: 0.0,
            tone_gamma: None,
            degrade_label: true,
        }
    }
}

/// Generate one training pair from two capture simulations of `hr` with
/// factors S and S·R, on co-sited sampling grids: input(i,j) sees exactly
/// the scene site of label(R·i, R·j).
///
/// Both captures share the decimation phase (0,0); the label capture is
/// cropped by the kernel-radius difference so both grids originate at the
/// same source pixel. Noise, when enabled, draws the label's samples first,
/// then the input's.
pub fn make_pair(
    hr: &Tensor,
    psf: &Psf,
    cfg: &PairConfig,
    rng: &mut impl Rng,
) -> Result<TrainingPair> {
    if cfg.s == 0 || cfg.r == 0 {
        return Err(Error::contract("pair factors must be >= 1"));
    }
    let (s, r) = (cfg.s, cfg.r);
    let sr = s * r;
    let k_small = stretch_psf(psf, s)?;
    let k_big = stretch_psf(psf, sr)?;
    let (rs_h, rs_w) = (k_small.radius_h(), k_small.radius_w());
    let (rb_h, rb_w) = (k_big.radius_h(), k_big.radius_w());
    if rb_h < rs_h || rb_w < rs_w {
        return Err(Error::contract(
            "stretched kernel support must grow with the simulation factor",
        ));
    }

    // n_in sites per axis, spaced S·R apart starting at the big-kernel
    // radius; the label grid interleaves R sites per input site.
    let fit = |dim: usize, rb: usize| -> Result<usize> {
        if dim < 2 * rb + sr {
            return Err(Error::contract(format!(
                "source dimension {dim} too small: need at least {} for S={s}, R={r} and this PSF",
                2 * rb + sr
            )));
        }
        Ok((dim - 2 * rb) / sr)
    };
    let n_h = fit(hr.height(), rb_h)?;
    let n_w = fit(hr.width(), rb_w)?;

    let big = blur_valid(hr, &k_big)?;
    let input_raw = decimate(&big.crop(0, 0, sr * n_h, sr * n_w)?, sr, (0, 0))?;

    let small = blur_valid(hr, &k_small)?;
    let label_raw = decimate(
        &small.crop(rb_h - rs_h, rb_w - rs_w, s * r * n_h, s * r * n_w)?,
        s,
        (0, 0),
    )?;

    // Label stream first, then input, so the pair is reproducible from one
    // seeded RNG.
    let label_cfg = CaptureConfig {
        scale: s,
        noise_sigma: if cfg.degrade_label { cfg.noise_sigma } else { 0.0 },
        tone_gamma: if cfg.degrade_label { cfg.tone_gamma } else { None },
    };
    let input_cfg = CaptureConfig {
        scale: sr,
        noise_sigma: cfg.noise_sigma,
        tone_gamma: cfg.tone_gamma,
    };
    let label = finish_capture(label_raw, &label_cfg, rng);
    let input = finish_capture(input_raw, &input_cfg, rng);

    let pair = TrainingPair {
        input,
        label,
        ratio: r,
        psf: Some(psf.clone()),
        seed: 0,
        provenance: Provenance::Capture,
    };
    pair.validate()?;
    Ok(pair)
}

/// The common-practice baseline: label = the source image, input = its
/// area-correct bicubic downscale by 1/R.
pub fn make_pair_downscale_baseline(hr: &Tensor, r: usize) -> Result<TrainingPair> {
    if r == 0 {
        return Err(Error::contract("ratio must be >= 1"));
    }
    if hr.height() % r != 0 || hr.width() % r != 0 {
        return Err(Error::contract(format!(
            "source dims {}x{} not divisible by R={r}",
            hr.height(),
            hr.width()
        )));
    }
    let input = bicubic_resize(hr, Scale::down(r as u32))?.map(|v| v.clamp(0.0, 1.0));
    let label = hr.map(|v| v.clamp(0.0, 1.0));
    let pair = TrainingPair {
        input,
        label,
        ratio: r,
        psf: None,
        seed: 0,
        provenance: Provenance::Downscale,
    };
    pair.validate()?;
    Ok(pair)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    fn checkerboard(n: usize) -> Tensor {
        Tensor::from_fn(n, n, 1, |r, c, _| ((r + c) % 2) as f64)
    }

    #[test]
    fn delta_psf_is_pure_decimation() {
        let hr = Tensor::from_fn(8, 8, 1, |r, c, _| ((r * 8 + c) % 13) as f64 / 13.0);
        let out =
            simulate_capture(&hr, &Psf::Delta, &CaptureConfig::clean(2), &mut rng()).unwrap();
        assert_eq!(out.shape(), (4, 4, 1));
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(out.at(i, j, 0), hr.at(2 * i, 2 * j, 0));
            }
        }
    }

    #[test]
    fn unit_mass_blur_preserves_constants() {
        let hr = Tensor::filled(40, 40, 1, 0.6);
        for psf in [
            Psf::parametric(1.0, 0.8, 0.4).unwrap(),
            Psf::Delta,
        ] {
            let out = simulate_capture(&hr, &psf, &CaptureConfig::clean(2), &mut rng()).unwrap();
            for &v in out.data() {
                assert!((v - 0.6).abs() < 1e-9);
            }
        }
    }

    /// Dependency-free reference pipeline: direct nested-loop Gaussian blur
    /// then subsampling, written without the crate's conv/decimate ops.
    fn reference_capture(hr: &Tensor, sigma: f64, s: usize) -> Vec<f64> {
        let sp = s as f64 * sigma;
        let radius = (3.0 * sp).ceil() as usize;
        let side = 2 * radius + 1;
        let mut taps = vec![0.0; side * side];
        let mut sum = 0.0;
        for dy in 0..side {
            for dx in 0..side {
                let (fy, fx) = (
                    dy as f64 - radius as f64,
                    dx as f64 - radius as f64,
                );
                let w = (-0.5 * (fx * fx + fy * fy) / (sp * sp)).exp();
                taps[dy * side + dx] = w;
                sum += w;
            }
        }
        for t in &mut taps {
            *t /= sum;
        }
        let bh = hr.height() - side + 1;
        let bw = hr.width() - side + 1;
        let mut blurred = vec![0.0; bh * bw];
        for r in 0..bh {
            for c in 0..bw {
                let mut acc = 0.0;
                for dy in 0..side {
                    for dx in 0..side {
                        acc += hr.at(r + dy, c + dx, 0) * taps[dy * side + dx];
                    }
                }
                blurred[r * bw + c] = acc;
            }
        }
        let (oh, ow) = (bh / s, bw / s);
        let mut out = Vec::with_capacity(oh * ow);
        for i in 0..oh {
            for j in 0..ow {
                out.push(blurred[(s * i) * bw + s * j].clamp(0.0, 1.0));
            }
        }
        out
    }

    #[test]
    fn capture_matches_reference_pipeline() {
        let hr = checkerboard(64);
        let psf = Psf::parametric(1.2, 1.2, 0.0).unwrap();
        let got = simulate_capture(&hr, &psf, &CaptureConfig::clean(2), &mut rng()).unwrap();
        let want = reference_capture(&hr, 1.2, 2);
        assert_eq!(got.len(), want.len());
        for (g, w) in got.data().iter().zip(&want) {
            assert!((g - w).abs() < 1e-10, "{g} vs {w}");
        }
    }

    #[test]
    fn pair_sizes_follow_the_arithmetic() {
        let hr = Tensor::filled(256, 256, 1, 0.5);
        let psf = Psf::Delta;
        let pair = make_pair(&hr, &psf, &PairConfig::clean(2, 4), &mut rng()).unwrap();
        assert_eq!(pair.label.shape(), (128, 128, 1));
        assert_eq!(pair.input.shape(), (32, 32, 1));
    }

    #[test]
    fn delta_pair_collapses_to_cosited_decimations() {
        let hr = Tensor::from_fn(64, 64, 1, |r, c, _| ((r * 64 + c) % 29) as f64 / 29.0);
        let pair = make_pair(&hr, &Psf::Delta, &PairConfig::clean(2, 4), &mut rng()).unwrap();
        for i in 0..pair.input.height() {
            for j in 0..pair.input.width() {
                assert_eq!(pair.input.at(i, j, 0), pair.label.at(4 * i, 4 * j, 0));
            }
        }
    }

    #[test]
    fn pair_input_equals_standalone_capture() {
        // The pair generator must add no hidden processing on the input side.
        let hr = Tensor::from_fn(96, 96, 1, |r, c, _| {
            (0.5 + 0.5 * ((r as f64) * 0.17).sin() * ((c as f64) * 0.23).cos()).clamp(0.0, 1.0)
        });
        let psf = Psf::parametric(0.8, 0.6, 0.9).unwrap();
        let pair = make_pair(&hr, &psf, &PairConfig::clean(2, 4), &mut rng()).unwrap();
        let capture =
            simulate_capture(&hr, &psf, &CaptureConfig::clean(8), &mut rng()).unwrap();
        assert_eq!(pair.input, capture);
    }

    #[test]
    fn pair_generation_is_deterministic() {
        let hr = Tensor::from_fn(80, 80, 1, |r, c, _| ((r ^ c) % 17) as f64 / 17.0);
        let psf = Psf::parametric(0.9, 0.7, 0.2).unwrap();
        let cfg = PairConfig {
            noise_sigma: 0.01,
            ..PairConfig::clean(2, 2)
        };
        let a = make_pair(&hr, &psf, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = make_pair(&hr, &psf, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.input, b.input);
        assert_eq!(a.label, b.label);
    }

    #[test]
    fn capture_outputs_stay_in_unit_range() {
        let hr = checkerboard(48);
        let cfg = CaptureConfig {
            scale: 2,
            noise_sigma: 0.3,
            tone_gamma: Some(0.8),
        };
        let psf = Psf::parametric(0.6, 0.6, 0.0).unwrap();
        let out = simulate_capture(&hr, &psf, &cfg, &mut rng()).unwrap();
        assert!(out.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn too_small_image_reports_requirement() {
        let hr = Tensor::filled(8, 8, 1, 0.5);
        let psf = Psf::parametric(2.0, 2.0, 0.0).unwrap();
        let err = simulate_capture(&hr, &psf, &CaptureConfig::clean(4), &mut rng()).unwrap_err();
        assert!(err.to_string().contains("smaller than"), "{err}");
        let err = make_pair(&hr, &psf, &PairConfig::clean(2, 4), &mut rng()).unwrap_err();
        assert!(err.to_string().contains("too small"), "{err}");
    }

    #[test]
    fn baseline_pair_dimensions_and_constants() {
        let hr = Tensor::filled(128, 128, 1, 0.25);
        let pair = make_pair_downscale_baseline(&hr, 4).unwrap();
        assert_eq!(pair.input.shape(), (32, 32, 1));
        assert_eq!(pair.label.shape(), (128, 128, 1));
        assert_eq!(pair.provenance, Provenance::Downscale);
        for &v in pair.input.data() {
            assert!((v - 0.25).abs() < 1e-12);
        }
        assert!(make_pair_downscale_baseline(&Tensor::zeros(30, 30, 1), 4).is_err());
    }
}
