//! Bicubic resampling: Catmull-Rom cubic (a = −0.5) with half-pixel-center
//! alignment and clamped edges. Minification scales the filter support so
//! downscales stay area-correct.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::for_each_chunk_mut;
use crate::tensor::Tensor;

/// Positive rational scale factor. Output dims must come out integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scale {
    num: u32,
    den: u32,
}

impl Scale {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::contract("scale factor must be positive"));
        }
        Ok(Scale { num, den })
    }

    /// Integer upscale `n : 1`.
    pub fn up(n: u32) -> Self {
        Scale { num: n, den: 1 }
    }

    /// Integer downscale `1 : n`.
    pub fn down(n: u32) -> Self {
        Scale { num: 1, den: n }
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Scaled dimension, or an error when `dim × num / den` is not integral.
    pub fn apply(self, dim: usize) -> Result<usize> {
        let scaled = dim * self.num as usize;
        if scaled % self.den as usize != 0 {
            return Err(Error::contract(format!(
                "scale {}/{} of dimension {dim} is not integral",
                self.num, self.den
            )));
        }
        Ok(scaled / self.den as usize)
    }
}

/// Catmull-Rom kernel (cubic interpolation with a = −0.5).
#[inline]
fn catmull_rom(t: f64) -> f64 {
    let t = t.abs();
    if t < 1.0 {
        (1.5 * t - 2.5) * t * t + 1.0
    } else if t < 2.0 {
        ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0
    } else {
        0.0
    }
}

/// Tap positions and weights for one output sample along one axis.
#[derive(Clone, Debug)]
struct TapLine {
    start: usize,
    weights: Vec<f64>,
}

/// Precompute the resampling taps for an axis of length `in_len` scaled to
/// `out_len`. Source coordinate of output i is `(i + 0.5)/factor − 0.5`
/// (half-pixel centers); indices clamp at the edges. For minification the
/// kernel is stretched by the inverse factor and renormalized.
fn tap_table(in_len: usize, out_len: usize, scale: Scale) -> Vec<TapLine> {
    let factor = scale.as_f64();
    let support_scale = if factor < 1.0 { 1.0 / factor } else { 1.0 };
    let radius = 2.0 * support_scale;
    (0..out_len)
        .map(|i| {
            let src = (i as f64 + 0.5) / factor - 0.5;
            let lo = (src - radius).ceil() as isize;
            let hi = (src + radius).floor() as isize;
            // Clamp taps onto the grid, merging duplicates at the edges.
            let start = lo.clamp(0, in_len as isize - 1) as usize;
            let end = hi.clamp(0, in_len as isize - 1) as usize;
            let mut weights = vec![0.0f64; end - start + 1];
            let mut total = 0.0;
            for j in lo..=hi {
                let w = catmull_rom((j as f64 - src) / support_scale);
                total += w;
                let idx = j.clamp(0, in_len as isize - 1) as usize - start;
                weights[idx] += w;
            }
            // Normalization keeps constants exact for every factor and at
            // clamped edges.
            if total != 0.0 {
                for w in &mut weights {
                    *w /= total;
                }
            }
            TapLine { start, weights }
        })
        .collect()
}

enum Axis {
    Rows,
    Cols,
}

fn resample_axis(x: &Tensor, taps: &[TapLine], axis: Axis) -> Tensor {
    let (h, w, ch) = x.shape();
    let data = x.data();
    match axis {
        Axis::Cols => {
            let out_w = taps.len();
            let mut out = vec![0.0f64; h * out_w * ch];
            for_each_chunk_mut(&mut out, out_w * ch, |r, row| {
                for (i, line) in taps.iter().enumerate() {
                    for (dj, &wt) in line.weights.iter().enumerate() {
                        let base = (r * w + line.start + dj) * ch;
                        for c in 0..ch {
                            row[i * ch + c] += wt * data[base + c];
                        }
                    }
                }
            });
            Tensor::from_op(h, out_w, ch, out)
        }
        Axis::Rows => {
            let out_h = taps.len();
            let mut out = vec![0.0f64; out_h * w * ch];
            for_each_chunk_mut(&mut out, w * ch, |i, row| {
                let line = &taps[i];
                for (dj, &wt) in line.weights.iter().enumerate() {
                    let base = (line.start + dj) * w * ch;
                    for k in 0..w * ch {
                        row[k] += wt * data[base + k];
                    }
                }
            });
            Tensor::from_op(out_h, w, ch, out)
        }
    }
}

/// Resample both spatial axes by `scale`. Output dims are `scale × input`
/// per axis and must be integral.
pub fn bicubic_resize(x: &Tensor, scale: Scale) -> Result<Tensor> {
    let out_h = scale.apply(x.height())?;
    let out_w = scale.apply(x.width())?;
    if scale.num == scale.den {
        return Ok(x.clone());
    }
    let col_taps = tap_table(x.width(), out_w, scale);
    let horizontal = resample_axis(x, &col_taps, Axis::Cols);
    let row_taps = tap_table(x.height(), out_h, scale);
    Ok(resample_axis(&horizontal, &row_taps, Axis::Rows))
}

/// Gradient of [`bicubic_resize`] w.r.t. its input: the transpose of the
/// (linear) resampling, scattered back through both axis passes.
pub fn bicubic_resize_adjoint(
    in_h: usize,
    in_w: usize,
    scale: Scale,
    grad_out: &Tensor,
) -> Result<Tensor> {
    let out_h = scale.apply(in_h)?;
    let out_w = scale.apply(in_w)?;
    if grad_out.height() != out_h || grad_out.width() != out_w {
        return Err(Error::contract(
            "bicubic_resize_adjoint: upstream gradient dims mismatch",
        ));
    }
    if scale.num == scale.den {
        return Ok(grad_out.clone());
    }
    let ch = grad_out.channels();
    // Forward was cols-then-rows, so the adjoint is rowsᵀ then colsᵀ.
    let row_taps = tap_table(in_h, out_h, scale);
    let mut mid = vec![0.0f64; in_h * out_w * ch];
    for (i, line) in row_taps.iter().enumerate() {
        for (dj, &wt) in line.weights.iter().enumerate() {
            let dst = (line.start + dj) * out_w * ch;
            let src = i * out_w * ch;
            for k in 0..out_w * ch {
                mid[dst + k] += wt * grad_out.data()[src + k];
            }
        }
    }
    let col_taps = tap_table(in_w, out_w, scale);
    let mut out = vec![0.0f64; in_h * in_w * ch];
    for r in 0..in_h {
        for (i, line) in col_taps.iter().enumerate() {
            for (dj, &wt) in line.weights.iter().enumerate() {
                let dst = (r * in_w + line.start + dj) * ch;
                let src = (r * out_w + i) * ch;
                for c in 0..ch {
                    out[dst + c] += wt * mid[src + c];
                }
            }
        }
    }
    Ok(Tensor::from_op(in_h, in_w, ch, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_are_reproduced() {
        let img = Tensor::filled(3, 5, 1, 0.42);
        let up = bicubic_resize(&img, Scale::up(4)).unwrap();
        assert_eq!(up.shape(), (12, 20, 1));
        for &v in up.data() {
            assert!((v - 0.42).abs() < 1e-12);
        }
    }

    #[test]
    fn factor_one_is_identity() {
        let img = Tensor::from_fn(4, 4, 2, |r, c, ch| (r * 8 + c * 2 + ch) as f64);
        let same = bicubic_resize(&img, Scale::new(3, 3).unwrap()).unwrap();
        assert_eq!(same, img);
    }

    #[test]
    fn linear_ramp_upscale_stays_on_the_line() {
        // A 1-D ramp along the row: value = col. After a 2x upscale with
        // half-pixel centers, output col j samples source x = (j+0.5)/2-0.5,
        // so interior samples must equal that closed-form line value.
        let w = 16;
        let img = Tensor::from_fn(1, w, 1, |_, c, _| c as f64);
        let up = bicubic_resize(&img, Scale::up(2)).unwrap();
        assert_eq!(up.shape(), (2, 32, 1));
        for j in 0..32 {
            let x = (j as f64 + 0.5) / 2.0 - 0.5;
            if x >= 1.0 && x <= (w - 2) as f64 {
                // full 4-tap support available
                assert!(
                    (up.at(0, j, 0) - x).abs() < 1e-9,
                    "col {j}: {} vs {x}",
                    up.at(0, j, 0)
                );
            }
        }
    }

    #[test]
    fn non_integral_output_is_rejected() {
        let img = Tensor::zeros(3, 3, 1);
        assert!(bicubic_resize(&img, Scale::new(1, 2).unwrap()).is_err());
    }

    #[test]
    fn integer_downscale_recovers_ramp() {
        // Upscale a constant-plus-ramp field, then downscale by the inverse
        // factor; interior must match the original to 1e-6.
        let img = Tensor::from_fn(12, 12, 1, |r, c, _| 0.2 + 0.01 * r as f64 + 0.03 * c as f64);
        let up = bicubic_resize(&img, Scale::up(4)).unwrap();
        let down = bicubic_resize(&up, Scale::down(4)).unwrap();
        assert_eq!(down.shape(), img.shape());
        // rows/cols whose downscale taps stay clear of the upscale's
        // clamped-edge band
        for r in 3..9 {
            for c in 3..9 {
                assert!(
                    (down.at(r, c, 0) - img.at(r, c, 0)).abs() < 1e-6,
                    "({r},{c}): {} vs {}",
                    down.at(r, c, 0),
                    img.at(r, c, 0)
                );
            }
        }
    }

    #[test]
    fn adjoint_matches_explicit_transpose() {
        // <A x, y> == <x, Aᵀ y> for random x, y.
        let mut seed = 7u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let x = Tensor::from_fn(6, 6, 1, |_, _, _| next());
        let scale = Scale::up(3);
        let ax = bicubic_resize(&x, scale).unwrap();
        let y = Tensor::from_fn(18, 18, 1, |_, _, _| next());
        let aty = bicubic_resize_adjoint(6, 6, scale, &y).unwrap();
        let lhs: f64 = ax.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(aty.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
    }
}
