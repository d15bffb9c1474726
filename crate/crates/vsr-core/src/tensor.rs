//! Dense H×W×C tensor and convolution-kernel containers.

use crate::error::{Error, Result};

/// Dense grid of real samples in row-major (row, column, channel) order.
///
/// Images live in the nominal range [0,1]; feature maps are unbounded.
/// Tensors are immutable once returned by an operation — operations take
/// `&Tensor` and build fresh outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::contract("tensor dimensions must be positive"));
        }
        if data.len() != height * width * channels {
            return Err(Error::contract(format!(
                "tensor data length {} does not match {}x{}x{}",
                data.len(),
                height,
                width,
                channels
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::contract("tensor samples must be finite"));
        }
        Ok(Tensor {
            height,
            width,
            channels,
            data,
        })
    }

    /// Construct without the finiteness scan: operation outputs inherit
    /// finiteness from their inputs in normal ranges, and the training loop
    /// relies on overflow propagating to its divergence check instead of
    /// faulting mid-pass.
    pub(crate) fn from_op(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        Tensor {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Tensor {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Tensor {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for r in 0..height {
            for c in 0..width {
                for ch in 0..channels {
                    data.push(f(r, c, ch));
                }
            }
        }
        Tensor::from_op(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize, ch: usize) -> usize {
        (row * self.width + col) * self.channels + ch
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + ch]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[cfg(test)]
    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::from_op(
            self.height,
            self.width,
            self.channels,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Elementwise sum; shapes must match.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape() != other.shape() {
            return Err(Error::contract(format!(
                "add: shape mismatch {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Tensor::from_op(self.height, self.width, self.channels, data))
    }

    /// Rectangular crop: rows `[r0, r0+h)`, columns `[c0, c0+w)`, all channels.
    pub fn crop(&self, r0: usize, c0: usize, h: usize, w: usize) -> Result<Tensor> {
        if h == 0 || w == 0 || r0 + h > self.height || c0 + w > self.width {
            return Err(Error::contract(format!(
                "crop [{r0}+{h}, {c0}+{w}] exceeds {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(h * w * self.channels);
        for r in 0..h {
            let src = ((r0 + r) * self.width + c0) * self.channels;
            data.extend_from_slice(&self.data[src..src + w * self.channels]);
        }
        Ok(Tensor::from_op(h, w, self.channels, data))
    }

    /// Single channel as a new 1-channel tensor.
    pub fn channel(&self, ch: usize) -> Result<Tensor> {
        self.channel_range(ch, 1)
    }

    /// Channels `[start, start+count)` as a new tensor.
    pub fn channel_range(&self, start: usize, count: usize) -> Result<Tensor> {
        if count == 0 || start + count > self.channels {
            return Err(Error::contract(format!(
                "channel range [{start}, {start}+{count}) exceeds {} channels",
                self.channels
            )));
        }
        let mut data = Vec::with_capacity(self.height * self.width * count);
        for px in 0..self.height * self.width {
            let base = px * self.channels + start;
            data.extend_from_slice(&self.data[base..base + count]);
        }
        Ok(Tensor::from_op(self.height, self.width, count, data))
    }

    /// Stack single- or multi-channel tensors of equal spatial dims.
    pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::contract("concat_channels: empty input"))?;
        let (h, w) = (first.height, first.width);
        let mut channels = 0;
        for p in parts {
            if p.height != h || p.width != w {
                return Err(Error::contract("concat_channels: spatial dims differ"));
            }
            channels += p.channels;
        }
        let mut data = Vec::with_capacity(h * w * channels);
        for px in 0..h * w {
            for p in parts {
                let base = px * p.channels;
                data.extend_from_slice(&p.data[base..base + p.channels]);
            }
        }
        Ok(Tensor::from_op(h, w, channels, data))
    }
}

/// A stack of 2-D convolution kernels with per-output-channel bias.
///
/// Weights are row-major over (out_channel, in_channel, row, col); taps are
/// odd so the support is centered.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelStack {
    pub out_channels: usize,
    pub in_channels: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl KernelStack {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        k_h: usize,
        k_w: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 {
            return Err(Error::contract("kernel channels must be positive"));
        }
        if k_h % 2 == 0 || k_w % 2 == 0 || k_h == 0 || k_w == 0 {
            return Err(Error::contract(format!(
                "kernel taps must be odd, got {k_h}x{k_w}"
            )));
        }
        if weights.len() != out_channels * in_channels * k_h * k_w {
            return Err(Error::contract("kernel weight length mismatch"));
        }
        if bias.len() != out_channels {
            return Err(Error::contract("kernel bias length mismatch"));
        }
        if !weights.iter().chain(bias.iter()).all(|v| v.is_finite()) {
            return Err(Error::contract("kernel values must be finite"));
        }
        Ok(KernelStack {
            out_channels,
            in_channels,
            k_h,
            k_w,
            weights,
            bias,
        })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, k_h: usize, k_w: usize) -> Result<Self> {
        KernelStack::new(
            out_channels,
            in_channels,
            k_h,
            k_w,
            vec![0.0; out_channels * in_channels * k_h * k_w],
            vec![0.0; out_channels],
        )
    }

    /// 1-in/1-out kernel from a flat odd grid, zero bias.
    pub fn single(k_h: usize, k_w: usize, taps: Vec<f64>) -> Result<Self> {
        KernelStack::new(1, 1, k_h, k_w, taps, vec![0.0])
    }

    /// Unchecked packing for internally computed values (gradients, mixed
    /// kernels), which must propagate overflow instead of erroring.
    pub(crate) fn from_op(
        out_channels: usize,
        in_channels: usize,
        k_h: usize,
        k_w: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(weights.len(), out_channels * in_channels * k_h * k_w);
        debug_assert_eq!(bias.len(), out_channels);
        KernelStack {
            out_channels,
            in_channels,
            k_h,
            k_w,
            weights,
            bias,
        }
    }

    #[inline]
    pub fn widx(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> usize {
        ((oc * self.in_channels + ic) * self.k_h + ky) * self.k_w + kx
    }

    #[inline]
    pub fn weight_at(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> f64 {
        self.weights[self.widx(oc, ic, ky, kx)]
    }

    pub fn radius_h(&self) -> usize {
        self.k_h / 2
    }

    pub fn radius_w(&self) -> usize {
        self.k_w / 2
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_round_trips_indices() {
        let t = Tensor::from_fn(3, 4, 2, |r, c, ch| (r * 100 + c * 10 + ch) as f64);
        assert_eq!(t.at(2, 3, 1), 231.0);
        assert_eq!(t.shape(), (3, 4, 2));
    }

    #[test]
    fn tensor_rejects_bad_length() {
        assert!(Tensor::new(2, 2, 1, vec![0.0; 3]).is_err());
    }

    #[test]
    fn tensor_rejects_non_finite() {
        assert!(Tensor::new(1, 1, 1, vec![f64::NAN]).is_err());
        assert!(Tensor::new(1, 1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn kernel_rejects_even_taps() {
        assert!(KernelStack::zeros(1, 1, 2, 3).is_err());
        assert!(KernelStack::zeros(1, 1, 3, 4).is_err());
        assert!(KernelStack::zeros(1, 1, 3, 3).is_ok());
    }

    #[test]
    fn crop_and_channels() {
        let t = Tensor::from_fn(4, 4, 3, |r, c, ch| (r * 16 + c * 4 + ch) as f64);
        let cr = t.crop(1, 2, 2, 2).unwrap();
        assert_eq!(cr.shape(), (2, 2, 3));
        assert_eq!(cr.at(0, 0, 1), t.at(1, 2, 1));
        let ch = t.channel(2).unwrap();
        assert_eq!(ch.at(3, 3, 0), t.at(3, 3, 2));
        let back = Tensor::concat_channels(&[
            &t.channel(0).unwrap(),
            &t.channel_range(1, 2).unwrap(),
        ])
        .unwrap();
        assert_eq!(back, t);
    }
}
