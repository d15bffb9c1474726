//! Luma/chroma transforms for the single-channel processing path.
//!
//! Full-range BT.601: the forward and inverse matrices are exact algebraic
//! inverses, so a round trip is lossless up to floating-point rounding.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const KR: f64 = 0.299;
const KG: f64 = 0.587;
const KB: f64 = 0.114;

/// RGB → YCbCr with chroma centered at 0.5.
pub fn rgb_to_ycbcr(x: &Tensor) -> Result<Tensor> {
    if x.channels() != 3 {
        return Err(Error::contract("rgb_to_ycbcr: expected 3 channels"));
    }
    let mut data = Vec::with_capacity(x.len());
    for px in x.data().chunks_exact(3) {
        let (r, g, b) = (px[0], px[1], px[2]);
        let y = KR * r + KG * g + KB * b;
        let cb = (b - y) / (2.0 * (1.0 - KB)) + 0.5;
        let cr = (r - y) / (2.0 * (1.0 - KR)) + 0.5;
        data.extend_from_slice(&[y, cb, cr]);
    }
    Ok(Tensor::from_op(x.height(), x.width(), 3, data))
}

/// Inverse of [`rgb_to_ycbcr`].
pub fn ycbcr_to_rgb(x: &Tensor) -> Result<Tensor> {
    if x.channels() != 3 {
        return Err(Error::contract("ycbcr_to_rgb: expected 3 channels"));
    }
    let mut data = Vec::with_capacity(x.len());
    for px in x.data().chunks_exact(3) {
        let (y, cb, cr) = (px[0], px[1], px[2]);
        let r = y + 2.0 * (1.0 - KR) * (cr - 0.5);
        let b = y + 2.0 * (1.0 - KB) * (cb - 0.5);
        let g = (y - KR * r - KB * b) / KG;
        data.extend_from_slice(&[r, g, b]);
    }
    Ok(Tensor::from_op(x.height(), x.width(), 3, data))
}

/// Luma plane of a 1- or 3-channel image (1-channel images pass through).
pub fn luma(x: &Tensor) -> Result<Tensor> {
    match x.channels() {
        1 => Ok(x.clone()),
        3 => rgb_to_ycbcr(x)?.channel(0),
        n => Err(Error::contract(format!(
            "luma: expected 1 or 3 channels, got {n}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ycbcr_roundtrip_is_lossless() {
        let img = Tensor::from_fn(4, 4, 3, |r, c, ch| {
            ((r * 13 + c * 7 + ch * 29) % 97) as f64 / 96.0
        });
        let back = ycbcr_to_rgb(&rgb_to_ycbcr(&img).unwrap()).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gray_rgb_has_flat_chroma() {
        let img = Tensor::filled(2, 2, 3, 0.5);
        let ycc = rgb_to_ycbcr(&img).unwrap();
        for px in ycc.data().chunks_exact(3) {
            assert!((px[0] - 0.5).abs() < 1e-12);
            assert!((px[1] - 0.5).abs() < 1e-12);
            assert!((px[2] - 0.5).abs() < 1e-12);
        }
    }
}
