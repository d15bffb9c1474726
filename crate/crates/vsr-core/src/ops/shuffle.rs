//! Pixel shuffle: rearrange an H×W×n² tensor into an (nH)×(nW)×1 image.
//!
//! Channel c of input cell (r, q) lands at output pixel
//! (n·r + ⌊c/n⌋, n·q + c mod n) — row-major over the n×n sub-block.

use crate::error::{Error, Result};
use crate::parallel::for_each_chunk_mut;
use crate::tensor::Tensor;

pub fn pixel_shuffle(x: &Tensor, n: usize) -> Result<Tensor> {
    if n == 0 || x.channels() != n * n {
        return Err(Error::contract(format!(
            "pixel_shuffle: expected n²={} channels for n={n}, got {}",
            n * n,
            x.channels()
        )));
    }
    let (h, w) = (x.height(), x.width());
    let (out_h, out_w) = (h * n, w * n);
    let data = x.data();
    let mut out = vec![0.0f64; out_h * out_w];
    for_each_chunk_mut(&mut out, out_w, |or, row| {
        let r = or / n;
        let sub_r = or % n;
        for oc in 0..out_w {
            let q = oc / n;
            let sub_c = oc % n;
            row[oc] = data[(r * w + q) * n * n + sub_r * n + sub_c];
        }
    });
    Ok(Tensor::from_op(out_h, out_w, 1, out))
}

/// Exact inverse of [`pixel_shuffle`]: a 1-channel image with dims divisible
/// by `n` becomes an (H/n)×(W/n)×n² tensor.
pub fn pixel_unshuffle(x: &Tensor, n: usize) -> Result<Tensor> {
    if n == 0 || x.channels() != 1 {
        return Err(Error::contract(
            "pixel_unshuffle: input must be single-channel",
        ));
    }
    let (h, w) = (x.height(), x.width());
    if h % n != 0 || w % n != 0 {
        return Err(Error::contract(format!(
            "pixel_unshuffle: dims {h}x{w} not divisible by {n}"
        )));
    }
    let (out_h, out_w) = (h / n, w / n);
    let data = x.data();
    let mut out = vec![0.0f64; h * w];
    for_each_chunk_mut(&mut out, out_w * n * n, |r, row| {
        for q in 0..out_w {
            for sub_r in 0..n {
                for sub_c in 0..n {
                    row[q * n * n + sub_r * n + sub_c] = data[(r * n + sub_r) * w + q * n + sub_c];
                }
            }
        }
    });
    Ok(Tensor::from_op(out_h, out_w, n * n, out))
}

/// The shuffle is an index permutation, so the adjoint is its inverse.
pub fn pixel_shuffle_adjoint(grad_out: &Tensor, n: usize) -> Result<Tensor> {
    pixel_unshuffle(grad_out, n)
}

pub fn pixel_unshuffle_adjoint(grad_out: &Tensor, n: usize) -> Result<Tensor> {
    pixel_shuffle(grad_out, n)
}
