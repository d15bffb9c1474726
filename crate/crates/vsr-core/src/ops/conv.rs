//! 2-D convolution (cross-correlation convention) and its adjoint.

use serde::{Deserialize, Serialize};

use super::reflect_index;
use crate::error::{Error, Result};
use crate::parallel::{for_each_chunk_mut, map_indexed};
use crate::tensor::{KernelStack, Tensor};

/// Boundary handling for same-size convolution, or `Valid` to shrink.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    Reflect,
    Zero,
    Valid,
}

/// Cross-correlation of `input` with every kernel in the stack (no kernel
/// flip), bias added per output channel. Output spatial dims equal the input
/// for `Reflect`/`Zero` and shrink by (taps − 1) for `Valid`.
pub fn conv2d(input: &Tensor, kernel: &KernelStack, padding: Padding) -> Result<Tensor> {
    if input.channels() != kernel.in_channels {
        return Err(Error::contract(format!(
            "conv2d: input has {} channels, kernel expects {}",
            input.channels(),
            kernel.in_channels
        )));
    }
    let (h, w) = (input.height(), input.width());
    let (kh, kw) = (kernel.k_h, kernel.k_w);
    let (out_h, out_w) = match padding {
        Padding::Valid => {
            if h < kh || w < kw {
                return Err(Error::contract(format!(
                    "conv2d: valid padding needs input >= {kh}x{kw}, got {h}x{w}"
                )));
            }
            (h - kh + 1, w - kw + 1)
        }
        _ => (h, w),
    };
    let out_c = kernel.out_channels;
    let in_c = kernel.in_channels;
    let (rh, rw) = (kernel.radius_h() as isize, kernel.radius_w() as isize);

    let mut out = vec![0.0f64; out_h * out_w * out_c];
    let x = input.data();
    for_each_chunk_mut(&mut out, out_w * out_c, |r, row| {
        for c in 0..out_w {
            for oc in 0..out_c {
                let mut acc = kernel.bias[oc];
                for ky in 0..kh {
                    let in_r = match padding {
                        Padding::Valid => (r + ky) as isize,
                        _ => r as isize + ky as isize - rh,
                    };
                    let in_r = match padding {
                        Padding::Reflect => reflect_index(in_r, h) as isize,
                        Padding::Zero => {
                            if in_r < 0 || in_r >= h as isize {
                                continue;
                            }
                            in_r
                        }
                        Padding::Valid => in_r,
                    };
                    for kx in 0..kw {
                        let in_col = match padding {
                            Padding::Valid => (c + kx) as isize,
                            _ => c as isize + kx as isize - rw,
                        };
                        let in_col = match padding {
                            Padding::Reflect => reflect_index(in_col, w) as isize,
                            Padding::Zero => {
                                if in_col < 0 || in_col >= w as isize {
                                    continue;
                                }
                                in_col
                            }
                            Padding::Valid => in_col,
                        };
                        let base = (in_r as usize * w + in_col as usize) * in_c;
                        let wbase = ((oc * in_c) * kh + ky) * kw + kx;
                        for ic in 0..in_c {
                            acc += x[base + ic] * kernel.weights[wbase + ic * kh * kw];
                        }
                    }
                }
                row[c * out_c + oc] = acc;
            }
        }
    });
    Ok(Tensor::from_op(out_h, out_w, out_c, out))
}

/// Gradients of a conv2d call: w.r.t. the input tensor and, packed into a
/// `KernelStack` of matching shape, w.r.t. the weights and bias.
pub struct Conv2dGrads {
    pub input: Tensor,
    pub kernel: KernelStack,
}

/// Reverse-mode gradients for [`conv2d`] given the recorded forward input
/// and the upstream gradient of the output.
pub fn conv2d_adjoint(
    input: &Tensor,
    kernel: &KernelStack,
    padding: Padding,
    grad_out: &Tensor,
) -> Result<Conv2dGrads> {
    let forward_shape = match padding {
        Padding::Valid => (
            input.height() + 1 - kernel.k_h,
            input.width() + 1 - kernel.k_w,
            kernel.out_channels,
        ),
        _ => (input.height(), input.width(), kernel.out_channels),
    };
    if grad_out.shape() != forward_shape {
        return Err(Error::contract(format!(
            "conv2d_adjoint: upstream gradient shape {:?} does not match forward output {:?}",
            grad_out.shape(),
            forward_shape
        )));
    }

    let grad_bias = grad_bias(kernel.out_channels, grad_out);
    let grad_weights = grad_weights(input, kernel, padding, grad_out);
    let grad_input = grad_input(input, kernel, padding, grad_out);

    Ok(Conv2dGrads {
        input: grad_input,
        kernel: KernelStack::from_op(
            kernel.out_channels,
            kernel.in_channels,
            kernel.k_h,
            kernel.k_w,
            grad_weights,
            grad_bias,
        ),
    })
}

fn grad_bias(out_c: usize, grad_out: &Tensor) -> Vec<f64> {
    map_indexed(out_c, |oc| {
        let mut acc = 0.0;
        let g = grad_out.data();
        let mut i = oc;
        while i < g.len() {
            acc += g[i];
            i += out_c;
        }
        acc
    })
}

fn grad_weights(
    input: &Tensor,
    kernel: &KernelStack,
    padding: Padding,
    grad_out: &Tensor,
) -> Vec<f64> {
    let (h, w) = (input.height(), input.width());
    let (kh, kw) = (kernel.k_h, kernel.k_w);
    let in_c = kernel.in_channels;
    let out_c = kernel.out_channels;
    let (out_h, out_w) = (grad_out.height(), grad_out.width());
    let (rh, rw) = (kernel.radius_h() as isize, kernel.radius_w() as isize);
    let x = input.data();
    let g = grad_out.data();
    let per_oc = in_c * kh * kw;

    let mut gw = vec![0.0f64; out_c * per_oc];
    for_each_chunk_mut(&mut gw, per_oc, |oc, block| {
        for r in 0..out_h {
            for c in 0..out_w {
                let gv = g[(r * out_w + c) * out_c + oc];
                if gv == 0.0 {
                    continue;
                }
                for ky in 0..kh {
                    let in_r = match padding {
                        Padding::Valid => (r + ky) as isize,
                        _ => r as isize + ky as isize - rh,
                    };
                    let in_r = match padding {
                        Padding::Reflect => reflect_index(in_r, h),
                        Padding::Zero => {
                            if in_r < 0 || in_r >= h as isize {
                                continue;
                            }
                            in_r as usize
                        }
                        Padding::Valid => in_r as usize,
                    };
                    for kx in 0..kw {
                        let in_col = match padding {
                            Padding::Valid => (c + kx) as isize,
                            _ => c as isize + kx as isize - rw,
                        };
                        let in_col = match padding {
                            Padding::Reflect => reflect_index(in_col, w),
                            Padding::Zero => {
                                if in_col < 0 || in_col >= w as isize {
                                    continue;
                                }
                                in_col as usize
                            }
                            Padding::Valid => in_col as usize,
                        };
                        let base = (in_r * w + in_col) * in_c;
                        for ic in 0..in_c {
                            block[(ic * kh + ky) * kw + kx] += gv * x[base + ic];
                        }
                    }
                }
            }
        }
    });
    gw
}

fn grad_input(
    input: &Tensor,
    kernel: &KernelStack,
    padding: Padding,
    grad_out: &Tensor,
) -> Tensor {
    let (h, w) = (input.height(), input.width());
    match padding {
        Padding::Reflect => {
            // The forward pass is a valid conv of the reflect-padded array,
            // so gather against virtual (padded) coordinates with zero
            // offset, then fold the border bands back onto their reflected
            // interior cells.
            let rh = kernel.radius_h();
            let rw = kernel.radius_w();
            let virt = gather_grad_input(kernel, grad_out, h + 2 * rh, w + 2 * rw, 0, 0);
            let in_c = kernel.in_channels;
            let mut folded = vec![0.0f64; h * w * in_c];
            for vr in 0..h + 2 * rh {
                let tr = reflect_index(vr as isize - rh as isize, h);
                for vc in 0..w + 2 * rw {
                    let tc = reflect_index(vc as isize - rw as isize, w);
                    let src = (vr * (w + 2 * rw) + vc) * in_c;
                    let dst = (tr * w + tc) * in_c;
                    for ic in 0..in_c {
                        folded[dst + ic] += virt.data()[src + ic];
                    }
                }
            }
            Tensor::from_op(h, w, in_c, folded)
        }
        Padding::Zero => gather_grad_input(kernel, grad_out, h, w, kernel.radius_h(), kernel.radius_w()),
        Padding::Valid => gather_grad_input(kernel, grad_out, h, w, 0, 0),
    }
}

/// grad_in(u,v,ic) = Σ_{oc,ky,kx} grad_out(u−ky+off_r, v−kx+off_c, oc)·w(oc,ic,ky,kx)
/// over in-range grad_out coordinates. Covers valid (offsets 0), zero-same
/// (offsets = radius) and the virtual array of the reflect case.
fn gather_grad_input(
    kernel: &KernelStack,
    grad_out: &Tensor,
    gh: usize,
    gw_dim: usize,
    off_r: usize,
    off_c: usize,
) -> Tensor {
    let (out_h, out_w) = (grad_out.height(), grad_out.width());
    let (kh, kw) = (kernel.k_h, kernel.k_w);
    let in_c = kernel.in_channels;
    let out_c = kernel.out_channels;
    let g = grad_out.data();

    let mut gi = vec![0.0f64; gh * gw_dim * in_c];
    for_each_chunk_mut(&mut gi, gw_dim * in_c, |u, row| {
        for v in 0..gw_dim {
            for ky in 0..kh {
                let r = u as isize - ky as isize + off_r as isize;
                if r < 0 || r >= out_h as isize {
                    continue;
                }
                for kx in 0..kw {
                    let c = v as isize - kx as isize + off_c as isize;
                    if c < 0 || c >= out_w as isize {
                        continue;
                    }
                    let gbase = (r as usize * out_w + c as usize) * out_c;
                    for oc in 0..out_c {
                        let gv = g[gbase + oc];
                        if gv == 0.0 {
                            continue;
                        }
                        let wbase = ((oc * in_c) * kh + ky) * kw + kx;
                        for ic in 0..in_c {
                            row[v * in_c + ic] += gv * kernel.weights[wbase + ic * kh * kw];
                        }
                    }
                }
            }
        }
    });
    Tensor::from_op(gh, gw_dim, in_c, gi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Tensor {
        Tensor::from_fn(h, w, 1, |r, c, _| (r * w + c) as f64)
    }

    #[test]
    fn delta_kernel_is_identity() {
        let img = Tensor::from_fn(5, 7, 2, |r, c, ch| (r * 31 + c * 7 + ch) as f64 * 0.01);
        let mut weights = vec![0.0; 2 * 2 * 9];
        // center tap 1 on the diagonal: out channel k copies in channel k
        for ch in 0..2 {
            weights[((ch * 2 + ch) * 3 + 1) * 3 + 1] = 1.0;
        }
        let k = KernelStack::new(2, 2, 3, 3, weights, vec![0.0, 0.0]).unwrap();
        for pad in [Padding::Reflect, Padding::Zero] {
            let out = conv2d(&img, &k, pad).unwrap();
            assert_eq!(out, img);
        }
    }

    #[test]
    fn averaging_preserves_constants_under_reflect() {
        let img = Tensor::filled(6, 6, 1, 0.37);
        let k = KernelStack::single(3, 3, vec![1.0 / 9.0; 9]).unwrap();
        let out = conv2d(&img, &k, Padding::Reflect).unwrap();
        for &v in out.data() {
            assert!((v - 0.37).abs() < 1e-12);
        }
    }

    /// Brute-force four-nested-loop reference for valid cross-correlation,
    /// written independently of the implementation above.
    fn conv_valid_reference(x: &Tensor, k: &KernelStack) -> Vec<f64> {
        let out_h = x.height() - k.k_h + 1;
        let out_w = x.width() - k.k_w + 1;
        let mut out = vec![0.0; out_h * out_w * k.out_channels];
        for r in 0..out_h {
            for c in 0..out_w {
                for oc in 0..k.out_channels {
                    let mut acc = k.bias[oc];
                    for ic in 0..k.in_channels {
                        for ky in 0..k.k_h {
                            for kx in 0..k.k_w {
                                acc += x.at(r + ky, c + kx, ic) * k.weight_at(oc, ic, ky, kx);
                            }
                        }
                    }
                    out[(r * out_w + c) * k.out_channels + oc] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn valid_conv_matches_nested_loop_oracle() {
        let img = ramp(4, 4);
        let k = KernelStack::single(
            3,
            3,
            vec![0.5, -1.0, 2.0, 0.25, 3.0, -0.75, 1.5, -2.5, 0.125],
        )
        .unwrap();
        let got = conv2d(&img, &k, Padding::Valid).unwrap();
        assert_eq!(got.shape(), (2, 2, 1));
        let want = conv_valid_reference(&img, &k);
        for (g, w) in got.data().iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "got {g}, want {w}");
        }
    }

    #[test]
    fn multichannel_conv_matches_oracle_all_paddings() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let img = Tensor::from_fn(6, 5, 3, |_, _, _| next());
        let k = KernelStack::new(
            2,
            3,
            3,
            3,
            (0..2 * 3 * 9).map(|_| next()).collect(),
            vec![next(), next()],
        )
        .unwrap();
        // Valid is checked against the independent oracle; reflect/zero are
        // checked against the same oracle applied to an explicitly padded image.
        let got = conv2d(&img, &k, Padding::Valid).unwrap();
        let want = conv_valid_reference(&img, &k);
        for (g, w) in got.data().iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
        for pad in [Padding::Reflect, Padding::Zero] {
            let padded = pad_explicit(&img, 1, 1, pad);
            let want = conv_valid_reference(&padded, &k);
            let got = conv2d(&img, &k, pad).unwrap();
            for (g, w) in got.data().iter().zip(&want) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    fn pad_explicit(x: &Tensor, rh: usize, rw: usize, pad: Padding) -> Tensor {
        Tensor::from_fn(
            x.height() + 2 * rh,
            x.width() + 2 * rw,
            x.channels(),
            |r, c, ch| {
                let rr = r as isize - rh as isize;
                let cc = c as isize - rw as isize;
                match pad {
                    Padding::Zero => {
                        if rr < 0
                            || cc < 0
                            || rr >= x.height() as isize
                            || cc >= x.width() as isize
                        {
                            0.0
                        } else {
                            x.at(rr as usize, cc as usize, ch)
                        }
                    }
                    Padding::Reflect => x.at(
                        reflect_index(rr, x.height()),
                        reflect_index(cc, x.width()),
                        ch,
                    ),
                    Padding::Valid => unreachable!(),
                }
            },
        )
    }

    #[test]
    fn channel_mismatch_is_contract_violation() {
        let img = Tensor::zeros(4, 4, 2);
        let k = KernelStack::zeros(1, 3, 3, 3).unwrap();
        assert!(matches!(
            conv2d(&img, &k, Padding::Zero),
            Err(crate::Error::Contract(_))
        ));
    }

    #[test]
    fn conv_is_linear_in_input() {
        let mut seed = 42u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let x = Tensor::from_fn(5, 5, 1, |_, _, _| next());
        let y = Tensor::from_fn(5, 5, 1, |_, _, _| next());
        let k = KernelStack::single(3, 3, (0..9).map(|_| next()).collect()).unwrap();
        let (a, b) = (1.7, -0.3);
        let lhs_in = Tensor::from_fn(5, 5, 1, |r, c, ch| a * x.at(r, c, ch) + b * y.at(r, c, ch));
        for pad in [Padding::Reflect, Padding::Zero, Padding::Valid] {
            let lhs = conv2d(&lhs_in, &k, pad).unwrap();
            let cx = conv2d(&x, &k, pad).unwrap();
            let cy = conv2d(&y, &k, pad).unwrap();
            for i in 0..lhs.len() {
                let rhs = a * cx.data()[i] + b * cy.data()[i];
                assert!((lhs.data()[i] - rhs).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn bias_gradient_counts_output_pixels() {
        let img = Tensor::filled(6, 6, 1, 0.5);
        let k = KernelStack::new(2, 1, 3, 3, vec![0.1; 18], vec![0.0, 0.0]).unwrap();
        let out = conv2d(&img, &k, Padding::Reflect).unwrap();
        let grads =
            conv2d_adjoint(&img, &k, Padding::Reflect, &Tensor::filled(6, 6, 2, 1.0)).unwrap();
        assert_eq!(out.shape(), (6, 6, 2));
        // d sum(out) / d bias = number of output pixels per channel
        assert_eq!(grads.kernel.bias, vec![36.0, 36.0]);
    }
}
