//! Decimation: keep every s-th sample along each axis.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `output(i, j, c) = input(s·i + row_offset, s·j + col_offset, c)`.
/// Dims must be divisible by `s`; offsets must be below `s`.
pub fn decimate(x: &Tensor, s: usize, phase: (usize, usize)) -> Result<Tensor> {
    if s == 0 {
        return Err(Error::contract("decimate: factor must be positive"));
    }
    let (h, w, ch) = x.shape();
    if h % s != 0 || w % s != 0 {
        return Err(Error::contract(format!(
            "decimate: dims {h}x{w} not divisible by {s}"
        )));
    }
    let (pr, pc) = phase;
    if pr >= s || pc >= s {
        return Err(Error::contract(format!(
            "decimate: phase ({pr},{pc}) must be below factor {s}"
        )));
    }
    if s == 1 {
        return Ok(x.clone());
    }
    let (out_h, out_w) = (h / s, w / s);
    let mut out = Vec::with_capacity(out_h * out_w * ch);
    for i in 0..out_h {
        for j in 0..out_w {
            let base = ((s * i + pr) * w + s * j + pc) * ch;
            out.extend_from_slice(&x.data()[base..base + ch]);
        }
    }
    Ok(Tensor::from_op(out_h, out_w, ch, out))
}

/// Gradient w.r.t. the decimation input: zero-stuff the upstream gradient
/// back onto the kept sampling sites.
pub fn decimate_adjoint(
    in_h: usize,
    in_w: usize,
    s: usize,
    phase: (usize, usize),
    grad_out: &Tensor,
) -> Result<Tensor> {
    if s == 0 || in_h % s != 0 || in_w % s != 0 {
        return Err(Error::contract("decimate_adjoint: invalid geometry"));
    }
    let (gh, gw, ch) = grad_out.shape();
    if gh != in_h / s || gw != in_w / s {
        return Err(Error::contract(
            "decimate_adjoint: upstream gradient dims mismatch",
        ));
    }
    let (pr, pc) = phase;
    let mut out = vec![0.0f64; in_h * in_w * ch];
    for i in 0..gh {
        for j in 0..gw {
            let dst = ((s * i + pr) * in_w + s * j + pc) * ch;
            let src = (i * gw + j) * ch;
            out[dst..dst + ch].copy_from_slice(&grad_out.data()[src..src + ch]);
        }
    }
    Ok(Tensor::from_op(in_h, in_w, ch, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_one_is_identity() {
        let x = Tensor::from_fn(3, 3, 2, |r, c, ch| (r * 10 + c + ch) as f64);
        assert_eq!(decimate(&x, 1, (0, 0)).unwrap(), x);
    }

    #[test]
    fn keeps_even_sites_at_zero_phase() {
        let x = Tensor::from_fn(4, 4, 1, |r, c, _| (r * 4 + c) as f64);
        let d = decimate(&x, 2, (0, 0)).unwrap();
        assert_eq!(d.shape(), (2, 2, 1));
        assert_eq!(d.data(), &[0.0, 2.0, 8.0, 10.0]);
        let d1 = decimate(&x, 2, (1, 1)).unwrap();
        assert_eq!(d1.data(), &[5.0, 7.0, 13.0, 15.0]);
    }

    #[test]
    fn composition_law() {
        let x = Tensor::from_fn(8, 8, 1, |r, c, _| (r * 8 + c) as f64);
        let twice = decimate(&decimate(&x, 2, (0, 0)).unwrap(), 2, (0, 0)).unwrap();
        let once = decimate(&x, 4, (0, 0)).unwrap();
        assert_eq!(twice, once);
    }

    #[test]
    fn indivisible_dims_rejected() {
        let x = Tensor::zeros(5, 4, 1);
        assert!(decimate(&x, 2, (0, 0)).is_err());
        assert!(decimate(&Tensor::zeros(4, 4, 1), 2, (2, 0)).is_err());
    }

    #[test]
    fn adjoint_zero_stuffs() {
        let g = Tensor::filled(2, 2, 1, 3.0);
        let a = decimate_adjoint(4, 4, 2, (1, 0), &g).unwrap();
        assert_eq!(a.at(1, 0, 0), 3.0);
        assert_eq!(a.at(1, 2, 0), 3.0);
        assert_eq!(a.at(0, 0, 0), 0.0);
        assert_eq!(a.data().iter().sum::<f64>(), 12.0);
    }
}
