//! Differentiable numerical primitives: 2-D convolution, pointwise
//! activation, bicubic resampling, pixel shuffle, decimation.
//!
//! Every forward operation has a paired adjoint that consumes the recorded
//! forward inputs and an upstream gradient and returns exact reverse-mode
//! gradients. Compositions chain by accumulation in the network code.

mod activation;
mod conv;
mod decimate;
mod resize;
mod shuffle;

pub use activation::{activation, activation_adjoint, Activation};
pub use conv::{conv2d, conv2d_adjoint, Conv2dGrads, Padding};
pub use decimate::{decimate, decimate_adjoint};
pub use resize::{bicubic_resize, bicubic_resize_adjoint, Scale};
pub use shuffle::{pixel_shuffle, pixel_shuffle_adjoint, pixel_unshuffle, pixel_unshuffle_adjoint};

/// Mirror an out-of-range index back into `[0, n)` without repeating the
/// edge sample (…, 2, 1, 0, 1, 2, …). Handles any overshoot.
#[inline]
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    debug_assert!(n > 0);
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let period = 2 * n - 2;
    let mut m = i % period;
    if m < 0 {
        m += period;
    }
    if m >= n {
        (period - m) as usize
    } else {
        m as usize
    }
}
