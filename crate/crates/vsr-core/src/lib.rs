//! Self-configuring video super-resolution at desk scale.
//!
//! The crate is organized around four stages:
//!
//! * [`capture`] — a data factory that synthesizes low/high-resolution
//!   training pairs by simulating two image captures of the same scene at
//!   different scales (blur by a stretched PSF, then decimate).
//! * [`net`] — the three-part network: a statistics encoder that reduces a
//!   frame to a global descriptor, a weight engine that mixes a trainable
//!   kernel bank into concrete convolution weights, and a low-capacity
//!   process network with a bicubic residual and pixel-shuffle output.
//! * [`runtime`] — a dual-rate pipeline: the pixel flow upscales every
//!   frame, the configuration flow re-estimates weights every K frames and
//!   hands them over as immutable snapshots.
//! * [`accounting`] — parameter/ops counting and the TOPs arithmetic used
//!   to budget the pipeline.
//!
//! All numerics run at double precision; files that carry tensors use
//! 32-bit little-endian floats (PFM images, weight blobs).

pub mod accounting;
pub mod capture;
pub mod color;
pub mod error;
pub mod io;
pub mod net;
pub mod ops;
pub mod parallel;
pub mod psf;
pub mod runtime;
pub mod synth;
pub mod tensor;
pub mod topology;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{KernelStack, Tensor};
