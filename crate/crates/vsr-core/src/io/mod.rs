//! File formats: PFM tensors (authoritative, bit-exact), PNG previews,
//! dataset directories, and weight checkpoints.

pub mod dataset;
pub mod pfm;
pub mod png;
pub mod weights;
