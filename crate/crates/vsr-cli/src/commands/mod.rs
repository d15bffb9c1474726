pub mod count_ops;
pub mod datagen;
pub mod grad_check;
pub mod infer;
pub mod psf_preview;
pub mod train;
