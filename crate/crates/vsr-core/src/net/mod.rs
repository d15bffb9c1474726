//! The three-part network: statistics encoder, weight engine, process
//! network, and their end-to-end composition.

mod engine;
mod model;
mod process;
mod stats;

pub use engine::{
    fcnn_forward, mix_backward, mix_weights, mix_weights_traced, mix_with_coefficients,
    DenseLayer, FcnnTrace, KernelBank, MixCoefficients, MixTrace, ProcessWeights,
};
pub use model::{sr_backward, sr_forward, sr_forward_traced, ModelParams, SrTrace, TensorEntry};
pub use process::{process_backward, process_forward, process_forward_traced, ProcessTrace};
pub use stats::{
    global_weighted_average, global_weighted_average_adjoint, stats_backward, stats_forward,
    stats_forward_traced, GwaGrads, StatsTrace,
};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Frame-wide statistics vector produced by the statistics encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct StatsVector(pub Vec<f64>);

/// User preference vector; every component lies in [0,1].
#[derive(Clone, Debug, PartialEq)]
pub struct PrefVector(Vec<f64>);

impl PrefVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::contract(
                "preference components must lie in [0,1]",
            ));
        }
        Ok(PrefVector(values))
    }

    /// Mid-scale preference of the given length.
    pub fn neutral(dim: usize) -> Self {
        PrefVector(vec![0.5; dim])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Recorded inputs of one conv+activation layer, kept for the adjoint pass.
#[derive(Clone, Debug)]
pub(crate) struct ConvTrace {
    pub input: Tensor,
    pub pre_activation: Tensor,
}
