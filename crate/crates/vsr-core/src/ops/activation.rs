//! Pointwise activations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Identity => x,
        }
    }

    /// Derivative at `x`; the kink at 0 uses the negative-side slope.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Elementwise activation; shape preserved.
pub fn activation(x: &Tensor, kind: Activation) -> Tensor {
    if kind == Activation::Identity {
        return x.clone();
    }
    x.map(|v| kind.apply(v))
}

/// Gradient w.r.t. the activation input, given the recorded pre-activation
/// input and the upstream gradient.
pub fn activation_adjoint(input: &Tensor, kind: Activation, grad_out: &Tensor) -> Result<Tensor> {
    if input.shape() != grad_out.shape() {
        return Err(Error::contract("activation_adjoint: shape mismatch"));
    }
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| g * kind.derivative(x))
        .collect();
    Ok(Tensor::from_op(
        input.height(),
        input.width(),
        input.channels(),
        data,
    ))
}
