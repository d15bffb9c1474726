//! Process network: a low-capacity conv trunk ending in R² channels, pixel
//! shuffle, and a bicubic-upscaled residual connection.

use super::engine::ProcessWeights;
use super::ConvTrace;
use crate::error::{Error, Result};
use crate::ops::{
    activation, activation_adjoint, bicubic_resize, conv2d, conv2d_adjoint, pixel_shuffle,
    pixel_shuffle_adjoint, Padding, Scale,
};
use crate::tensor::{KernelStack, Tensor};
use crate::topology::TopologySpec;

pub struct ProcessTrace {
    pub(crate) layers: Vec<ConvTrace>,
}

pub fn process_forward(
    frame: &Tensor,
    weights: &ProcessWeights,
    spec: &TopologySpec,
) -> Result<Tensor> {
    process_forward_traced(frame, weights, spec).map(|(t, _)| t)
}

/// `out = pixel_shuffle(trunk(frame), R) + bicubic_resize(frame, R)`.
/// The frame must be single-channel luma; output is R× the input, 1 channel.
pub fn process_forward_traced(
    frame: &Tensor,
    weights: &ProcessWeights,
    spec: &TopologySpec,
) -> Result<(Tensor, ProcessTrace)> {
    if frame.channels() != 1 {
        return Err(Error::contract(
            "process network consumes a single luma channel",
        ));
    }
    if weights.layers().len() != spec.process_layers.len() {
        return Err(Error::contract("process: weight/layer count mismatch"));
    }
    let mut x = frame.clone();
    let mut layers = Vec::with_capacity(spec.process_layers.len());
    for (kernel, layer) in weights.layers().iter().zip(&spec.process_layers) {
        let pre = conv2d(&x, kernel, Padding::Reflect)?;
        let post = activation(&pre, layer.activation);
        layers.push(ConvTrace {
            input: x,
            pre_activation: pre,
        });
        x = post;
    }
    let r = spec.upscale;
    if x.channels() != r * r {
        return Err(Error::contract(format!(
            "process trunk must end in R²={} channels, got {}",
            r * r,
            x.channels()
        )));
    }
    let shuffled = pixel_shuffle(&x, r)?;
    let residual = bicubic_resize(frame, Scale::up(r as u32))?;
    let out = shuffled.add(&residual)?;
    Ok((out, ProcessTrace { layers }))
}

/// Gradients w.r.t. every mixed kernel/bias. The gradient w.r.t. the frame
/// is not propagated (frames are data, not parameters).
pub fn process_backward(
    trace: &ProcessTrace,
    weights: &ProcessWeights,
    spec: &TopologySpec,
    grad_out: &Tensor,
) -> Result<Vec<KernelStack>> {
    let r = spec.upscale;
    let mut grad_x = pixel_shuffle_adjoint(grad_out, r)?;
    let mut grads = vec![None; trace.layers.len()];
    for j in (0..trace.layers.len()).rev() {
        let grad_pre = activation_adjoint(
            &trace.layers[j].pre_activation,
            spec.process_layers[j].activation,
            &grad_x,
        )?;
        let conv_grads = conv2d_adjoint(
            &trace.layers[j].input,
            &weights.layers()[j],
            Padding::Reflect,
            &grad_pre,
        )?;
        grads[j] = Some(conv_grads.kernel);
        grad_x = conv_grads.input;
    }
    Ok(grads.into_iter().map(|g| g.unwrap()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::engine::{mix_with_coefficients, MixCoefficients};
    use crate::net::ModelParams;
    use crate::topology::TopologySpec;

    #[test]
    fn zero_trunk_is_pure_bicubic() {
        let spec = TopologySpec::tiny(4);
        let params = ModelParams::zeros(&spec).unwrap();
        let alpha = MixCoefficients::forced(
            spec.kernels_per_layer.iter().map(|&m| vec![0.5; m]).collect(),
        );
        let weights = mix_with_coefficients(&params.bank, &alpha, None, 1).unwrap();
        let frame = Tensor::from_fn(8, 8, 1, |r, c, _| ((r * 8 + c) % 9) as f64 / 9.0 + 0.05);
        let out = process_forward(&frame, &weights, &spec).unwrap();
        let bicubic = bicubic_resize(&frame, Scale::up(4)).unwrap();
        assert_eq!(out, bicubic);
    }

    #[test]
    fn output_dims_are_r_times_input() {
        let spec = TopologySpec::tiny(4);
        let params = ModelParams::random(&spec, 3).unwrap();
        let alpha = MixCoefficients::forced(
            spec.kernels_per_layer.iter().map(|&m| vec![1.0 / m as f64; m]).collect(),
        );
        let weights = mix_with_coefficients(&params.bank, &alpha, None, 1).unwrap();
        let frame = Tensor::from_fn(6, 10, 1, |r, c, _| ((r + c) % 4) as f64 / 4.0);
        let out = process_forward(&frame, &weights, &spec).unwrap();
        assert_eq!(out.shape(), (24, 40, 1));
    }

    #[test]
    fn broadcast_geometry_quadruples_to_1080p() {
        // 270x320 at x4 is the 1080x1280 broadcast frame
        let spec = TopologySpec::desk_default();
        let params = ModelParams::random(&spec, 4).unwrap();
        let alpha = MixCoefficients::forced(
            spec.kernels_per_layer.iter().map(|&m| vec![1.0 / m as f64; m]).collect(),
        );
        let weights = mix_with_coefficients(&params.bank, &alpha, None, 1).unwrap();
        let frame = Tensor::from_fn(270, 320, 1, |r, c, _| ((r * 320 + c) % 255) as f64 / 255.0);
        let out = process_forward(&frame, &weights, &spec).unwrap();
        assert_eq!(out.shape(), (1080, 1280, 1));
    }

    #[test]
    fn one_layer_delta_trunk_matches_composed_primitives() {
        // Single process layer holding R² delta kernels: the trunk copies
        // the frame into every channel, so the output must equal
        // pixel_shuffle(copies) + bicubic, assembled by hand.
        let r = 2usize;
        let spec = TopologySpec {
            process_layers: vec![crate::topology::ConvLayerSpec::new(
                r * r,
                3,
                crate::ops::Activation::Identity,
            )],
            kernels_per_layer: vec![1],
            ..TopologySpec::tiny(r)
        };
        spec.validate().unwrap();
        let mut delta = KernelStack::zeros(r * r, 1, 3, 3).unwrap();
        for oc in 0..r * r {
            let idx = delta.widx(oc, 0, 1, 1);
            delta.weights[idx] = 1.0;
        }
        let weights = super::super::engine::mix_with_coefficients(
            &crate::net::KernelBank {
                layers: vec![vec![delta]],
            },
            &MixCoefficients::forced(vec![vec![1.0]]),
            None,
            1,
        )
        .unwrap();
        let frame = Tensor::from_fn(5, 4, 1, |r, c, _| ((3 * r + c) % 7) as f64 / 7.0);
        let got = process_forward(&frame, &weights, &spec).unwrap();

        let copies =
            Tensor::concat_channels(&vec![&frame; r * r]).unwrap();
        let want = pixel_shuffle(&copies, r)
            .unwrap()
            .add(&bicubic_resize(&frame, Scale::up(r as u32)).unwrap())
            .unwrap();
        assert_eq!(got, want);
    }
}
