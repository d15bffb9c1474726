//! Network topology description shared by the network, the accounting and
//! the checkpoint format.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::Activation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvLayerSpec {
    pub out_channels: usize,
    pub taps: usize,
    pub activation: Activation,
}

impl ConvLayerSpec {
    pub fn new(out_channels: usize, taps: usize, activation: Activation) -> Self {
        ConvLayerSpec {
            out_channels,
            taps,
            activation,
        }
    }
}

/// The full three-part network shape.
///
/// The statistics encoder is a conv stack whose final layer emits
/// `stats_vector_dim + 1` channels: the feature maps that get globally
/// averaged plus one spatial logit map that supplies the averaging weights.
/// The weight engine is a fully connected stack from the concatenated
/// statistics/preference vector to the mixing coefficients of the kernel
/// bank. The process network is a conv trunk ending in `upscale²` channels
/// for the pixel shuffle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    /// Frame channels entering both flows; the pixel path is luma-only.
    pub input_channels: usize,
    pub stats_layers: Vec<ConvLayerSpec>,
    /// d_s: length of the frame statistics vector.
    pub stats_vector_dim: usize,
    /// Hidden widths of the weight-engine FCNN (input and output widths are
    /// derived).
    pub fcnn_hidden: Vec<usize>,
    /// m_j: bank candidates per process layer.
    pub kernels_per_layer: Vec<usize>,
    pub process_layers: Vec<ConvLayerSpec>,
    /// R: output/input linear size ratio.
    pub upscale: usize,
    /// d_p: length of the user preference vector.
    pub pref_dim: usize,
    /// Softmax-normalize the mixing coefficients per layer.
    #[serde(default)]
    pub simplex_mixing: bool,
    /// Mix biases with their own coefficients instead of sharing the kernel
    /// coefficients (doubles the FCNN output width).
    #[serde(default)]
    pub independent_bias_mixing: bool,
}

impl TopologySpec {
    /// The desk-scale default: four 3×3 stats layers (8, 16, 16, 16+logit),
    /// a 16-entry statistics vector, a 32→32 FCNN, a three-layer process
    /// trunk (12, 12, R²) at R = 4 with 32 bank candidates per layer, and a
    /// single sharpness preference.
    pub fn desk_default() -> Self {
        let r = 4;
        TopologySpec {
            input_channels: 1,
            stats_layers: vec![
                ConvLayerSpec::new(8, 3, Activation::Relu),
                ConvLayerSpec::new(16, 3, Activation::Relu),
                ConvLayerSpec::new(16, 3, Activation::Relu),
                ConvLayerSpec::new(17, 3, Activation::Relu),
            ],
            stats_vector_dim: 16,
            fcnn_hidden: vec![32, 32],
            kernels_per_layer: vec![32, 32, 32],
            process_layers: vec![
                ConvLayerSpec::new(12, 3, Activation::Relu),
                ConvLayerSpec::new(12, 3, Activation::Relu),
                ConvLayerSpec::new(r * r, 3, Activation::Identity),
            ],
            upscale: r,
            pref_dim: 1,
            simplex_mixing: false,
            independent_bias_mixing: false,
        }
    }

    /// The desk-scale default adapted to another upscaling ratio (the final
    /// process layer must emit R² channels).
    pub fn desk_default_for(r: usize) -> Self {
        let mut spec = Self::desk_default();
        spec.upscale = r;
        spec.process_layers.last_mut().unwrap().out_channels = r * r;
        spec
    }

    /// A miniature topology for fast tests: same structure, tiny widths.
    pub fn tiny(r: usize) -> Self {
        TopologySpec {
            input_channels: 1,
            stats_layers: vec![
                ConvLayerSpec::new(4, 3, Activation::Relu),
                ConvLayerSpec::new(5, 3, Activation::Relu),
            ],
            stats_vector_dim: 4,
            fcnn_hidden: vec![6],
            kernels_per_layer: vec![2, 3],
            process_layers: vec![
                ConvLayerSpec::new(3, 3, Activation::Relu),
                ConvLayerSpec::new(r * r, 3, Activation::Identity),
            ],
            upscale: r,
            pref_dim: 1,
            simplex_mixing: false,
            independent_bias_mixing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_channels != 1 {
            return Err(Error::contract(
                "topology: the processing path is single-channel (luma)",
            ));
        }
        if self.upscale == 0 || self.stats_vector_dim == 0 || self.pref_dim == 0 {
            return Err(Error::contract("topology: dimensions must be positive"));
        }
        if self.stats_layers.is_empty() || self.process_layers.is_empty() {
            return Err(Error::contract("topology: layer lists must be non-empty"));
        }
        for (name, layers) in [("stats", &self.stats_layers), ("process", &self.process_layers)]
        {
            for (i, l) in layers.iter().enumerate() {
                if l.out_channels == 0 {
                    return Err(Error::contract(format!(
                        "topology: {name} layer {i} has zero channels"
                    )));
                }
                if l.taps % 2 == 0 {
                    return Err(Error::contract(format!(
                        "topology: {name} layer {i} taps must be odd"
                    )));
                }
            }
        }
        let last_stats = self.stats_layers.last().unwrap();
        if last_stats.out_channels != self.stats_vector_dim + 1 {
            return Err(Error::contract(format!(
                "topology: final stats layer must emit {} channels (features + logit map), has {}",
                self.stats_vector_dim + 1,
                last_stats.out_channels
            )));
        }
        let last_process = self.process_layers.last().unwrap();
        if last_process.out_channels != self.upscale * self.upscale {
            return Err(Error::contract(format!(
                "topology: final process layer must emit R²={} channels, has {}",
                self.upscale * self.upscale,
                last_process.out_channels
            )));
        }
        if self.kernels_per_layer.len() != self.process_layers.len() {
            return Err(Error::contract(
                "topology: kernels_per_layer must list one bank size per process layer",
            ));
        }
        if self.kernels_per_layer.iter().any(|&m| m == 0) {
            return Err(Error::contract("topology: bank sizes must be >= 1"));
        }
        if self.fcnn_hidden.iter().any(|&w| w == 0) {
            return Err(Error::contract("topology: fcnn widths must be >= 1"));
        }
        Ok(())
    }

    /// Input channels of stats layer `j`.
    pub fn stats_in_channels(&self, j: usize) -> usize {
        if j == 0 {
            self.input_channels
        } else {
            self.stats_layers[j - 1].out_channels
        }
    }

    /// Input channels of process layer `j` (the trunk consumes luma).
    pub fn process_in_channels(&self, j: usize) -> usize {
        if j == 0 {
            1
        } else {
            self.process_layers[j - 1].out_channels
        }
    }

    /// Σ_j m_j, the number of kernel-mixing coefficients.
    pub fn bank_coefficients(&self) -> usize {
        self.kernels_per_layer.iter().sum()
    }

    /// FCNN output width: Σ m_j, doubled when biases mix independently.
    pub fn fcnn_output_dim(&self) -> usize {
        self.bank_coefficients() * if self.independent_bias_mixing { 2 } else { 1 }
    }

    pub fn fcnn_input_dim(&self) -> usize {
        self.stats_vector_dim + self.pref_dim
    }

    /// Full FCNN width chain: input, hidden…, output.
    pub fn fcnn_widths(&self) -> Vec<usize> {
        let mut widths = Vec::with_capacity(self.fcnn_hidden.len() + 2);
        widths.push(self.fcnn_input_dim());
        widths.extend_from_slice(&self.fcnn_hidden);
        widths.push(self.fcnn_output_dim());
        widths
    }
}
