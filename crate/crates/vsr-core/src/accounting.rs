//! Parameter and operation counting for a topology, plus the TOPs
//! arithmetic used to budget the dual-rate pipeline.
//!
//! Conventions: one multiply-accumulate counts as 2 ops; bias additions are
//! not counted; non-identity activations and the softmax in the global
//! average cost 1 op per element; pixel shuffle costs no arithmetic; the
//! bicubic residual is costed at 2·(4×4) MACs per output pixel (separable
//! evaluation is not assumed).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ops::Activation;
use crate::topology::{ConvLayerSpec, TopologySpec};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ParamCounts {
    pub pixel_flow: usize,
    pub control_flow: usize,
}

/// Trainable parameter counts. The pixel flow carries the process network's
/// materialized weights; the control flow carries the statistics encoder,
/// the FCNN and the kernel bank.
pub fn count_params(spec: &TopologySpec) -> Result<ParamCounts> {
    spec.validate()?;
    let conv = |out: usize, inc: usize, taps: usize| out * inc * taps * taps + out;
    let pixel_flow: usize = spec
        .process_layers
        .iter()
        .enumerate()
        .map(|(j, l)| conv(l.out_channels, spec.process_in_channels(j), l.taps))
        .sum();
    let stats: usize = spec
        .stats_layers
        .iter()
        .enumerate()
        .map(|(j, l)| conv(l.out_channels, spec.stats_in_channels(j), l.taps))
        .sum();
    let fcnn: usize = spec
        .fcnn_widths()
        .windows(2)
        .map(|w| w[1] * w[0] + w[1])
        .sum();
    let bank: usize = spec
        .kernels_per_layer
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            let l = &spec.process_layers[j];
            m * conv(l.out_channels, spec.process_in_channels(j), l.taps)
        })
        .sum();
    Ok(ParamCounts {
        pixel_flow,
        control_flow: stats + fcnn + bank,
    })
}

/// Absolute operation counts for one frame (pixel flow) and one trigger
/// (control flow) at a given input geometry.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OpsBreakdown {
    pub pixel_conv: f64,
    pub pixel_activation: f64,
    pub pixel_residual: f64,
    pub control_stats_conv: f64,
    pub control_stats_activation: f64,
    pub control_global_average: f64,
    pub control_fcnn: f64,
    pub control_mixing: f64,
}

impl OpsBreakdown {
    pub fn pixel_total(&self) -> f64 {
        self.pixel_conv + self.pixel_activation + self.pixel_residual
    }

    pub fn control_total(&self) -> f64 {
        self.control_stats_conv
            + self.control_stats_activation
            + self.control_global_average
            + self.control_fcnn
            + self.control_mixing
    }
}

fn activation_cost(act: Activation) -> f64 {
    match act {
        Activation::Identity => 0.0,
        _ => 1.0,
    }
}

fn conv_stack_ops(
    layers: &[ConvLayerSpec],
    in_channels_of: impl Fn(usize) -> usize,
    pixels: f64,
) -> (f64, f64) {
    let mut conv = 0.0;
    let mut act = 0.0;
    for (j, l) in layers.iter().enumerate() {
        conv += 2.0
            * l.out_channels as f64
            * in_channels_of(j) as f64
            * (l.taps * l.taps) as f64
            * pixels;
        act += activation_cost(l.activation) * l.out_channels as f64 * pixels;
    }
    (conv, act)
}

pub fn count_ops(spec: &TopologySpec, in_h: usize, in_w: usize) -> Result<OpsBreakdown> {
    spec.validate()?;
    if in_h == 0 || in_w == 0 {
        return Err(Error::contract("input dims must be positive"));
    }
    let in_px = (in_h * in_w) as f64;
    let r2 = (spec.upscale * spec.upscale) as f64;

    let (pixel_conv, pixel_activation) =
        conv_stack_ops(&spec.process_layers, |j| spec.process_in_channels(j), in_px);
    // 4x4 taps, 2 ops per MAC, per output pixel
    let pixel_residual = 32.0 * r2 * in_px;

    let (control_stats_conv, control_stats_activation) =
        conv_stack_ops(&spec.stats_layers, |j| spec.stats_in_channels(j), in_px);
    // softmax at 1 op per logit, then a d_s-channel weighted sum
    let control_global_average = in_px + 2.0 * spec.stats_vector_dim as f64 * in_px;
    let mut control_fcnn = 0.0;
    let widths = spec.fcnn_widths();
    for (l, w) in widths.windows(2).enumerate() {
        control_fcnn += 2.0 * (w[0] * w[1]) as f64;
        if l + 2 < widths.len() {
            control_fcnn += w[1] as f64; // hidden relu
        }
    }
    let control_mixing: f64 = spec
        .kernels_per_layer
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            let l = &spec.process_layers[j];
            let kernel_elems = l.out_channels * spec.process_in_channels(j) * l.taps * l.taps;
            2.0 * m as f64 * (kernel_elems + l.out_channels) as f64
        })
        .sum();

    Ok(OpsBreakdown {
        pixel_conv,
        pixel_activation,
        pixel_residual,
        control_stats_conv,
        control_stats_activation,
        control_global_average,
        control_fcnn,
        control_mixing,
    })
}

/// Ops per output pixel with the control flow amortized over a trigger
/// period of K frames: `(pixel + control / K) / (R² · input pixels)`.
pub fn amortized_ops_per_output_pixel(
    spec: &TopologySpec,
    in_h: usize,
    in_w: usize,
    k: usize,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::contract("trigger period K must be >= 1"));
    }
    let ops = count_ops(spec, in_h, in_w)?;
    let out_px = (spec.upscale * spec.upscale * in_h * in_w) as f64;
    Ok((ops.pixel_total() + ops.control_total() / k as f64) / out_px)
}

/// `ops_per_output_pixel × out_w × out_h × fps / 10¹²`.
pub fn tops(ops_per_output_pixel: f64, out_w: usize, out_h: usize, fps: f64) -> f64 {
    ops_per_output_pixel * out_w as f64 * out_h as f64 * fps / 1e12
}

/// A stats-free, bank-free conv trunk of the same depth and taps as the
/// process network, widened until it carries at least `target_params`
/// trainable parameters. This is the dense reference an equally capable
/// conventional network would run on every frame.
#[derive(Clone, Debug, Serialize)]
pub struct DenseReference {
    pub layers: Vec<ConvLayerSpec>,
    pub upscale: usize,
    pub params: usize,
}

pub fn dense_reference(spec: &TopologySpec, target_params: usize) -> Result<DenseReference> {
    spec.validate()?;
    let depth = spec.process_layers.len();
    let taps: Vec<usize> = spec.process_layers.iter().map(|l| l.taps).collect();
    let r2 = spec.upscale * spec.upscale;
    let params_for = |w: usize| -> usize {
        let mut total = 0;
        for j in 0..depth {
            let out = if j + 1 == depth { r2 } else { w };
            let inc = if j == 0 { 1 } else { w };
            total += out * inc * taps[j] * taps[j] + out;
        }
        total
    };
    let mut width = 1usize;
    while params_for(width) < target_params {
        width += 1;
        if width > 1 << 20 {
            return Err(Error::contract("dense reference width search overflow"));
        }
    }
    let layers: Vec<ConvLayerSpec> = (0..depth)
        .map(|j| {
            let out = if j + 1 == depth { r2 } else { width };
            let act = spec.process_layers[j].activation;
            ConvLayerSpec::new(out, taps[j], act)
        })
        .collect();
    Ok(DenseReference {
        layers,
        upscale: spec.upscale,
        params: params_for(width),
    })
}

/// Per-frame ops of the dense reference at an input geometry, per output
/// pixel (same conventions as [`count_ops`]).
pub fn dense_reference_ops_per_output_pixel(
    dense: &DenseReference,
    in_h: usize,
    in_w: usize,
) -> f64 {
    let in_px = (in_h * in_w) as f64;
    let r2 = (dense.upscale * dense.upscale) as f64;
    let in_ch = |j: usize| {
        if j == 0 {
            1
        } else {
            dense.layers[j - 1].out_channels
        }
    };
    let (conv, act) = conv_stack_ops(&dense.layers, in_ch, in_px);
    let residual = 32.0 * r2 * in_px;
    (conv + act + residual) / (r2 * in_px)
}

/// Everything the `count-ops` report carries, serialized as JSON and
/// rendered as an aligned table.
#[derive(Clone, Debug, Serialize)]
pub struct OpsReport {
    pub input_height: usize,
    pub input_width: usize,
    pub output_height: usize,
    pub output_width: usize,
    pub upscale: usize,
    pub trigger_period: usize,
    pub fps: f64,
    pub params: ParamCounts,
    pub breakdown: OpsBreakdown,
    pub pixel_ops_per_output_pixel: f64,
    pub amortized_ops_per_output_pixel: f64,
    pub tops_per_second: f64,
}

pub fn ops_report(
    spec: &TopologySpec,
    in_h: usize,
    in_w: usize,
    k: usize,
    fps: f64,
) -> Result<OpsReport> {
    let params = count_params(spec)?;
    let breakdown = count_ops(spec, in_h, in_w)?;
    let out_px = (spec.upscale * spec.upscale * in_h * in_w) as f64;
    let pixel_ops_per_output_pixel = breakdown.pixel_total() / out_px;
    let amortized = amortized_ops_per_output_pixel(spec, in_h, in_w, k)?;
    let (out_h, out_w) = (spec.upscale * in_h, spec.upscale * in_w);
    Ok(OpsReport {
        input_height: in_h,
        input_width: in_w,
        output_height: out_h,
        output_width: out_w,
        upscale: spec.upscale,
        trigger_period: k,
        fps,
        params,
        breakdown,
        pixel_ops_per_output_pixel,
        amortized_ops_per_output_pixel: amortized,
        tops_per_second: tops(amortized, out_w, out_h, fps),
    })
}

impl OpsReport {
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let row = |s: &mut String, k: &str, v: String| {
            s.push_str(&format!("{k:<38} {v}\n"));
        };
        row(
            &mut s,
            "geometry",
            format!(
                "{}x{} -> {}x{} (x{}), control every {} frames, {} fps",
                self.input_height,
                self.input_width,
                self.output_height,
                self.output_width,
                self.upscale,
                self.trigger_period,
                self.fps
            ),
        );
        row(
            &mut s,
            "# parameters",
            format!(
                "{} in control flow, {} in pixel flow",
                self.params.control_flow, self.params.pixel_flow
            ),
        );
        row(
            &mut s,
            "# ops per output pixel (amortized)",
            format!("{:.1}", self.amortized_ops_per_output_pixel),
        );
        row(
            &mut s,
            "# ops per output pixel (pixel flow)",
            format!("{:.1}", self.pixel_ops_per_output_pixel),
        );
        row(
            &mut s,
            "# TOPs (10^12) per second",
            format!("{:.4}", self.tops_per_second),
        );
        s
    }
}
