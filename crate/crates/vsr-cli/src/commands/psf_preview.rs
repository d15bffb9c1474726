//! `vsr psf-preview` — discretize a PSF at a simulation scale and emit it
//! as PFM (exact taps) plus a normalized PNG heatmap.

use std::path::PathBuf;

use serde::Deserialize;

use vsr_core::io::{pfm, png};
use vsr_core::psf::{stretch_psf, Psf};
use vsr_core::tensor::Tensor;

use crate::config::{load_config, CliError, CliResult};

#[derive(clap::Args)]
pub struct Args {
    /// JSON run-configuration document
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sigma_major: Option<f64>,
    #[arg(long)]
    sigma_minor: Option<f64>,
    /// Orientation in radians
    #[arg(long)]
    theta: Option<f64>,
    /// Simulation stretch factor S
    #[arg(long)]
    scale: Option<usize>,
    /// Output base path (writes .pfm and .png)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    sigma_major: Option<f64>,
    #[serde(default)]
    sigma_minor: Option<f64>,
    #[serde(default)]
    theta: f64,
    #[serde(default = "default_scale")]
    scale: usize,
    #[serde(default)]
    out: Option<PathBuf>,
}

fn default_scale() -> usize {
    1
}

pub fn run(args: Args) -> CliResult {
    let mut cfg = match &args.config {
        Some(path) => load_config::<FileConfig>(path)?,
        None => FileConfig {
            scale: default_scale(),
            ..Default::default()
        },
    };
    if let Some(v) = args.sigma_major {
        cfg.sigma_major = Some(v);
    }
    if let Some(v) = args.sigma_minor {
        cfg.sigma_minor = Some(v);
    }
    if let Some(v) = args.theta {
        cfg.theta = v;
    }
    if let Some(v) = args.scale {
        cfg.scale = v;
    }
    if let Some(v) = args.out {
        cfg.out = Some(v);
    }
    let sigma_major = cfg
        .sigma_major
        .ok_or_else(|| CliError::Config("psf-preview needs sigma_major".into()))?;
    let sigma_minor = cfg.sigma_minor.unwrap_or(sigma_major);
    let out = cfg.out.unwrap_or_else(|| PathBuf::from("psf_preview"));

    let psf = Psf::parametric(sigma_major, sigma_minor, cfg.theta)?;
    let kernel = stretch_psf(&psf, cfg.scale)?;
    let taps = Tensor::new(kernel.k_h, kernel.k_w, 1, kernel.weights.clone())?;

    let pfm_path = out.with_extension("pfm");
    pfm::write_pfm(&pfm_path, &taps)?;
    let peak = taps.data().iter().cloned().fold(0.0f64, f64::max);
    let png_path = out.with_extension("png");
    png::write_png(&png_path, &taps.map(|v| v / peak))?;

    eprintln!(
        "psf sigma=({sigma_major}, {sigma_minor}) theta={} at S={}: {}x{} taps",
        cfg.theta, cfg.scale, kernel.k_h, kernel.k_w
    );
    println!("{}", pfm_path.display());
    println!("{}", png_path.display());
    Ok(())
}
