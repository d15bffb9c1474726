//! `vsr grad-check` — adjoint gradients vs central finite differences on a
//! random training pair.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use vsr_core::capture::{Provenance, TrainingPair};
use vsr_core::net::{ModelParams, PrefVector};
use vsr_core::ops::Activation;
use vsr_core::synth::synthetic_scene;
use vsr_core::topology::TopologySpec;
use vsr_core::train::grad_check;

use crate::config::{load_config, CliError, CliResult};

const TOLERANCE: f64 = 1e-4;

#[derive(clap::Args)]
pub struct Args {
    /// JSON run-configuration document
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Central-difference step(s); repeat for a sweep
    #[arg(long)]
    eps: Vec<f64>,
    /// Replace every activation with identity (linear exactness mode)
    #[arg(long)]
    linear: bool,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    topology: Option<TopologySpec>,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_pair_dim")]
    pair_height: usize,
    #[serde(default = "default_pair_dim")]
    pair_width: usize,
    #[serde(default = "default_eps")]
    eps: Vec<f64>,
    #[serde(default = "default_samples")]
    samples_per_group: usize,
    #[serde(default)]
    linear_mode: bool,
    #[serde(default)]
    out: Option<PathBuf>,
}

fn default_pair_dim() -> usize {
    16
}

fn default_eps() -> Vec<f64> {
    vec![1e-5]
}

fn default_samples() -> usize {
    60
}

fn linearized(mut spec: TopologySpec) -> TopologySpec {
    for l in spec
        .stats_layers
        .iter_mut()
        .chain(spec.process_layers.iter_mut())
    {
        l.activation = Activation::Identity;
    }
    spec
}

pub fn run(args: Args) -> CliResult {
    let mut cfg = match &args.config {
        Some(path) => load_config::<FileConfig>(path)?,
        None => FileConfig {
            pair_height: default_pair_dim(),
            pair_width: default_pair_dim(),
            eps: default_eps(),
            samples_per_group: default_samples(),
            ..Default::default()
        },
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if !args.eps.is_empty() {
        cfg.eps = args.eps;
    }
    if args.linear {
        cfg.linear_mode = true;
    }
    let mut spec = cfg.topology.unwrap_or_else(TopologySpec::desk_default);
    if cfg.linear_mode {
        spec = linearized(spec);
    }
    spec.validate()?;

    let params = ModelParams::random(&spec, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let pair = TrainingPair {
        input: synthetic_scene(cfg.pair_height, cfg.pair_width, &mut rng),
        label: synthetic_scene(
            spec.upscale * cfg.pair_height,
            spec.upscale * cfg.pair_width,
            &mut rng,
        ),
        ratio: spec.upscale,
        psf: None,
        seed: cfg.seed,
        provenance: Provenance::Capture,
    };
    let prefs = PrefVector::neutral(spec.pref_dim);

    let mut reports = Vec::new();
    let mut worst: Option<(String, f64)> = None;
    for &eps in &cfg.eps {
        let report = grad_check(
            &params,
            &spec,
            &pair,
            &prefs,
            eps,
            cfg.samples_per_group,
            cfg.seed,
        )?;
        eprintln!("eps = {eps:e}");
        for group in &report.groups {
            eprintln!(
                "  {:<12} {:>4} samples  max rel err {:.3e}",
                group.name, group.samples, group.max_rel_err
            );
            if worst.as_ref().is_none_or(|(_, w)| group.max_rel_err > *w) {
                worst = Some((group.name.clone(), group.max_rel_err));
            }
        }
        reports.push((eps, report));
    }

    let out = cfg
        .out
        .unwrap_or_else(|| PathBuf::from("grad_check_report.json"));
    let json_entries: Vec<serde_json::Value> = reports
        .iter()
        .map(|(eps, report)| {
            serde_json::json!({
                "eps": eps,
                "groups": report.groups,
                "max_rel_err": report.max_rel_err(),
            })
        })
        .collect();
    let json = serde_json::to_string_pretty(&serde_json::json!({
        "tolerance": TOLERANCE,
        "linear_mode": cfg.linear_mode,
        "runs": json_entries,
    }))
    .map_err(|e| CliError::Config(format!("report serialization: {e}")))?;
    std::fs::write(&out, json + "\n")
        .map_err(|e| vsr_core::Error::io(&out, e))
        .map_err(CliError::Core)?;
    println!("{}", out.display());

    if let Some((group, max_rel_err)) = worst {
        if max_rel_err >= TOLERANCE {
            return Err(CliError::GradCheckFailed { group, max_rel_err });
        }
    }
    Ok(())
}
