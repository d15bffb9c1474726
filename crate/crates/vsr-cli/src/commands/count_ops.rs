//! `vsr count-ops` — parameter/ops accounting and the published-figure
//! cross-check.

use std::path::PathBuf;

use serde::Deserialize;

use vsr_core::accounting::{
    dense_reference, dense_reference_ops_per_output_pixel, ops_report, tops,
};
use vsr_core::topology::TopologySpec;

use crate::config::{load_config, CliError, CliResult};

#[derive(clap::Args)]
pub struct Args {
    /// JSON run-configuration document
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report JSON output path
    #[arg(long)]
    json: Option<PathBuf>,
    /// Trigger period K
    #[arg(long)]
    k: Option<usize>,
    /// Cross-check the published 1080p@30 TOPs figures
    #[arg(long)]
    published_check: bool,
    /// Also report the dense-reference comparison
    #[arg(long)]
    dense: bool,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    topology: Option<TopologySpec>,
    #[serde(default = "default_h")]
    input_height: usize,
    #[serde(default = "default_w")]
    input_width: usize,
    #[serde(default = "default_k")]
    trigger_period: usize,
    #[serde(default = "default_fps")]
    fps: f64,
    #[serde(default)]
    out: Option<PathBuf>,
}

fn default_h() -> usize {
    270
}

fn default_w() -> usize {
    320
}

fn default_k() -> usize {
    10
}

fn default_fps() -> f64 {
    30.0
}

pub fn run(args: Args) -> CliResult {
    let mut cfg = match &args.config {
        Some(path) => load_config::<FileConfig>(path)?,
        None => FileConfig {
            input_height: default_h(),
            input_width: default_w(),
            trigger_period: default_k(),
            fps: default_fps(),
            ..Default::default()
        },
    };
    if let Some(k) = args.k {
        cfg.trigger_period = k;
    }
    if let Some(json) = args.json {
        cfg.out = Some(json);
    }
    let spec = cfg.topology.unwrap_or_else(TopologySpec::desk_default);
    let report = ops_report(
        &spec,
        cfg.input_height,
        cfg.input_width,
        cfg.trigger_period,
        cfg.fps,
    )?;
    eprint!("{}", report.render_table());

    if args.dense {
        let total = report.params.pixel_flow + report.params.control_flow;
        let dense = dense_reference(&spec, total)?;
        let dense_ops =
            dense_reference_ops_per_output_pixel(&dense, cfg.input_height, cfg.input_width);
        eprintln!(
            "dense reference ({} params): {:.1} ops/output pixel, {:.1}x the amortized cost",
            dense.params,
            dense_ops,
            dense_ops / report.amortized_ops_per_output_pixel
        );
    }

    if args.published_check {
        // Published figures: 9,574 and 345,328 ops/output pixel at 1080p30
        // must reproduce 0.397 and 14.3 TOPs within 0.5%.
        for (ops, want) in [(9_574.0, 0.397), (345_328.0, 14.3)] {
            let got = tops(ops, 1280, 1080, 30.0);
            let rel = (got - want).abs() / want;
            eprintln!(
                "tops({ops:.0}, 1280x1080@30) = {got:.4} vs published {want} ({}, {:.3}% off)",
                if rel < 0.005 { "PASS" } else { "FAIL" },
                rel * 100.0
            );
            if rel >= 0.005 {
                return Err(CliError::Config(
                    "published-figure cross-check failed".into(),
                ));
            }
        }
    }

    let out = cfg.out.unwrap_or_else(|| PathBuf::from("ops_report.json"));
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Config(format!("report serialization: {e}")))?;
    std::fs::write(&out, json + "\n")
        .map_err(|e| vsr_core::Error::io(&out, e))
        .map_err(CliError::Core)?;
    println!("{}", out.display());
    Ok(())
}
