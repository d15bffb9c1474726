//! `vsr infer` — upscale a frame directory with the dual-rate pipeline.

use std::path::PathBuf;

use serde::Deserialize;

use vsr_core::io::weights::load_model;
use vsr_core::net::PrefVector;
use vsr_core::runtime::{
    run_pipeline, DirFrameSink, DirFrameSource, ExecMode, SchedulerConfig, Trigger,
};

use crate::config::{load_config, CliError, CliResult};

#[derive(clap::Args)]
pub struct Args {
    /// JSON run-configuration document
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint base path (as written by `vsr train`)
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Directory of input frames (frame_*.pfm / frame_*.png)
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Configuration-flow trigger period in frames
    #[arg(long)]
    k: Option<usize>,
    /// Execution mode: interleaved | concurrent
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    checkpoint: Option<PathBuf>,
    frames: Option<PathBuf>,
    out: Option<PathBuf>,
    #[serde(default)]
    trigger: Option<TriggerConfig>,
    #[serde(default = "default_fps")]
    fps: f64,
    #[serde(default)]
    prefs: Option<Vec<f64>>,
    #[serde(default)]
    config_latency_frames: usize,
    #[serde(default)]
    mode: Option<String>,
    #[serde(default = "default_true")]
    png_previews: bool,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum TriggerConfig {
    EveryKFrames(usize),
    EveryTMillis(f64),
}

fn default_fps() -> f64 {
    30.0
}

fn default_true() -> bool {
    true
}

fn parse_mode(s: &str) -> CliResult<ExecMode> {
    match s {
        "interleaved" => Ok(ExecMode::Interleaved),
        "concurrent" => Ok(ExecMode::Concurrent),
        other => Err(CliError::Config(format!(
            "mode must be interleaved or concurrent, got {other}"
        ))),
    }
}

pub fn run(args: Args) -> CliResult {
    let mut cfg = match &args.config {
        Some(path) => load_config::<FileConfig>(path)?,
        None => FileConfig::default(),
    };
    if let Some(v) = args.checkpoint {
        cfg.checkpoint = Some(v);
    }
    if let Some(v) = args.frames {
        cfg.frames = Some(v);
    }
    if let Some(v) = args.out {
        cfg.out = Some(v);
    }
    if let Some(k) = args.k {
        cfg.trigger = Some(TriggerConfig::EveryKFrames(k));
    }
    if let Some(m) = args.mode {
        cfg.mode = Some(m);
    }
    let checkpoint = cfg
        .checkpoint
        .ok_or_else(|| CliError::Config("infer needs a checkpoint".into()))?;
    let frames = cfg
        .frames
        .ok_or_else(|| CliError::Config("infer needs a frames directory".into()))?;
    let out = cfg
        .out
        .ok_or_else(|| CliError::Config("infer needs an output directory".into()))?;

    let (params, spec, _) = load_model(&checkpoint)?;
    let prefs = match cfg.prefs {
        Some(values) => PrefVector::new(values)?,
        None => PrefVector::neutral(spec.pref_dim),
    };
    let sched = SchedulerConfig {
        trigger: match cfg.trigger {
            Some(TriggerConfig::EveryKFrames(k)) => Trigger::EveryKFrames(k),
            Some(TriggerConfig::EveryTMillis(t)) => Trigger::EveryTMillis(t),
            None => Trigger::EveryKFrames(10),
        },
        prefs,
        fps: cfg.fps,
        config_latency_frames: cfg.config_latency_frames,
        mode: match cfg.mode.as_deref() {
            Some(m) => parse_mode(m)?,
            None => ExecMode::Concurrent,
        },
    };

    let mut source = DirFrameSource::open(&frames)?;
    let mut sink = DirFrameSink::create(&out, cfg.png_previews)?;
    let report = run_pipeline(&mut source, &params, &spec, &sched, &mut sink)?;

    let report_path = out.join("report.json");
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Config(format!("report serialization: {e}")))?;
    std::fs::write(&report_path, json + "\n")
        .map_err(|e| vsr_core::Error::io(&report_path, e))
        .map_err(CliError::Core)?;

    eprintln!(
        "{} frames, {} configuration invocations (K={}, {:?})",
        report.frames, report.config_invocations, report.trigger_period, report.mode
    );
    println!("{}", out.display());
    println!("{}", report_path.display());
    Ok(())
}
