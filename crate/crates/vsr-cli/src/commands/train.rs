//! `vsr train` — train on a dataset directory, write a checkpoint and the
//! loss trace.

use std::io::Write;
use std::path::PathBuf;

use serde::Deserialize;

use vsr_core::io::dataset::read_dataset;
use vsr_core::io::weights::save_model;
use vsr_core::net::{ModelParams, PrefVector};
use vsr_core::topology::TopologySpec;
use vsr_core::train::{evaluate, train, LossKind, Optimizer, TrainConfig};

use crate::config::{load_config, CliError, CliResult};

#[derive(clap::Args)]
pub struct Args {
    /// JSON run-configuration document
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dataset directory (from `vsr datagen`)
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Checkpoint base path (writes .json + .bin)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    dataset: Option<PathBuf>,
    out: Option<PathBuf>,
    /// Loss-trace CSV; defaults to `<out>_trace.csv`.
    #[serde(default)]
    trace_out: Option<PathBuf>,
    /// Topology; defaults to the desk-scale topology at the dataset's R.
    #[serde(default)]
    topology: Option<TopologySpec>,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_lr")]
    learning_rate: f64,
    #[serde(default = "default_steps")]
    steps: usize,
    #[serde(default = "default_batch")]
    batch_size: usize,
    #[serde(default = "default_optimizer")]
    optimizer: Optimizer,
    #[serde(default = "default_loss")]
    loss: LossKind,
    /// Report train-set PSNR vs the bicubic baseline after training.
    #[serde(default = "default_true")]
    eval_after: bool,
}

fn default_lr() -> f64 {
    1e-3
}

fn default_steps() -> usize {
    500
}

fn default_batch() -> usize {
    8
}

fn default_optimizer() -> Optimizer {
    Optimizer::adam()
}

fn default_loss() -> LossKind {
    LossKind::L2
}

fn default_true() -> bool {
    true
}

impl Default for FileConfig {
    fn default() -> Self {
        FileConfig {
            dataset: None,
            out: None,
            trace_out: None,
            topology: None,
            seed: 0,
            learning_rate: default_lr(),
            steps: default_steps(),
            batch_size: default_batch(),
            optimizer: default_optimizer(),
            loss: default_loss(),
            eval_after: true,
        }
    }
}

pub fn run(args: Args) -> CliResult {
    let mut cfg = match &args.config {
        Some(path) => load_config::<FileConfig>(path)?,
        None => FileConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(dataset) = args.dataset {
        cfg.dataset = Some(dataset);
    }
    if let Some(out) = args.out {
        cfg.out = Some(out);
    }
    if let Some(steps) = args.steps {
        cfg.steps = steps;
    }
    if let Some(lr) = args.learning_rate {
        cfg.learning_rate = lr;
    }
    if let Some(batch) = args.batch_size {
        cfg.batch_size = batch;
    }
    let dataset_dir = cfg
        .dataset
        .ok_or_else(|| CliError::Config("train needs a dataset directory".into()))?;
    let out = cfg
        .out
        .ok_or_else(|| CliError::Config("train needs a checkpoint base path (out)".into()))?;
    let trace_out = cfg.trace_out.unwrap_or_else(|| {
        let mut name = out
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "checkpoint".into());
        name.push_str("_trace.csv");
        out.with_file_name(name)
    });

    let (manifest, pairs) = read_dataset(&dataset_dir)?;
    let spec = match cfg.topology {
        Some(spec) => spec,
        None => TopologySpec::desk_default_for(manifest.r),
    };
    spec.validate()?;
    if spec.upscale != manifest.r {
        return Err(CliError::Config(format!(
            "topology upscales by {}, dataset ratio is {}",
            spec.upscale, manifest.r
        )));
    }

    let train_cfg = TrainConfig {
        learning_rate: cfg.learning_rate,
        steps: cfg.steps,
        batch_size: cfg.batch_size,
        optimizer: cfg.optimizer,
        seed: cfg.seed,
        loss: cfg.loss,
    };
    eprintln!(
        "training {} pairs for {} steps (batch {}, lr {})",
        pairs.len(),
        train_cfg.steps,
        train_cfg.batch_size,
        train_cfg.learning_rate
    );
    let params = ModelParams::init(&spec, cfg.seed)?;
    let outcome = train(&pairs, params, &spec, &train_cfg)?;

    let mut csv = String::from("step,loss\n");
    for (step, loss) in outcome.trace.iter().enumerate() {
        csv.push_str(&format!("{step},{loss}\n"));
    }
    let mut file = std::fs::File::create(&trace_out)
        .map_err(|e| vsr_core::Error::io(&trace_out, e))
        .map_err(CliError::Core)?;
    file.write_all(csv.as_bytes())
        .map_err(|e| vsr_core::Error::io(&trace_out, e))
        .map_err(CliError::Core)?;

    let (json_path, _) = save_model(&out, &outcome.params, &spec, 0)?;

    if let (Some(first), Some(last)) = (outcome.trace.first(), outcome.trace.last()) {
        eprintln!("loss {first:.6} -> {last:.6}");
    }
    if cfg.eval_after {
        let report = evaluate(
            &outcome.params,
            &spec,
            &pairs,
            &PrefVector::neutral(spec.pref_dim),
        )?;
        eprintln!(
            "train-set PSNR: model {:.2} dB vs bicubic {:.2} dB",
            report.mean_model_psnr, report.mean_bicubic_psnr
        );
    }
    println!("{}", json_path.display());
    println!("{}", trace_out.display());
    Ok(())
}
