//! Dual-rate pipeline: the pixel flow upscales every frame, the
//! configuration flow recomputes process weights every K frames and hands
//! them over through an atomic snapshot cell.
//!
//! Time is frame-indexed. A snapshot triggered at frame t becomes visible
//! at frame t + `config_latency_frames` (the initial configuration is
//! always synchronous so there is no cold start). The concurrent mode
//! computes configurations on a worker thread but honors the same
//! visibility schedule, so both modes produce identical frames.

mod frames;
mod snapshot;

pub use frames::{
    DirFrameSink, DirFrameSource, FrameRecord, FrameSink, FrameSource, MemFrameSink,
    MemFrameSource,
};
pub use snapshot::SnapshotCell;

use std::collections::VecDeque;
use std::sync::mpsc;
use std::sync::{Arc, Condvar, Mutex};

use serde::Serialize;

use crate::accounting;
use crate::color::{rgb_to_ycbcr, ycbcr_to_rgb};
use crate::error::{Error, Result};
use crate::net::{mix_weights, process_forward, stats_forward, ModelParams, PrefVector, ProcessWeights};
use crate::ops::{bicubic_resize, Scale};
use crate::tensor::Tensor;
use crate::topology::TopologySpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    EveryKFrames(usize),
    EveryTMillis(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    /// Single-threaded, configuration inlined at trigger frames. The
    /// deterministic reference.
    Interleaved,
    /// Configuration flow on a worker thread, handover through the
    /// snapshot cell.
    Concurrent,
}

#[derive(Clone, Debug)]
pub struct SchedulerConfig {
    pub trigger: Trigger,
    pub prefs: PrefVector,
    /// Declared frame rate; maps millisecond triggers onto frame counts.
    pub fps: f64,
    /// Artificial configuration latency in frames (0 = a trigger's weights
    /// are ready for the trigger frame itself).
    pub config_latency_frames: usize,
    pub mode: ExecMode,
}

impl SchedulerConfig {
    pub fn every_k(k: usize, prefs: PrefVector) -> Self {
        SchedulerConfig {
            trigger: Trigger::EveryKFrames(k),
            prefs,
            fps: 30.0,
            config_latency_frames: 0,
            mode: ExecMode::Concurrent,
        }
    }

    /// Trigger period in frames.
    pub fn effective_period(&self) -> Result<usize> {
        match self.trigger {
            Trigger::EveryKFrames(k) => {
                if k == 0 {
                    return Err(Error::contract("trigger period K must be >= 1"));
                }
                Ok(k)
            }
            Trigger::EveryTMillis(t) => {
                if !(t > 0.0) {
                    return Err(Error::contract("trigger interval T must be > 0"));
                }
                if !(self.fps > 0.0) {
                    return Err(Error::contract("fps must be positive"));
                }
                Ok(((t * self.fps / 1000.0).round() as usize).max(1))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunOps {
    pub pixel_ops_per_frame: f64,
    pub control_ops_per_trigger: f64,
    pub amortized_ops_per_output_pixel: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub frames: usize,
    pub config_invocations: usize,
    pub trigger_period: usize,
    pub config_latency_frames: usize,
    pub mode: ExecMode,
    pub frame_log: Vec<FrameRecord>,
    pub ops: Option<RunOps>,
}

/// One configuration-flow pass: statistics from the luma frame, then the
/// weight engine. The snapshot carries `generation`.
fn config_flow(
    luma: &Tensor,
    params: &ModelParams,
    prefs: &PrefVector,
    spec: &TopologySpec,
    generation: u64,
) -> Result<ProcessWeights> {
    let stats = stats_forward(luma, &params.stats, spec)?;
    mix_weights(&stats, prefs, &params.fcnn, &params.bank, spec, generation)
}

/// Pixel-flow pass: luma through the process network, chroma upscaled
/// bicubically, recombined.
fn pixel_flow(frame: &Tensor, weights: &ProcessWeights, spec: &TopologySpec) -> Result<Tensor> {
    match frame.channels() {
        1 => process_forward(frame, weights, spec),
        3 => {
            let ycc = rgb_to_ycbcr(frame)?;
            let y = process_forward(&ycc.channel(0)?, weights, spec)?;
            let scale = Scale::up(spec.upscale as u32);
            let cb = bicubic_resize(&ycc.channel(1)?, scale)?;
            let cr = bicubic_resize(&ycc.channel(2)?, scale)?;
            ycbcr_to_rgb(&Tensor::concat_channels(&[&y, &cb, &cr])?)
        }
        n => Err(Error::contract(format!(
            "pipeline frames must have 1 or 3 channels, got {n}"
        ))),
    }
}

fn frame_luma(frame: &Tensor) -> Result<Tensor> {
    crate::color::luma(frame)
}

/// Generation visible at frame `t`: the initial configuration plus every
/// later trigger whose latency has elapsed.
fn expected_generation(t: usize, k: usize, latency: usize) -> u64 {
    let mut g = 1u64;
    if t >= k + latency {
        g += ((t - latency) / k) as u64;
    }
    g
}

/// Run the dual-rate pipeline over a frame source. Every output frame uses
/// exactly one complete snapshot; the report logs the generation per frame
/// and the number of configuration invocations.
pub fn run_pipeline(
    source: &mut dyn FrameSource,
    params: &ModelParams,
    spec: &TopologySpec,
    sched: &SchedulerConfig,
    sink: &mut dyn FrameSink,
) -> Result<RunReport> {
    spec.validate()?;
    params.validate(spec)?;
    if sched.prefs.len() != spec.pref_dim {
        return Err(Error::contract(format!(
            "scheduler preferences have {} components, topology expects {}",
            sched.prefs.len(),
            spec.pref_dim
        )));
    }
    let k = sched.effective_period()?;
    match sched.mode {
        ExecMode::Interleaved => run_interleaved(source, params, spec, sched, k, sink),
        ExecMode::Concurrent => run_concurrent(source, params, spec, sched, k, sink),
    }
}

struct RunState {
    frames: usize,
    config_invocations: usize,
    frame_log: Vec<FrameRecord>,
    first_dims: Option<(usize, usize)>,
}

impl RunState {
    fn new() -> Self {
        RunState {
            frames: 0,
            config_invocations: 0,
            frame_log: Vec::new(),
            first_dims: None,
        }
    }

    fn report(self, spec: &TopologySpec, sched: &SchedulerConfig, k: usize) -> RunReport {
        let ops = self.first_dims.map(|(h, w)| {
            let breakdown = accounting::count_ops(spec, h, w).expect("validated spec");
            RunOps {
                pixel_ops_per_frame: breakdown.pixel_total(),
                control_ops_per_trigger: breakdown.control_total(),
                amortized_ops_per_output_pixel:
                    accounting::amortized_ops_per_output_pixel(spec, h, w, k)
                        .expect("validated spec"),
            }
        });
        RunReport {
            frames: self.frames,
            config_invocations: self.config_invocations,
            trigger_period: k,
            config_latency_frames: sched.config_latency_frames,
            mode: sched.mode,
            frame_log: self.frame_log,
            ops,
        }
    }
}

fn emit_frame(
    frame: &Tensor,
    snap: &ProcessWeights,
    spec: &TopologySpec,
    sink: &mut dyn FrameSink,
    state: &mut RunState,
) -> Result<()> {
    // no-tearing assertion on the snapshot actually used
    if !snap.verify() {
        return Err(Error::contract("pipeline observed a torn weight snapshot"));
    }
    let out = pixel_flow(frame, snap, spec)?;
    sink.put(state.frames, &out, snap.generation())?;
    state.frame_log.push(FrameRecord {
        index: state.frames,
        generation: snap.generation(),
    });
    state.frames += 1;
    Ok(())
}

fn source_failed(
    state: RunState,
    spec: &TopologySpec,
    sched: &SchedulerConfig,
    k: usize,
    sink: &mut dyn FrameSink,
    reason: String,
) -> Result<RunReport> {
    sink.flush()?;
    let report = state.report(spec, sched, k);
    Err(Error::SourceFailed {
        frames_emitted: report.frames,
        reason,
    })
}

fn run_interleaved(
    source: &mut dyn FrameSource,
    params: &ModelParams,
    spec: &TopologySpec,
    sched: &SchedulerConfig,
    k: usize,
    sink: &mut dyn FrameSink,
) -> Result<RunReport> {
    let cell = SnapshotCell::new();
    let mut pending: VecDeque<(usize, Arc<ProcessWeights>)> = VecDeque::new();
    let mut state = RunState::new();
    let mut generation = 0u64;

    loop {
        let frame = match source.next_frame() {
            None => break,
            Some(Err(e)) => {
                return source_failed(state, spec, sched, k, sink, e.to_string());
            }
            Some(Ok(f)) => f,
        };
        let t = state.frames;
        if state.first_dims.is_none() {
            state.first_dims = Some((frame.height(), frame.width()));
        }
        if t % k == 0 {
            generation += 1;
            let snap = Arc::new(config_flow(
                &frame_luma(&frame)?,
                params,
                &sched.prefs,
                spec,
                generation,
            )?);
            state.config_invocations += 1;
            let due = if t == 0 {
                0
            } else {
                t + sched.config_latency_frames
            };
            pending.push_back((due, snap));
        }
        while pending.front().is_some_and(|(due, _)| *due <= t) {
            let (_, snap) = pending.pop_front().unwrap();
            cell.publish(snap)?;
        }
        let snap = cell
            .current()
            .expect("frame 0 triggers the initial configuration");
        emit_frame(&frame, &snap, spec, sink, &mut state)?;
    }
    sink.flush()?;
    Ok(state.report(spec, sched, k))
}

/// Frame-indexed virtual clock shared by the pixel thread and the
/// configuration worker.
struct FrameClock {
    inner: Mutex<(usize, bool)>,
    cond: Condvar,
}

impl FrameClock {
    fn new() -> Self {
        FrameClock {
            inner: Mutex::new((0, false)),
            cond: Condvar::new(),
        }
    }

    fn advance(&self, t: usize) {
        let mut inner = self.inner.lock().unwrap();
        inner.0 = inner.0.max(t);
        self.cond.notify_all();
    }

    fn close(&self) {
        self.inner.lock().unwrap().1 = true;
        self.cond.notify_all();
    }

    /// True when frame `due` has started; false when the run ended first.
    fn wait_until(&self, due: usize) -> bool {
        let mut inner = self.inner.lock().unwrap();
        loop {
            if inner.0 >= due {
                return true;
            }
            if inner.1 {
                return false;
            }
            inner = self.cond.wait(inner).unwrap();
        }
    }
}

struct ConfigJob {
    luma: Tensor,
    generation: u64,
    due: usize,
}

fn run_concurrent(
    source: &mut dyn FrameSource,
    params: &ModelParams,
    spec: &TopologySpec,
    sched: &SchedulerConfig,
    k: usize,
    sink: &mut dyn FrameSink,
) -> Result<RunReport> {
    let cell = SnapshotCell::new();
    let clock = FrameClock::new();
    let (job_tx, job_rx) = mpsc::channel::<ConfigJob>();

    std::thread::scope(|scope| -> Result<RunReport> {
        let worker = {
            let cell = &cell;
            let clock = &clock;
            let prefs = &sched.prefs;
            scope.spawn(move || -> Result<()> {
                while let Ok(job) = job_rx.recv() {
                    let snap = match config_flow(&job.luma, params, prefs, spec, job.generation) {
                        Ok(s) => Arc::new(s),
                        Err(e) => {
                            cell.poison();
                            return Err(e);
                        }
                    };
                    if !clock.wait_until(job.due) {
                        return Ok(()); // run ended before this snapshot was due
                    }
                    if let Err(e) = cell.publish(snap) {
                        cell.poison();
                        return Err(e);
                    }
                }
                Ok(())
            })
        };

        let mut state = RunState::new();
        // The loop must not return before the channel is dropped and the
        // clock closed, or the worker (and with it the scope) never exits.
        let mut run_loop = |state: &mut RunState| -> Result<Option<String>> {
            let mut generation = 0u64;
            loop {
                let frame = match source.next_frame() {
                    None => return Ok(None),
                    Some(Err(e)) => return Ok(Some(e.to_string())),
                    Some(Ok(f)) => f,
                };
                let t = state.frames;
                if state.first_dims.is_none() {
                    state.first_dims = Some((frame.height(), frame.width()));
                }
                if t % k == 0 {
                    generation += 1;
                    let due = if t == 0 {
                        0
                    } else {
                        t + sched.config_latency_frames
                    };
                    state.config_invocations += 1;
                    let job = ConfigJob {
                        luma: frame_luma(&frame)?,
                        generation,
                        due,
                    };
                    if job_tx.send(job).is_err() {
                        return Ok(None); // worker died; its join reports the cause
                    }
                }
                clock.advance(t);
                let expected = expected_generation(t, k, sched.config_latency_frames);
                let snap = match cell.wait_min_generation(expected) {
                    Ok(s) => s,
                    Err(_) => return Ok(None), // poisoned; worker error surfaces below
                };
                emit_frame(&frame, &snap, spec, sink, state)?;
            }
        };
        let loop_result = run_loop(&mut state);
        drop(job_tx);
        clock.close();
        let worker_result = worker.join().expect("configuration worker panicked");
        worker_result?;
        let stream_error = loop_result?;
        if let Some(reason) = stream_error {
            return source_failed(state, spec, sched, k, sink, reason);
        }
        sink.flush()?;
        Ok(state.report(spec, sched, k))
    })
}
