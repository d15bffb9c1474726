//! Frame sources and sinks: in-memory for tests, numbered-file directories
//! (`frame_%06d.pfm` / `.png`) for runs.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{pfm, png};
use crate::tensor::Tensor;

/// Ordered frame supply with monotone indices.
pub trait FrameSource {
    /// `None` ends the stream; `Some(Err)` is a mid-stream failure.
    fn next_frame(&mut self) -> Option<Result<Tensor>>;
}

/// Receives output frames together with the generation of the weight
/// snapshot that produced each of them.
pub trait FrameSink {
    fn put(&mut self, index: usize, frame: &Tensor, generation: u64) -> Result<()>;

    fn flush(&mut self) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FrameRecord {
    pub index: usize,
    pub generation: u64,
}

pub struct MemFrameSource {
    frames: VecDeque<Tensor>,
    /// When set, the source fails after yielding this many frames.
    fail_after: Option<usize>,
    yielded: usize,
}

impl MemFrameSource {
    pub fn new(frames: Vec<Tensor>) -> Self {
        MemFrameSource {
            frames: frames.into(),
            fail_after: None,
            yielded: 0,
        }
    }

    pub fn failing_after(frames: Vec<Tensor>, fail_after: usize) -> Self {
        MemFrameSource {
            frames: frames.into(),
            fail_after: Some(fail_after),
            yielded: 0,
        }
    }
}

impl FrameSource for MemFrameSource {
    fn next_frame(&mut self) -> Option<Result<Tensor>> {
        if let Some(limit) = self.fail_after {
            if self.yielded >= limit {
                return Some(Err(Error::contract("injected source failure")));
            }
        }
        let frame = self.frames.pop_front()?;
        self.yielded += 1;
        Some(Ok(frame))
    }
}

#[derive(Default)]
pub struct MemFrameSink {
    pub frames: Vec<Tensor>,
    pub records: Vec<FrameRecord>,
}

impl MemFrameSink {
    pub fn new() -> Self {
        Self::default()
    }
}

impl FrameSink for MemFrameSink {
    fn put(&mut self, index: usize, frame: &Tensor, generation: u64) -> Result<()> {
        self.frames.push(frame.clone());
        self.records.push(FrameRecord { index, generation });
        Ok(())
    }
}

/// Reads `frame_*.pfm` / `frame_*.png` files in name order.
pub struct DirFrameSource {
    paths: VecDeque<PathBuf>,
}

impl DirFrameSource {
    pub fn open(dir: &Path) -> Result<Self> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
                name.starts_with("frame_") && (name.ends_with(".pfm") || name.ends_with(".png"))
            })
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(Error::contract(format!(
                "no frame_*.pfm or frame_*.png files in {}",
                dir.display()
            )));
        }
        Ok(DirFrameSource {
            paths: paths.into(),
        })
    }
}

impl FrameSource for DirFrameSource {
    fn next_frame(&mut self) -> Option<Result<Tensor>> {
        let path = self.paths.pop_front()?;
        let result = if path.extension().is_some_and(|e| e == "png") {
            png::read_png(&path)
        } else {
            pfm::read_pfm(&path)
        };
        Some(result)
    }
}

/// Writes `frame_%06d.pfm` (authoritative) plus a PNG preview per frame.
pub struct DirFrameSink {
    dir: PathBuf,
    write_png: bool,
    pub records: Vec<FrameRecord>,
}

impl DirFrameSink {
    pub fn create(dir: &Path, write_png: bool) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(DirFrameSink {
            dir: dir.to_path_buf(),
            write_png,
            records: Vec::new(),
        })
    }
}

impl FrameSink for DirFrameSink {
    fn put(&mut self, index: usize, frame: &Tensor, generation: u64) -> Result<()> {
        pfm::write_pfm(&self.dir.join(format!("frame_{index:06}.pfm")), frame)?;
        if self.write_png {
            png::write_png(&self.dir.join(format!("frame_{index:06}.png")), frame)?;
        }
        self.records.push(FrameRecord { index, generation });
        Ok(())
    }
}
