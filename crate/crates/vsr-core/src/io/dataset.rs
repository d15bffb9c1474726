//! Dataset directory layout: `manifest.json` plus per-pair PFM tensors and
//! PNG previews.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::capture::{Provenance, TrainingPair};
use crate::error::{Error, Result};
use crate::io::{pfm, png};
use crate::psf::{Psf, PsfSamplerConfig};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    /// Upscaling ratio between label and input.
    pub r: usize,
    /// Simulation factor of the label capture.
    pub s: usize,
    pub sampler: Option<PsfSamplerConfig>,
    pub pairs: Vec<PairEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairEntry {
    pub input: String,
    pub label: String,
    pub seed: u64,
    pub provenance: Provenance,
    pub psf: Option<Psf>,
}

/// Write pairs and manifest. Pair files are numbered in input order, which
/// fixes the enumeration across platforms.
pub fn write_dataset(
    dir: &Path,
    r: usize,
    s: usize,
    sampler: Option<&PsfSamplerConfig>,
    pairs: &[TrainingPair],
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(pairs.len());
    for (i, pair) in pairs.iter().enumerate() {
        if pair.ratio != r {
            return Err(Error::contract(format!(
                "pair {i} has ratio {} but the dataset declares R={r}",
                pair.ratio
            )));
        }
        pair.validate()?;
        let input_name = format!("pair_{i:05}_input.pfm");
        let label_name = format!("pair_{i:05}_label.pfm");
        pfm::write_pfm(&dir.join(&input_name), &pair.input)?;
        pfm::write_pfm(&dir.join(&label_name), &pair.label)?;
        png::write_png(&dir.join(format!("pair_{i:05}_input.png")), &pair.input)?;
        png::write_png(&dir.join(format!("pair_{i:05}_label.png")), &pair.label)?;
        entries.push(PairEntry {
            input: input_name,
            label: label_name,
            seed: pair.seed,
            provenance: pair.provenance,
            psf: pair.psf.clone(),
        });
    }
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        r,
        s,
        sampler: sampler.cloned(),
        pairs: entries,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::format(dir.join("manifest.json"), e.to_string()))?;
    fs::write(dir.join("manifest.json"), json + "\n")
        .map_err(|e| Error::io(dir.join("manifest.json"), e))
}

/// Read a dataset back in manifest order, validating every pair against the
/// declared ratio.
pub fn read_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<TrainingPair>)> {
    let manifest_path = dir.join("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| Error::format(&manifest_path, e.to_string()))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::format(
            &manifest_path,
            format!("unsupported manifest version {}", manifest.version),
        ));
    }
    let mut pairs = Vec::with_capacity(manifest.pairs.len());
    for (i, entry) in manifest.pairs.iter().enumerate() {
        let input = pfm::read_pfm(&dir.join(&entry.input))?;
        let label = pfm::read_pfm(&dir.join(&entry.label))?;
        if label.height() != manifest.r * input.height()
            || label.width() != manifest.r * input.width()
        {
            return Err(Error::format(
                &manifest_path,
                format!(
                    "pair {i}: label {}x{} is not manifest.r={} times input {}x{}",
                    label.height(),
                    label.width(),
                    manifest.r,
                    input.height(),
                    input.width()
                ),
            ));
        }
        pairs.push(TrainingPair {
            input,
            label,
            ratio: manifest.r,
            psf: entry.psf.clone(),
            seed: entry.seed,
            provenance: entry.provenance,
        });
    }
    Ok((manifest, pairs))
}
