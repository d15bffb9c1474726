//! Checkpoint format: a JSON manifest (topology, named tensor table,
//! generation counter) next to a single little-endian f32 blob holding
//! every parameter in manifest order. Offsets are byte positions into the
//! blob. Save → load → save reproduces both files byte-identically.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::ModelParams;
use crate::topology::TopologySpec;

pub const WEIGHTS_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsManifest {
    pub version: u32,
    pub generation: u64,
    pub topology: TopologySpec,
    pub blob: String,
    pub tensors: Vec<TensorRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: u64,
    /// Byte length in the blob.
    pub len: u64,
}

/// `base` is extension-free; writes `base.json` and `base.bin`.
pub fn save_model(
    base: &Path,
    params: &ModelParams,
    spec: &TopologySpec,
    generation: u64,
) -> Result<(PathBuf, PathBuf)> {
    params.validate(spec)?;
    let json_path = base.with_extension("json");
    let bin_path = base.with_extension("bin");

    let flat = params.to_flat();
    let mut blob = Vec::with_capacity(flat.len() * 4);
    for v in &flat {
        blob.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    let tensors = params
        .tensor_entries()
        .into_iter()
        .map(|e| TensorRecord {
            name: e.name,
            shape: e.shape,
            offset: (e.offset * 4) as u64,
            len: (e.len * 4) as u64,
        })
        .collect();
    let manifest = WeightsManifest {
        version: WEIGHTS_VERSION,
        generation,
        topology: spec.clone(),
        blob: bin_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "weights.bin".into()),
        tensors,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::format(&json_path, e.to_string()))?;
    fs::write(&json_path, json + "\n").map_err(|e| Error::io(&json_path, e))?;
    fs::write(&bin_path, blob).map_err(|e| Error::io(&bin_path, e))?;
    Ok((json_path, bin_path))
}

/// Load a checkpoint saved by [`save_model`]; `base` may be the bare stem
/// or either of the two file paths.
pub fn load_model(base: &Path) -> Result<(ModelParams, TopologySpec, u64)> {
    let json_path = base.with_extension("json");
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let manifest: WeightsManifest =
        serde_json::from_str(&text).map_err(|e| Error::format(&json_path, e.to_string()))?;
    if manifest.version != WEIGHTS_VERSION {
        return Err(Error::format(
            &json_path,
            format!("unsupported weights version {}", manifest.version),
        ));
    }
    manifest.topology.validate()?;
    let bin_path = json_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&manifest.blob);
    let blob = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;

    let zero = ModelParams::zeros(&manifest.topology)?;
    let expected = zero.num_params() * 4;
    if blob.len() != expected {
        return Err(Error::format(
            &bin_path,
            format!("blob holds {} bytes, topology needs {expected}", blob.len()),
        ));
    }
    // cross-check the tensor table against the canonical layout
    let entries = zero.tensor_entries();
    if entries.len() != manifest.tensors.len() {
        return Err(Error::format(&json_path, "tensor table length mismatch"));
    }
    for (e, rec) in entries.iter().zip(&manifest.tensors) {
        if e.name != rec.name
            || e.shape != rec.shape
            || (e.offset * 4) as u64 != rec.offset
            || (e.len * 4) as u64 != rec.len
        {
            return Err(Error::format(
                &json_path,
                format!("tensor record {} does not match the topology layout", rec.name),
            ));
        }
    }
    let mut flat = Vec::with_capacity(blob.len() / 4);
    for chunk in blob.chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::format(&bin_path, "non-finite parameter"));
        }
        flat.push(v as f64);
    }
    let params = ModelParams::from_flat(&manifest.topology, &flat)?;
    Ok((params, manifest.topology, manifest.generation))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let spec = TopologySpec::tiny(2);
        let params = ModelParams::random(&spec, 77).unwrap();
        let base = dir.path().join("ckpt");
        save_model(&base, &params, &spec, 3).unwrap();
        let (loaded, spec2, generation) = load_model(&base).unwrap();
        assert_eq!(spec2, spec);
        assert_eq!(generation, 3);
        let base2 = dir.path().join("ckpt2");
        save_model(&base2, &loaded, &spec2, generation).unwrap();
        assert_eq!(
            fs::read(base.with_extension("bin")).unwrap(),
            fs::read(base2.with_extension("bin")).unwrap()
        );
        let a = fs::read_to_string(base.with_extension("json")).unwrap();
        let b = fs::read_to_string(base2.with_extension("json")).unwrap();
        assert_eq!(a.replace("ckpt2", "ckpt"), b.replace("ckpt2", "ckpt"));
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let spec = TopologySpec::tiny(2);
        let params = ModelParams::random(&spec, 1).unwrap();
        let base = dir.path().join("ckpt");
        save_model(&base, &params, &spec, 1).unwrap();
        let bin = base.with_extension("bin");
        let bytes = fs::read(&bin).unwrap();
        fs::write(&bin, &bytes[..bytes.len() - 4]).unwrap();
        assert!(load_model(&base).is_err());
    }
}
