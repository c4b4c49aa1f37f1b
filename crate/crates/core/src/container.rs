//! Binary container for models and datasets: a JSON manifest (format
//! version, metadata, tensor names/shapes/offsets) followed by raw
//! little-endian `f32` arrays in manifest order.
//!
//! File layout:
//!
//! ```text
//! bytes 0..4   magic "LTSC"
//! bytes 4..8   u32 LE manifest length in bytes
//! ...          manifest JSON
//! ...          tensor data, f32 LE, concatenated in manifest order
//! ```
//!
//! Offsets in the manifest are byte offsets into the data section. All
//! writes go through a temp-file-then-rename so readers never observe a
//! partial file.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arch::ArchConfig;
use crate::error::{Error, Result};
use crate::model::{build_model, ModelState};

const MAGIC: &[u8; 4] = b"LTSC";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the data section.
    pub offset: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    /// "model" or "dataset".
    pub kind: String,
    /// Kind-specific metadata.
    pub meta: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
}

/// Metadata block stored with model checkpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelMeta {
    pub arch: ArchConfig,
    pub in_channels: usize,
    pub n_classes: usize,
    pub seed: u64,
}

/// An owned tensor read back from a container.
#[derive(Debug, Clone)]
pub struct OwnedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

/// Write `bytes` to `path` atomically (temp file in the same directory,
/// then rename).
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "container".into()),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Serialize a container to bytes.
pub fn encode_container(kind: &str, meta: &serde_json::Value, tensors: &[(String, Vec<usize>, &[f32])]) -> Result<Vec<u8>> {
    let mut entries = Vec::with_capacity(tensors.len());
    let mut offset = 0u64;
    for (name, shape, data) in tensors {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::Format(format!(
                "tensor '{name}' has {} values but shape {shape:?}",
                data.len()
            )));
        }
        entries.push(TensorEntry { name: name.clone(), shape: shape.clone(), offset });
        offset += (data.len() * 4) as u64;
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        kind: kind.to_string(),
        meta: meta.clone(),
        tensors: entries,
    };
    let manifest_bytes = serde_json::to_vec(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    let mut out = Vec::with_capacity(8 + manifest_bytes.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(manifest_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&manifest_bytes);
    for (_, _, data) in tensors {
        for v in *data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parse a container from bytes.
pub fn decode_container(bytes: &[u8]) -> Result<(Manifest, Vec<OwnedTensor>)> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a container file (bad magic)".into()));
    }
    let mlen = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
    if bytes.len() < 8 + mlen {
        return Err(Error::Format("truncated manifest".into()));
    }
    let manifest: Manifest =
        serde_json::from_slice(&bytes[8..8 + mlen]).map_err(|e| Error::Format(format!("manifest: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {} (this build reads {FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    let data = &bytes[8 + mlen..];
    let mut tensors = Vec::with_capacity(manifest.tensors.len());
    for entry in &manifest.tensors {
        let n = entry.shape.iter().product::<usize>();
        let start = entry.offset as usize;
        let end = start + n * 4;
        if end > data.len() {
            return Err(Error::Format(format!("tensor '{}' runs past end of file", entry.name)));
        }
        let mut values = Vec::with_capacity(n);
        for chunk in data[start..end].chunks_exact(4) {
            values.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]));
        }
        tensors.push(OwnedTensor { name: entry.name.clone(), shape: entry.shape.clone(), data: values });
    }
    Ok((manifest, tensors))
}

/// Save a model checkpoint.
pub fn save_model(model: &ModelState, path: &Path) -> Result<()> {
    let meta = ModelMeta {
        arch: model.arch.clone(),
        in_channels: model.in_channels,
        n_classes: model.n_classes,
        seed: model.seed,
    };
    let meta = serde_json::to_value(&meta).map_err(|e| Error::Format(e.to_string()))?;
    let named = model.named_tensors();
    let tensors: Vec<(String, Vec<usize>, &[f32])> =
        named.into_iter().map(|t| (t.name, t.shape, t.data)).collect();
    let bytes = encode_container("model", &meta, &tensors)?;
    atomic_write(path, &bytes)
}

/// Load a model checkpoint. The architecture skeleton is rebuilt from the
/// stored config, then every tensor is overwritten from the file; the load
/// fails if any expected tensor is missing or misshapen.
pub fn load_model(path: &Path) -> Result<ModelState> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (manifest, tensors) = decode_container(&bytes)?;
    if manifest.kind != "model" {
        return Err(Error::Format(format!("expected a model container, found kind '{}'", manifest.kind)));
    }
    let meta: ModelMeta = serde_json::from_value(manifest.meta).map_err(|e| Error::Format(format!("model meta: {e}")))?;
    let mut model = build_model(&meta.arch, meta.in_channels, meta.n_classes, meta.seed)?;
    let expected = model.named_tensors().len();
    if tensors.len() != expected {
        return Err(Error::Format(format!(
            "checkpoint has {} tensors, architecture expects {expected}",
            tensors.len()
        )));
    }
    for t in tensors {
        let target = model
            .tensor_mut(&t.name)
            .ok_or_else(|| Error::Format(format!("unknown tensor '{}' in checkpoint", t.name)))?;
        if target.len() != t.data.len() {
            return Err(Error::Format(format!(
                "tensor '{}' has {} values, architecture expects {}",
                t.name,
                t.data.len(),
                target.len()
            )));
        }
        *target = t.data;
    }
    Ok(model)
}
