//! Trained generators on disk: a JSON manifest describing the architecture,
//! observation model and tensor layout, next to a payload of little-endian
//! `f64` values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diffcore::{DenseArray, ParamSet};
use crate::error::{Error, Result};
use crate::generator::{GeneratorParams, GeneratorSpec};
use crate::obsmodels::{ObservationModel, ResponseScale};
use crate::pointproc::Domain2D;

pub const CHECKPOINT_FORMAT: &str = "gps-checkpoint";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset into the payload, in values.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub format: String,
    pub version: u32,
    pub generator: GeneratorSpec,
    pub model: ObservationModel,
    /// Response scale applied during training (Gaussian-linear only).
    pub response_scale: Option<f64>,
    /// Spatial domain of an intensity fit.
    pub domain: Option<Domain2D>,
    /// Payload file name, relative to the manifest.
    pub payload: String,
    pub payload_values: usize,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub manifest: CheckpointManifest,
    pub params: GeneratorParams,
}

impl Checkpoint {
    pub fn new(
        params: GeneratorParams,
        spec: GeneratorSpec,
        model: ObservationModel,
        response_scale: Option<ResponseScale>,
        domain: Option<Domain2D>,
        payload: &str,
    ) -> Result<Self> {
        params.check_layout(&spec)?;
        model.check_output_dim(spec.out_dim)?;
        let mut tensors = Vec::new();
        let mut offset = 0;
        for (name, value) in params.params.iter() {
            tensors.push(TensorEntry {
                name: name.clone(),
                shape: value.shape().to_vec(),
                offset,
            });
            offset += value.len();
        }
        Ok(Self {
            manifest: CheckpointManifest {
                format: CHECKPOINT_FORMAT.into(),
                version: VERSION,
                generator: spec,
                model,
                response_scale: response_scale.map(|s| s.scale),
                domain,
                payload: payload.into(),
                payload_values: offset,
                tensors,
            },
            params,
        })
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.manifest.generator
    }

    pub fn model(&self) -> &ObservationModel {
        &self.manifest.model
    }

    pub fn response_scale(&self) -> Option<ResponseScale> {
        self.manifest.response_scale.map(|scale| ResponseScale { scale })
    }
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<(String, Vec<u8>)> {
    let mut manifest = serde_json::to_string_pretty(&ckpt.manifest)?;
    manifest.push('\n');
    let mut payload = Vec::with_capacity(8 * ckpt.manifest.payload_values);
    for entry in &ckpt.manifest.tensors {
        let t = ckpt
            .params
            .params
            .get(&entry.name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {}", entry.name)))?;
        for v in t.data() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok((manifest, payload))
}

pub fn decode_checkpoint(manifest: &str, payload: &[u8]) -> Result<Checkpoint> {
    let manifest: CheckpointManifest =
        serde_json::from_str(manifest).map_err(|e| Error::Checkpoint(format!("manifest: {e}")))?;
    if manifest.format != CHECKPOINT_FORMAT || manifest.version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format {:?} version {}",
            manifest.format, manifest.version
        )));
    }
    manifest.generator.validate()?;
    manifest.model.check_output_dim(manifest.generator.out_dim)?;
    if let Some(s) = manifest.response_scale {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Checkpoint(format!("response scale {s} must be positive")));
        }
    }
    let expected = manifest
        .payload_values
        .checked_mul(8)
        .ok_or_else(|| Error::Checkpoint("payload size overflows".into()))?;
    if payload.len() != expected {
        return Err(Error::Checkpoint(format!(
            "payload holds {} bytes, manifest declares {expected}",
            payload.len()
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let mut params = ParamSet::new();
    for entry in &manifest.tensors {
        let len = entry
            .shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::Checkpoint(format!("tensor {} shape overflows", entry.name)))?;
        let end = entry
            .offset
            .checked_add(len)
            .filter(|&e| e <= values.len())
            .ok_or_else(|| Error::Checkpoint(format!("tensor {} exceeds the payload", entry.name)))?;
        if params.get(&entry.name).is_some() {
            return Err(Error::Checkpoint(format!("duplicate tensor {}", entry.name)));
        }
        let data = values[entry.offset..end].to_vec();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint(format!("tensor {} has non-finite values", entry.name)));
        }
        params.insert(entry.name.clone(), DenseArray::new(entry.shape.clone(), data)?);
    }
    let params = GeneratorParams { params };
    params
        .check_layout(&manifest.generator)
        .map_err(|e| Error::Checkpoint(format!("tensor layout: {e}")))?;
    Ok(Checkpoint { manifest, params })
}

/// Writes `<dir>/checkpoint.json` and its payload; returns the manifest path.
pub fn write_checkpoint(dir: &Path, ckpt: &Checkpoint) -> Result<PathBuf> {
    let (manifest, payload) = encode_checkpoint(ckpt)?;
    super::write_atomic(&dir.join(&ckpt.manifest.payload), &payload)?;
    let path = dir.join("checkpoint.json");
    super::write_atomic(&path, manifest.as_bytes())?;
    Ok(path)
}

pub fn read_checkpoint(manifest_path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(manifest_path)?;
    let head: CheckpointManifest =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("manifest: {e}")))?;
    if head.payload.contains(['/', '\\']) || head.payload.starts_with('.') {
        return Err(Error::Checkpoint(format!("payload name {:?} must be a plain file name", head.payload)));
    }
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let payload = std::fs::read(dir.join(&head.payload))?;
    decode_checkpoint(&text, &payload)
}
