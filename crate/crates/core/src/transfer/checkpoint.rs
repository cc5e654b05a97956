use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::LANDMARK_LAYOUT;
use crate::error::{Error, Result};
use crate::nn::{Dims, ModelParams, TENSOR_NAMES};
use crate::train::{LabelMap, TrainConfig};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SLRM";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER_LEN: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

impl TensorEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Where a model came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset_id: Option<String>,
    pub config: Option<TrainConfig>,
    pub best_epoch: Option<usize>,
    pub stopped_epoch: Option<usize>,
    /// Free-form metric values such as `accuracy` or `macro_f1`.
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
    /// Set when the weights were initialized from another checkpoint.
    pub transferred_from: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMetadata {
    pub dims: Dims,
    pub label_map: LabelMap,
    pub landmark_layout: String,
    pub provenance: Provenance,
    pub tensors: Vec<TensorEntry>,
}

/// A serialized model: `"SLRM"`, u32 LE version, u32 LE metadata length,
/// UTF-8 JSON metadata, then every tensor as little-endian `f32`, row-major,
/// in directory order.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub metadata: CheckpointMetadata,
    tensors: Vec<Vec<f32>>,
}

impl Checkpoint {
    /// Captures `params` at 32-bit precision.
    pub fn from_params(params: &ModelParams, label_map: LabelMap, provenance: Provenance) -> Result<Self> {
        params.validate()?;
        if label_map.len() != params.dims.num_classes {
            return Err(Error::Checkpoint(format!(
                "label map has {} classes, model outputs {}",
                label_map.len(),
                params.dims.num_classes
            )));
        }
        let tensors = params
            .slices()
            .iter()
            .map(|s| s.iter().map(|&v| v as f32).collect())
            .collect();
        let directory = TENSOR_NAMES
            .iter()
            .zip(params.dims.tensor_shapes())
            .map(|(name, shape)| TensorEntry {
                name: name.to_string(),
                shape,
            })
            .collect();
        Ok(Checkpoint {
            metadata: CheckpointMetadata {
                dims: params.dims,
                label_map,
                landmark_layout: LANDMARK_LAYOUT.to_string(),
                provenance,
                tensors: directory,
            },
            tensors,
        })
    }

    pub fn dims(&self) -> Dims {
        self.metadata.dims
    }

    pub fn label_map(&self) -> &LabelMap {
        &self.metadata.label_map
    }

    /// Raw stored values of one tensor.
    pub fn tensor(&self, name: &str) -> Option<&[f32]> {
        self.metadata
            .tensors
            .iter()
            .position(|t| t.name == name)
            .map(|i| self.tensors[i].as_slice())
    }

    pub fn params(&self) -> Result<ModelParams> {
        let flat = self
            .tensors
            .iter()
            .map(|t| t.iter().map(|&v| v as f64).collect())
            .collect();
        ModelParams::from_flat(self.metadata.dims, flat)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let json = serde_json::to_vec(&self.metadata)?;
        let payload: usize = self.tensors.iter().map(Vec::len).sum();
        let mut out = Vec::with_capacity(HEADER_LEN + json.len() + 4 * payload);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let json_len =
            u32::try_from(json.len()).map_err(|_| Error::Checkpoint("metadata larger than 4 GiB".into()))?;
        out.extend_from_slice(&json_len.to_le_bytes());
        out.extend_from_slice(&json);
        for v in self.tensors.iter().flatten() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Checkpoint(format!(
                "{} bytes is shorter than the header",
                bytes.len()
            )));
        }
        if &bytes[0..4] != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint(format!("bad magic {:?}", &bytes[0..4])));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        let version = word(4);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let json_len = word(8) as usize;
        let json_end = HEADER_LEN
            .checked_add(json_len)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("metadata length {json_len} exceeds file")))?;
        let metadata: CheckpointMetadata = serde_json::from_slice(&bytes[HEADER_LEN..json_end])
            .map_err(|e| Error::Checkpoint(format!("corrupted metadata: {e}")))?;
        validate_directory(&metadata)?;

        let payload = &bytes[json_end..];
        let expected: usize = metadata.tensors.iter().map(TensorEntry::len).sum();
        if payload.len() != expected * 4 {
            return Err(Error::Checkpoint(format!(
                "payload length mismatch: {} bytes for {expected} values",
                payload.len()
            )));
        }
        let mut values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")));
        let tensors = metadata
            .tensors
            .iter()
            .map(|t| values.by_ref().take(t.len()).collect())
            .collect();
        Ok(Checkpoint { metadata, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn validate_directory(meta: &CheckpointMetadata) -> Result<()> {
    meta.dims.validate()?;
    if meta.landmark_layout != LANDMARK_LAYOUT {
        return Err(Error::Checkpoint(format!(
            "landmark layout {:?}, expected {LANDMARK_LAYOUT:?}",
            meta.landmark_layout
        )));
    }
    if meta.label_map.len() != meta.dims.num_classes {
        return Err(Error::Checkpoint(format!(
            "label map has {} classes but dims say {}",
            meta.label_map.len(),
            meta.dims.num_classes
        )));
    }
    let expected: Vec<_> = TENSOR_NAMES.iter().zip(meta.dims.tensor_shapes()).collect();
    if meta.tensors.len() != expected.len()
        || meta
            .tensors
            .iter()
            .zip(&expected)
            .any(|(t, (name, shape))| t.name != **name || t.shape != *shape)
    {
        return Err(Error::Checkpoint("corrupted tensor directory".into()));
    }
    Ok(())
}
