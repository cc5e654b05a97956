use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{KeypointSequence, LandmarkFrame, FRAME_WIDTH, LANDMARK_LAYOUT};
use crate::error::{Error, Result};

pub const KPSEQ_SCHEMA: &str = "kpseq/1";

#[derive(Serialize)]
struct KpseqOut<'a> {
    schema: &'a str,
    sample_id: &'a str,
    dataset_id: &'a str,
    label: &'a str,
    concept: Option<&'a str>,
    fps: f64,
    landmark_layout: &'a str,
    presence: Vec<[bool; 2]>,
    frames: Vec<&'a [f32]>,
}

#[derive(Deserialize)]
struct KpseqIn {
    schema: String,
    sample_id: String,
    dataset_id: String,
    label: String,
    concept: Option<String>,
    fps: f64,
    landmark_layout: String,
    presence: Vec<[bool; 2]>,
    frames: Vec<Vec<f64>>,
}

/// Serializes a validated sequence to `kpseq/1` JSON (one line, trailing newline).
pub fn write_kpseq(seq: &KeypointSequence, writer: impl std::io::Write) -> Result<()> {
    seq.validate()?;
    let out = KpseqOut {
        schema: KPSEQ_SCHEMA,
        sample_id: &seq.sample_id,
        dataset_id: &seq.dataset_id,
        label: &seq.label,
        concept: seq.concept.as_deref(),
        fps: seq.fps,
        landmark_layout: LANDMARK_LAYOUT,
        presence: seq.frames.iter().map(|f| f.presence()).collect(),
        frames: seq.frames.iter().map(|f| f.coords()).collect(),
    };
    let mut writer = writer;
    serde_json::to_writer(&mut writer, &out)?;
    writer
        .write_all(b"\n")
        .map_err(|e| Error::io("<kpseq writer>", e))?;
    Ok(())
}

/// Parses and validates `kpseq/1` content.
pub fn parse_kpseq(source: &str) -> Result<KeypointSequence> {
    let raw: KpseqIn = serde_json::from_str(source)?;
    if raw.schema != KPSEQ_SCHEMA {
        return Err(Error::Schema(format!(
            "unsupported schema {:?}, expected {KPSEQ_SCHEMA:?}",
            raw.schema
        )));
    }
    if raw.landmark_layout != LANDMARK_LAYOUT {
        return Err(Error::Schema(format!(
            "unsupported landmark layout {:?}, expected {LANDMARK_LAYOUT:?}",
            raw.landmark_layout
        )));
    }
    if raw.presence.len() != raw.frames.len() {
        return Err(Error::Schema(format!(
            "{} presence entries for {} frames",
            raw.presence.len(),
            raw.frames.len()
        )));
    }
    let mut frames = Vec::with_capacity(raw.frames.len());
    for (i, (values, presence)) in raw.frames.into_iter().zip(raw.presence).enumerate() {
        if values.len() != FRAME_WIDTH {
            return Err(Error::FrameWidth {
                frame: i,
                found: values.len(),
                expected: FRAME_WIDTH,
            });
        }
        let frame = LandmarkFrame {
            coords: values.into_iter().map(|v| v as f32).collect(),
            presence,
        };
        frame.validate(i)?;
        frames.push(frame);
    }
    let seq = KeypointSequence {
        sample_id: raw.sample_id,
        dataset_id: raw.dataset_id,
        label: raw.label,
        concept: raw.concept,
        fps: raw.fps,
        frames,
    };
    seq.validate()?;
    Ok(seq)
}

pub fn read_kpseq(path: impl AsRef<Path>) -> Result<KeypointSequence> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_kpseq(&text)
}

impl KeypointSequence {
    pub fn to_kpseq_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_kpseq(self, &mut buf)?;
        Ok(buf)
    }

    /// Writes the sequence to `path`, refusing invalid sequences before touching the file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_kpseq_bytes()?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}
