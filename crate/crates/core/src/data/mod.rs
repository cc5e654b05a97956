//! Keypoint sequences and everything needed to get them on and off disk.

mod filter;
mod kpseq;
mod manifest;
mod split;
mod synth;

pub use filter::{filter_frames, keeps_frame, DEFAULT_WRIST_THRESHOLD};
pub use kpseq::{parse_kpseq, read_kpseq, write_kpseq, KPSEQ_SCHEMA};
pub use manifest::{Manifest, SampleRecord, Split, MANIFEST_HEADER};
pub use split::split_manifest;
pub use synth::{default_concept_anchors, synth_generate, write_synth, SynthSpec};

use crate::error::{Error, Result};

/// Layout identifier written into every `kpseq/1` file.
pub const LANDMARK_LAYOUT: &str = "holistic46/1";
pub const LANDMARK_COUNT: usize = 46;
pub const FRAME_WIDTH: usize = LANDMARK_COUNT * 3;
pub const HAND_LANDMARKS: usize = 21;

pub const POSE_LEFT_SHOULDER: usize = 0;
pub const POSE_RIGHT_SHOULDER: usize = 1;
pub const POSE_LEFT_WRIST: usize = 2;
pub const POSE_RIGHT_WRIST: usize = 3;
pub const LEFT_HAND_START: usize = 4;
pub const RIGHT_HAND_START: usize = LEFT_HAND_START + HAND_LANDMARKS;

/// Which hand a landmark belongs to, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub fn start(self) -> usize {
        match self {
            Hand::Left => LEFT_HAND_START,
            Hand::Right => RIGHT_HAND_START,
        }
    }

    fn presence_index(self) -> usize {
        match self {
            Hand::Left => 0,
            Hand::Right => 1,
        }
    }

    pub fn of_landmark(landmark: usize) -> Option<Hand> {
        if (LEFT_HAND_START..RIGHT_HAND_START).contains(&landmark) {
            Some(Hand::Left)
        } else if (RIGHT_HAND_START..LANDMARK_COUNT).contains(&landmark) {
            Some(Hand::Right)
        } else {
            None
        }
    }
}

/// One video frame: 46 landmarks × (x, y, z) plus per-hand detection flags.
///
/// Indices 0–3 are the pose shoulders and wrists, 4–24 the left hand and
/// 25–45 the right hand. An undetected hand is all zeros with its flag false.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkFrame {
    coords: Vec<f32>,
    presence: [bool; 2],
}

impl LandmarkFrame {
    pub fn new(coords: Vec<f32>, presence: [bool; 2]) -> Result<Self> {
        let frame = LandmarkFrame { coords, presence };
        frame.validate(0)?;
        Ok(frame)
    }

    /// Builds a frame and zero-fills any hand whose flag is false.
    pub fn with_zeroed_hands(mut coords: Vec<f32>, presence: [bool; 2]) -> Result<Self> {
        if coords.len() == FRAME_WIDTH {
            for hand in [Hand::Left, Hand::Right] {
                if !presence[hand.presence_index()] {
                    let start = hand.start() * 3;
                    coords[start..start + HAND_LANDMARKS * 3].fill(0.0);
                }
            }
        }
        Self::new(coords, presence)
    }

    pub fn coords(&self) -> &[f32] {
        &self.coords
    }

    pub fn presence(&self) -> [bool; 2] {
        self.presence
    }

    pub fn hand_detected(&self, hand: Hand) -> bool {
        self.presence[hand.presence_index()]
    }

    /// Whether a landmark carries a real detection (pose landmarks always do).
    pub fn landmark_detected(&self, landmark: usize) -> bool {
        Hand::of_landmark(landmark).is_none_or(|hand| self.hand_detected(hand))
    }

    pub fn landmark(&self, landmark: usize) -> [f32; 3] {
        let i = landmark * 3;
        [self.coords[i], self.coords[i + 1], self.coords[i + 2]]
    }

    pub(crate) fn validate(&self, frame: usize) -> Result<()> {
        if self.coords.len() != FRAME_WIDTH {
            return Err(Error::FrameWidth {
                frame,
                found: self.coords.len(),
                expected: FRAME_WIDTH,
            });
        }
        for landmark in 0..LANDMARK_COUNT {
            let [x, y, z] = self.landmark(landmark);
            if !(x.is_finite() && y.is_finite() && z.is_finite()) {
                return Err(Error::Schema(format!(
                    "frame {frame} landmark {landmark} has a non-finite coordinate"
                )));
            }
            if self.landmark_detected(landmark) {
                for (axis, value) in [('x', x), ('y', y)] {
                    if !(0.0..=1.0).contains(&value) {
                        return Err(Error::CoordinateRange {
                            frame,
                            landmark,
                            axis,
                            value: value as f64,
                        });
                    }
                }
            } else if x != 0.0 || y != 0.0 || z != 0.0 {
                return Err(Error::Schema(format!(
                    "frame {frame} landmark {landmark} belongs to an undetected hand but is not zero"
                )));
            }
        }
        Ok(())
    }
}

/// One isolated sign sample.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSequence {
    pub sample_id: String,
    pub dataset_id: String,
    pub label: String,
    pub concept: Option<String>,
    pub fps: f64,
    pub frames: Vec<LandmarkFrame>,
}

impl KeypointSequence {
    pub fn validate(&self) -> Result<()> {
        if self.sample_id.is_empty() {
            return Err(Error::Schema("sample_id is empty".into()));
        }
        if self.label.is_empty() {
            return Err(Error::Schema(format!(
                "sample {} has an empty label",
                self.sample_id
            )));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Schema(format!(
                "sample {} has non-positive fps {}",
                self.sample_id, self.fps
            )));
        }
        if self.frames.is_empty() {
            return Err(Error::Schema(format!("sample {} has no frames", self.sample_id)));
        }
        for (i, frame) in self.frames.iter().enumerate() {
            frame.validate(i)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}
