use super::{KeypointSequence, LandmarkFrame, POSE_LEFT_WRIST, POSE_RIGHT_WRIST};
use crate::error::{Error, Result};

/// Wrist height below which a frame counts as active signing.
pub const DEFAULT_WRIST_THRESHOLD: f64 = 0.6;

/// True when either pose wrist is above the rest line, i.e. its y is below `threshold`.
pub fn keeps_frame(frame: &LandmarkFrame, threshold: f64) -> bool {
    let left = frame.landmark(POSE_LEFT_WRIST)[1] as f64;
    let right = frame.landmark(POSE_RIGHT_WRIST)[1] as f64;
    left.min(right) < threshold
}

/// Drops rest frames, keeping frame order and presence flags.
///
/// Uses the pose wrists rather than hand landmark 0 because hands are often
/// undetected while resting.
pub fn filter_frames(seq: &KeypointSequence, threshold: f64) -> Result<KeypointSequence> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Invalid(format!(
            "filter threshold {threshold} outside (0, 1]"
        )));
    }
    let frames: Vec<_> = seq
        .frames
        .iter()
        .filter(|f| keeps_frame(f, threshold))
        .cloned()
        .collect();
    if frames.is_empty() {
        return Err(Error::EmptyAfterFilter {
            sample_id: seq.sample_id.clone(),
        });
    }
    Ok(KeypointSequence {
        frames,
        ..seq.clone()
    })
}
