use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    Hand, KeypointSequence, LandmarkFrame, Manifest, SampleRecord, Split, FRAME_WIDTH, HAND_LANDMARKS,
    POSE_LEFT_SHOULDER, POSE_LEFT_WRIST, POSE_RIGHT_SHOULDER, POSE_RIGHT_WRIST,
};
use crate::error::{Error, Result};

const SHOULDERS: [[f64; 2]; 2] = [[0.35, 0.3], [0.65, 0.3]];
const DEPTH: f32 = 0.05;
const SINUSOIDS: usize = 3;
const MAX_AMPLITUDE: f64 = 0.015;
const MAX_FINGER_OFFSET: f64 = 0.04;

/// Description of a synthetic keypoint dataset.
///
/// Every class is tied to a concept; the concept's anchor is the mean hand
/// position of the class prototype. Two specs with the same anchors but
/// different seeds behave like an iconic source/target pair: different signs,
/// same places in signing space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub dataset_id: String,
    pub num_classes: usize,
    pub samples_per_class: usize,
    /// Inclusive frame-count range per sample.
    pub frames_per_sample: (usize, usize),
    pub concept_anchors: BTreeMap<String, [f64; 2]>,
    /// Concept of each class, indexed by class.
    pub class_to_concept: Vec<String>,
    pub jitter_stddev: f64,
    pub seed: u64,
    pub fps: f64,
}

/// A handful of places in signing space, all above the rest line.
pub fn default_concept_anchors() -> BTreeMap<String, [f64; 2]> {
    [
        ("anatomy", [0.50, 0.18]),
        ("sound", [0.68, 0.22]),
        ("food", [0.50, 0.32]),
        ("emotion", [0.45, 0.48]),
        ("time", [0.30, 0.50]),
        ("movement", [0.62, 0.52]),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

impl SynthSpec {
    /// Classes are dealt round-robin over the anchors in name order.
    pub fn new(
        dataset_id: impl Into<String>,
        num_classes: usize,
        samples_per_class: usize,
        concept_anchors: BTreeMap<String, [f64; 2]>,
        seed: u64,
    ) -> Self {
        let concepts: Vec<_> = concept_anchors.keys().cloned().collect();
        let class_to_concept = (0..num_classes)
            .map(|c| {
                concepts
                    .get(c % concepts.len().max(1))
                    .cloned()
                    .unwrap_or_default()
            })
            .collect();
        SynthSpec {
            dataset_id: dataset_id.into(),
            num_classes,
            samples_per_class,
            frames_per_sample: (12, 20),
            concept_anchors,
            class_to_concept,
            jitter_stddev: 0.01,
            seed,
            fps: 25.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Invalid("synthetic data needs at least 2 classes".into()));
        }
        if self.samples_per_class < 2 {
            return Err(Error::Invalid(
                "synthetic data needs at least 2 samples per class".into(),
            ));
        }
        let (lo, hi) = self.frames_per_sample;
        if lo == 0 || lo > hi {
            return Err(Error::Invalid(format!("bad frame range {lo}..={hi}")));
        }
        if !(self.jitter_stddev >= 0.0 && self.jitter_stddev.is_finite()) {
            return Err(Error::Invalid(format!("jitter stddev {}", self.jitter_stddev)));
        }
        if !self.fps.is_finite() || self.fps <= 0.0 {
            return Err(Error::Invalid(format!("fps {}", self.fps)));
        }
        for (name, &[x, y]) in &self.concept_anchors {
            if !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
                return Err(Error::Invalid(format!(
                    "anchor for concept {name:?} at ({x}, {y}) is outside the unit square"
                )));
            }
        }
        if self.class_to_concept.len() != self.num_classes {
            return Err(Error::Invalid(format!(
                "{} class concepts for {} classes",
                self.class_to_concept.len(),
                self.num_classes
            )));
        }
        if let Some(c) = self
            .class_to_concept
            .iter()
            .find(|c| !self.concept_anchors.contains_key(*c))
        {
            return Err(Error::Invalid(format!("class mapped to undefined concept {c:?}")));
        }
        Ok(())
    }

    pub fn label(&self, class: usize) -> String {
        format!("c{class:02}-{}", self.class_to_concept[class])
    }
}

struct Sinusoid {
    amplitude: f64,
    cycles: f64,
    phase: f64,
}

struct HandPrototype {
    /// Per axis (x, y), a sum of sinusoids with whole cycles over the sample.
    path: [Vec<Sinusoid>; 2],
    /// Offset of each of the 21 landmarks from the group centre (zero mean).
    offsets: Vec<[f64; 2]>,
}

impl HandPrototype {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        let mut axis = || {
            (0..SINUSOIDS)
                .map(|k| Sinusoid {
                    amplitude: rng.random_range(0.0..MAX_AMPLITUDE),
                    cycles: (k + 1) as f64,
                    phase: rng.random_range(0.0..TAU),
                })
                .collect::<Vec<_>>()
        };
        let path = [axis(), axis()];
        let mut offsets: Vec<[f64; 2]> = (0..HAND_LANDMARKS)
            .map(|_| {
                let r = rng.random_range(0.0..MAX_FINGER_OFFSET);
                let a = rng.random_range(0.0..TAU);
                [r * a.cos(), r * a.sin()]
            })
            .collect();
        let mean = offsets.iter().fold([0.0, 0.0], |m, o| [m[0] + o[0], m[1] + o[1]]);
        for o in &mut offsets {
            o[0] -= mean[0] / HAND_LANDMARKS as f64;
            o[1] -= mean[1] / HAND_LANDMARKS as f64;
        }
        HandPrototype { path, offsets }
    }

    fn centre(&self, anchor: [f64; 2], tau: f64) -> [f64; 2] {
        let eval = |s: &[Sinusoid]| {
            s.iter()
                .map(|s| s.amplitude * (TAU * s.cycles * tau + s.phase).sin())
                .sum::<f64>()
        };
        [anchor[0] + eval(&self.path[0]), anchor[1] + eval(&self.path[1])]
    }
}

/// Generates every sample of `spec` plus an all-unassigned manifest.
pub fn synth_generate(spec: &SynthSpec) -> Result<(Vec<KeypointSequence>, Manifest)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let prototypes: Vec<[HandPrototype; 2]> = (0..spec.num_classes)
        .map(|_| [HandPrototype::draw(&mut rng), HandPrototype::draw(&mut rng)])
        .collect();
    let noise = Normal::new(0.0, spec.jitter_stddev).map_err(|e| Error::Invalid(format!("jitter: {e}")))?;

    let mut seqs = Vec::with_capacity(spec.num_classes * spec.samples_per_class);
    let mut rows = Vec::with_capacity(seqs.capacity());
    for (class, hands) in prototypes.iter().enumerate() {
        let concept = &spec.class_to_concept[class];
        let anchor = spec.concept_anchors[concept];
        let label = spec.label(class);
        for i in 0..spec.samples_per_class {
            let len = rng.random_range(spec.frames_per_sample.0..=spec.frames_per_sample.1);
            let mut frames = Vec::with_capacity(len);
            for t in 0..len {
                let tau = t as f64 / len as f64;
                let mut coords = vec![DEPTH; FRAME_WIDTH];
                let mut put = |landmark: usize, xy: [f64; 2], rng: &mut ChaCha8Rng| {
                    for (axis, v) in xy.into_iter().enumerate() {
                        let jitter = if spec.jitter_stddev > 0.0 {
                            noise.sample(rng)
                        } else {
                            0.0
                        };
                        coords[landmark * 3 + axis] = (v + jitter).clamp(0.0, 1.0) as f32;
                    }
                };
                put(POSE_LEFT_SHOULDER, SHOULDERS[0], &mut rng);
                put(POSE_RIGHT_SHOULDER, SHOULDERS[1], &mut rng);
                for (hand, proto, pose_wrist) in [
                    (Hand::Left, &hands[0], POSE_LEFT_WRIST),
                    (Hand::Right, &hands[1], POSE_RIGHT_WRIST),
                ] {
                    let centre = proto.centre(anchor, tau);
                    for (j, off) in proto.offsets.iter().enumerate() {
                        put(
                            hand.start() + j,
                            [centre[0] + off[0], centre[1] + off[1]],
                            &mut rng,
                        );
                    }
                    let wrist = proto.offsets[0];
                    put(pose_wrist, [centre[0] + wrist[0], centre[1] + wrist[1]], &mut rng);
                }
                frames.push(LandmarkFrame::new(coords, [true, true])?);
            }
            let sample_id = format!("{}-{class:02}-{i:03}", spec.dataset_id);
            rows.push(SampleRecord {
                path: format!("{sample_id}.kpseq.json"),
                label: label.clone(),
                concept: Some(concept.clone()),
                split: Split::Unassigned,
            });
            seqs.push(KeypointSequence {
                sample_id,
                dataset_id: spec.dataset_id.clone(),
                label: label.clone(),
                concept: Some(concept.clone()),
                fps: spec.fps,
                frames,
            });
        }
    }
    Ok((seqs, Manifest::new(rows)?))
}

/// Generates the dataset into `dir`: one file per sample plus `manifest.csv`.
pub fn write_synth(spec: &SynthSpec, dir: impl AsRef<Path>) -> Result<Manifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (seqs, manifest) = synth_generate(spec)?;
    for (seq, row) in seqs.iter().zip(&manifest.rows) {
        seq.save(dir.join(&row.path))?;
    }
    manifest.save(dir.join("manifest.csv"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_kpseq;

    fn spec(classes: usize, per_class: usize, seed: u64) -> SynthSpec {
        SynthSpec::new("syn", classes, per_class, default_concept_anchors(), seed)
    }

    #[test]
    fn zero_jitter_makes_identical_samples_of_equal_length() {
        let mut s = spec(3, 4, 1);
        s.jitter_stddev = 0.0;
        s.frames_per_sample = (10, 10);
        let (seqs, _) = synth_generate(&s).unwrap();
        for class in seqs.chunks(4) {
            assert!(class.iter().all(|q| q.frames == class[0].frames));
        }
        assert_ne!(seqs[0].frames, seqs[4].frames);
    }

    #[test]
    fn counts_rows() {
        let (seqs, manifest) = synth_generate(&spec(5, 20, 2)).unwrap();
        assert_eq!(seqs.len(), 100);
        assert_eq!(manifest.rows.len(), 100);
        assert!(manifest.rows.iter().all(|r| r.split == Split::Unassigned));
    }

    #[test]
    fn generated_files_are_deterministic_and_valid() {
        let a = synth_generate(&spec(3, 3, 9)).unwrap().0;
        let b = synth_generate(&spec(3, 3, 9)).unwrap().0;
        for (x, y) in a.iter().zip(&b) {
            let bytes = x.to_kpseq_bytes().unwrap();
            assert_eq!(bytes, y.to_kpseq_bytes().unwrap());
            parse_kpseq(std::str::from_utf8(&bytes).unwrap()).unwrap();
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = spec(3, 3, 0);
        s.concept_anchors.insert("anatomy".into(), [1.2, 0.5]);
        assert!(synth_generate(&s).is_err());
        assert!(synth_generate(&spec(1, 3, 0)).is_err());
        assert!(synth_generate(&spec(3, 1, 0)).is_err());
        let mut s = spec(3, 3, 0);
        s.class_to_concept[0] = "nowhere".into();
        assert!(synth_generate(&s).is_err());
        let mut s = spec(3, 3, 0);
        s.jitter_stddev = -0.1;
        assert!(synth_generate(&s).is_err());
    }

    #[test]
    fn prototype_mean_is_the_anchor() {
        let mut s = spec(2, 2, 4);
        s.jitter_stddev = 0.0;
        s.frames_per_sample = (16, 16);
        let (seqs, _) = synth_generate(&s).unwrap();
        let anchor = s.concept_anchors[&s.class_to_concept[0]];
        let seq = &seqs[0];
        let mut sum = [0.0f64; 2];
        let mut n = 0.0;
        for f in &seq.frames {
            for l in Hand::Left.start()..Hand::Left.start() + HAND_LANDMARKS {
                let [x, y, _] = f.landmark(l);
                sum[0] += x as f64;
                sum[1] += y as f64;
                n += 1.0;
            }
        }
        assert!((sum[0] / n - anchor[0]).abs() < 1e-6);
        assert!((sum[1] / n - anchor[1]).abs() < 1e-6);
    }
}
