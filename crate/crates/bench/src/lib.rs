//! Fixtures shared by the benchmarks.

use ndarray::Array2;
use slr_core::data::{default_concept_anchors, synth_generate};
use slr_core::nn::{init_params, SequenceBatch};
use slr_core::{Dataset, Dims, LabelMap, ModelParams, SynthSpec};

/// Parameters plus a batch of `batch` sequences of `frames` frames with
/// deterministic pseudo-random contents.
pub fn batch_fixture(dims: Dims, batch: usize, frames: usize) -> (ModelParams, SequenceBatch, Vec<usize>) {
    let params = init_params(dims, 7).expect("valid dims");
    let seqs: Vec<Array2<f64>> = (0..batch)
        .map(|b| {
            Array2::from_shape_fn((frames, dims.input), |(t, i)| {
                ((b * 31 + t * 7 + i) % 97) as f64 / 97.0
            })
        })
        .collect();
    let views: Vec<_> = seqs.iter().map(|s| s.view()).collect();
    let batch_data = SequenceBatch::from_sequences(&views).expect("non-empty batch");
    let targets = (0..batch).map(|b| b % dims.num_classes).collect();
    (params, batch_data, targets)
}

/// Synthetic training set of `classes × per_class` samples.
pub fn synthetic_dataset(classes: usize, per_class: usize) -> Dataset {
    let spec = SynthSpec::new("bench", classes, per_class, default_concept_anchors(), 1);
    let (seqs, _) = synth_generate(&spec).expect("valid spec");
    let labels = LabelMap::from_labels(seqs.iter().map(|s| s.label.clone()));
    Dataset::from_sequences(&seqs, labels).expect("consistent labels")
}
