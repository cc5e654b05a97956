//! Independent reference implementations and fixtures shared by the
//! integration tests. Nothing here calls the crate's forward pass or metrics.
#![allow(dead_code)]

use std::collections::HashMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slr_core::data::{synth_generate, Manifest, Split, SynthSpec};
use slr_core::nn::ModelParams;
use slr_core::{KeypointSequence, LabelMap};

fn sig(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Scalar-loop forward pass over the first `len` rows of `x`.
pub fn naive_logits(p: &ModelParams, x: &Array2<f64>, len: usize) -> Vec<f64> {
    let d = p.dims;
    let mut h = vec![0.0; d.gru_hidden];
    for t in 0..len {
        let m: Vec<f64> = (0..d.mlp_hidden)
            .map(|j| {
                let a = p.b1[j] + (0..d.input).map(|i| p.w1[[j, i]] * x[[t, i]]).sum::<f64>();
                a.max(0.0)
            })
            .collect();
        let gate = |w: &Array2<f64>, u: &Array2<f64>, b: &ndarray::Array1<f64>, hh: &[f64], k: usize| {
            b[k] + (0..d.mlp_hidden).map(|j| w[[k, j]] * m[j]).sum::<f64>()
                + (0..d.gru_hidden).map(|j| u[[k, j]] * hh[j]).sum::<f64>()
        };
        let z: Vec<f64> = (0..d.gru_hidden)
            .map(|k| sig(gate(&p.wz, &p.uz, &p.bz, &h, k)))
            .collect();
        let r: Vec<f64> = (0..d.gru_hidden)
            .map(|k| sig(gate(&p.wr, &p.ur, &p.br, &h, k)))
            .collect();
        let rh: Vec<f64> = r.iter().zip(&h).map(|(a, b)| a * b).collect();
        let n: Vec<f64> = (0..d.gru_hidden)
            .map(|k| gate(&p.wn, &p.un, &p.bn, &rh, k).tanh())
            .collect();
        h = (0..d.gru_hidden)
            .map(|k| (1.0 - z[k]) * n[k] + z[k] * h[k])
            .collect();
    }
    (0..d.num_classes)
        .map(|c| p.bo[c] + (0..d.gru_hidden).map(|k| p.wo[[c, k]] * h[k]).sum::<f64>())
        .collect()
}

/// Mean cross-entropy of the naive forward pass.
pub fn naive_loss(p: &ModelParams, seqs: &[Array2<f64>], targets: &[usize]) -> f64 {
    let mut total = 0.0;
    for (x, &t) in seqs.iter().zip(targets) {
        let logits = naive_logits(p, x, x.nrows());
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = logits.iter().map(|v| (v - max).exp()).sum();
        total -= (logits[t] - max) - denom.ln();
    }
    total / seqs.len() as f64
}

pub fn random_seq(rng: &mut ChaCha8Rng, frames: usize, width: usize) -> Array2<f64> {
    Array2::from_shape_fn((frames, width), |_| rng.random_range(-1.0..1.0))
}

/// Per-class precision and recall counted directly from (truth, predicted) pairs.
pub struct BruteMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
}

pub fn brute_metrics(pairs: &[(usize, usize)], k: usize) -> BruteMetrics {
    let n = pairs.len() as f64;
    let correct = pairs.iter().filter(|(t, p)| t == p).count() as f64;
    let mut f1_sum = 0.0;
    for c in 0..k {
        let tp = pairs.iter().filter(|&&(t, p)| t == c && p == c).count() as f64;
        let predicted = pairs.iter().filter(|&&(_, p)| p == c).count() as f64;
        let actual = pairs.iter().filter(|&&(t, _)| t == c).count() as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if actual > 0.0 { tp / actual } else { 0.0 };
        if precision + recall > 0.0 {
            f1_sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    BruteMetrics {
        accuracy: correct / n * 100.0,
        macro_f1: f1_sum / k as f64 * 100.0,
    }
}

/// Random confusion matrix with at least one entry, as counts and expanded pairs.
pub fn random_confusion(rng: &mut ChaCha8Rng) -> (Vec<Vec<u64>>, Vec<(usize, usize)>) {
    loop {
        let k = rng.random_range(1..=6);
        let sparse = rng.random_bool(0.3);
        let counts: Vec<Vec<u64>> = (0..k)
            .map(|_| {
                (0..k)
                    .map(|_| {
                        if sparse && rng.random_bool(0.6) {
                            0
                        } else {
                            rng.random_range(0..15)
                        }
                    })
                    .collect()
            })
            .collect();
        let mut pairs = Vec::new();
        for (t, row) in counts.iter().enumerate() {
            for (p, &c) in row.iter().enumerate() {
                pairs.extend(std::iter::repeat_n((t, p), c as usize));
            }
        }
        if !pairs.is_empty() {
            return (counts, pairs);
        }
    }
}

pub fn label_map(seqs: &[KeypointSequence]) -> LabelMap {
    LabelMap::from_labels(seqs.iter().map(|s| s.label.clone()))
}

/// Partitions generated sequences according to a split manifest.
pub fn partition(
    seqs: &[KeypointSequence],
    manifest: &Manifest,
) -> (Vec<KeypointSequence>, Vec<KeypointSequence>) {
    let by_path: HashMap<&str, Split> = manifest.rows.iter().map(|r| (r.path.as_str(), r.split)).collect();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for s in seqs {
        match by_path[format!("{}.kpseq.json", s.sample_id).as_str()] {
            Split::Train => train.push(s.clone()),
            _ => test.push(s.clone()),
        }
    }
    (train, test)
}

pub fn synth(spec: &SynthSpec) -> Vec<KeypointSequence> {
    synth_generate(spec).expect("valid spec").0
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
