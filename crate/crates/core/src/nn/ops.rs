use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Probabilities are clamped to this before taking the log.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

pub fn relu(v: ArrayView1<'_, f64>) -> Array1<f64> {
    v.mapv(|x| x.max(0.0))
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Max-shifted softmax.
pub fn softmax(logits: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exp = logits.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

pub fn softmax_rows(logits: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = Array2::zeros(logits.raw_dim());
    for (src, mut dst) in logits.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
        dst.assign(&softmax(src));
    }
    out
}

/// Mean categorical cross-entropy of a batch of probability rows against one-hot rows.
pub fn cross_entropy_loss(probabilities: ArrayView2<'_, f64>, one_hot: ArrayView2<'_, f64>) -> Result<f64> {
    if probabilities.dim() != one_hot.dim() || probabilities.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "probabilities {:?} vs targets {:?}",
            probabilities.dim(),
            one_hot.dim()
        )));
    }
    let n = probabilities.nrows() as f64;
    let total: f64 = probabilities
        .iter()
        .zip(one_hot.iter())
        .filter(|(_, &y)| y != 0.0)
        .map(|(&p, &y)| -y * p.max(PROBABILITY_FLOOR).ln())
        .sum();
    Ok(total / n)
}

/// Per-sample cross-entropy when targets are given as class indices.
pub fn cross_entropy_indices(probabilities: ArrayView2<'_, f64>, targets: &[usize]) -> Result<Vec<f64>> {
    if probabilities.nrows() != targets.len() {
        return Err(Error::Dimension(format!(
            "{} probability rows for {} targets",
            probabilities.nrows(),
            targets.len()
        )));
    }
    targets
        .iter()
        .zip(probabilities.axis_iter(Axis(0)))
        .map(|(&t, row)| {
            row.get(t)
                .map(|p| -p.max(PROBABILITY_FLOOR).ln())
                .ok_or_else(|| Error::Dimension(format!("target {t} outside {} classes", row.len())))
        })
        .collect()
}
