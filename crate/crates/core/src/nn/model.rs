use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use super::ops::{sigmoid, softmax_rows};
use super::{Dims, Gradients, ModelParams};
use crate::error::{Error, Result};

/// Variable-length sequences laid out time-major and zero-padded.
///
/// `steps[t]` is a `batch × input` matrix; row `b` is zero once `t` reaches
/// `lengths[b]`. Padded steps never influence that row's output.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch {
    pub steps: Vec<Array2<f64>>,
    pub lengths: Vec<usize>,
}

impl SequenceBatch {
    /// Batches whole sequences (`frames × input` each).
    pub fn from_sequences(seqs: &[ArrayView2<'_, f64>]) -> Result<Self> {
        let lengths: Vec<usize> = seqs.iter().map(|s| s.nrows()).collect();
        Self::with_lengths(seqs, &lengths)
    }

    /// Batches sequences of which only the first `lengths[b]` frames are valid.
    pub fn with_lengths(seqs: &[ArrayView2<'_, f64>], lengths: &[usize]) -> Result<Self> {
        if seqs.is_empty() {
            return Err(Error::Invalid("empty batch".into()));
        }
        if seqs.len() != lengths.len() {
            return Err(Error::Dimension(format!(
                "{} sequences with {} lengths",
                seqs.len(),
                lengths.len()
            )));
        }
        let width = seqs[0].ncols();
        for (s, &len) in seqs.iter().zip(lengths) {
            if s.ncols() != width {
                return Err(Error::Dimension(format!(
                    "mixed frame widths {} and {width} in one batch",
                    s.ncols()
                )));
            }
            if len == 0 || len > s.nrows() {
                return Err(Error::Invalid(format!(
                    "valid length {len} for a sequence of {} frames",
                    s.nrows()
                )));
            }
        }
        let max_len = lengths.iter().copied().max().unwrap_or(0);
        let steps = (0..max_len)
            .map(|t| {
                let mut x = Array2::zeros((seqs.len(), width));
                for (b, (s, &len)) in seqs.iter().zip(lengths).enumerate() {
                    if t < len {
                        x.row_mut(b).assign(&s.row(t));
                    }
                }
                x
            })
            .collect();
        Ok(SequenceBatch {
            steps,
            lengths: lengths.to_vec(),
        })
    }

    pub fn batch_size(&self) -> usize {
        self.lengths.len()
    }

    pub fn input_width(&self) -> usize {
        self.steps.first().map_or(0, |x| x.ncols())
    }
}

#[derive(Debug, Clone)]
struct StepCache {
    x: Array2<f64>,
    a1: Array2<f64>,
    m: Array2<f64>,
    h_prev: Array2<f64>,
    z: Array2<f64>,
    r: Array2<f64>,
    n: Array2<f64>,
    active: Vec<bool>,
}

/// Intermediates of one forward pass, consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    dims: Dims,
    steps: Vec<StepCache>,
    h_final: Array2<f64>,
    logits: Array2<f64>,
}

impl ForwardCache {
    pub fn logits(&self) -> &Array2<f64> {
        &self.logits
    }

    pub fn batch_size(&self) -> usize {
        self.logits.nrows()
    }

    /// Hidden state read by the classifier head, one row per sample.
    pub fn final_hidden(&self) -> &Array2<f64> {
        &self.h_final
    }
}

fn check_finite(a: &Array2<f64>, name: &'static str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name))
    }
}

/// `x · wᵀ + b`, one row per sample.
fn affine(x: &Array2<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut out = x.dot(&w.t());
    out += b;
    out
}

/// Runs the network over a batch and returns `batch × classes` logits.
pub fn forward_batch(params: &ModelParams, batch: &SequenceBatch) -> Result<(Array2<f64>, ForwardCache)> {
    let dims = params.dims;
    if batch.input_width() != dims.input {
        return Err(Error::Dimension(format!(
            "frame width {} but the model expects {}",
            batch.input_width(),
            dims.input
        )));
    }
    let b = batch.batch_size();
    let mut h = Array2::<f64>::zeros((b, dims.gru_hidden));
    let mut steps = Vec::with_capacity(batch.steps.len());
    for (t, x) in batch.steps.iter().enumerate() {
        let active: Vec<bool> = batch.lengths.iter().map(|&len| t < len).collect();

        let a1 = affine(x, &params.w1, &params.b1);
        let m = a1.mapv(|v| v.max(0.0));
        check_finite(&a1, "mlp activation")?;

        let mut z = affine(&m, &params.wz, &params.bz);
        general_mat_mul(1.0, &h, &params.uz.t(), 1.0, &mut z);
        z.mapv_inplace(sigmoid);

        let mut r = affine(&m, &params.wr, &params.br);
        general_mat_mul(1.0, &h, &params.ur.t(), 1.0, &mut r);
        r.mapv_inplace(sigmoid);

        let rh = &r * &h;
        let mut n = affine(&m, &params.wn, &params.bn);
        general_mat_mul(1.0, &rh, &params.un.t(), 1.0, &mut n);
        n.mapv_inplace(f64::tanh);

        let mut h_new = Array2::zeros(h.raw_dim());
        Zip::from(&mut h_new)
            .and(&z)
            .and(&n)
            .and(&h)
            .for_each(|out, &z, &n, &h| *out = (1.0 - z) * n + z * h);
        for (row, &on) in active.iter().enumerate() {
            if !on {
                h_new.row_mut(row).assign(&h.row(row));
            }
        }
        check_finite(&h_new, "gru hidden state")?;

        steps.push(StepCache {
            x: x.clone(),
            a1,
            m,
            h_prev: h,
            z,
            r,
            n,
            active,
        });
        h = h_new;
    }
    let logits = affine(&h, &params.wo, &params.bo);
    check_finite(&logits, "logits")?;
    let cache = ForwardCache {
        dims,
        steps,
        h_final: h,
        logits: logits.clone(),
    };
    Ok((logits, cache))
}

/// Single-sequence forward pass over the first `valid_length` frames.
pub fn forward(
    params: &ModelParams,
    seq: ArrayView2<'_, f64>,
    valid_length: usize,
) -> Result<(Array1<f64>, ForwardCache)> {
    let batch = SequenceBatch::with_lengths(&[seq], &[valid_length])?;
    let (logits, cache) = forward_batch(params, &batch)?;
    Ok((logits.row(0).to_owned(), cache))
}

/// Gradient of the mean softmax cross-entropy over the cached batch,
/// backpropagated through time over each sample's valid frames.
pub fn backward(params: &ModelParams, cache: &ForwardCache, targets: &[usize]) -> Result<Gradients> {
    let dims = params.dims;
    if cache.dims != dims {
        return Err(Error::Dimension(format!(
            "cache built for {:?}, parameters are {dims:?}",
            cache.dims
        )));
    }
    let b = cache.batch_size();
    if targets.len() != b {
        return Err(Error::Dimension(format!(
            "{} targets for a batch of {b}",
            targets.len()
        )));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= dims.num_classes) {
        return Err(Error::Dimension(format!(
            "target {t} outside {} classes",
            dims.num_classes
        )));
    }

    let mut grads = Gradients::zeros(dims);
    let g = &mut grads.0;

    let mut dlogits = softmax_rows(cache.logits.view());
    for (row, &t) in targets.iter().enumerate() {
        dlogits[[row, t]] -= 1.0;
    }
    dlogits /= b as f64;
    general_mat_mul(1.0, &dlogits.t(), &cache.h_final, 0.0, &mut g.wo);
    g.bo = dlogits.sum_axis(Axis(0));

    let mut dh = dlogits.dot(&params.wo);
    for step in cache.steps.iter().rev() {
        // Inactive rows pass their gradient straight to the previous step.
        let mut dh_step = dh.clone();
        let mut dh_prev = dh;
        for (row, &on) in step.active.iter().enumerate() {
            if on {
                dh_prev.row_mut(row).fill(0.0);
            } else {
                dh_step.row_mut(row).fill(0.0);
            }
        }

        let mut dn_pre = Array2::zeros(dh_step.raw_dim());
        let mut dz_pre = Array2::zeros(dh_step.raw_dim());
        Zip::from(&mut dn_pre)
            .and(&mut dz_pre)
            .and(&dh_step)
            .and(&step.z)
            .and(&step.n)
            .and(&step.h_prev)
            .for_each(|dn_pre, dz_pre, &dh, &z, &n, &hp| {
                *dn_pre = dh * (1.0 - z) * (1.0 - n * n);
                *dz_pre = dh * (hp - n) * z * (1.0 - z);
            });
        Zip::from(&mut dh_prev)
            .and(&dh_step)
            .and(&step.z)
            .for_each(|dh_prev, &dh, &z| *dh_prev += dh * z);

        // n = tanh(Wn m + Un (r ⊙ h_prev) + bn)
        let d_rh = dn_pre.dot(&params.un);
        let mut dr_pre = Array2::zeros(d_rh.raw_dim());
        Zip::from(&mut dr_pre)
            .and(&mut dh_prev)
            .and(&d_rh)
            .and(&step.r)
            .and(&step.h_prev)
            .for_each(|dr_pre, dh_prev, &d_rh, &r, &hp| {
                *dr_pre = d_rh * hp * r * (1.0 - r);
                *dh_prev += d_rh * r;
            });

        let rh = &step.r * &step.h_prev;
        general_mat_mul(1.0, &dn_pre.t(), &step.m, 1.0, &mut g.wn);
        general_mat_mul(1.0, &dn_pre.t(), &rh, 1.0, &mut g.un);
        g.bn += &dn_pre.sum_axis(Axis(0));
        general_mat_mul(1.0, &dz_pre.t(), &step.m, 1.0, &mut g.wz);
        general_mat_mul(1.0, &dz_pre.t(), &step.h_prev, 1.0, &mut g.uz);
        g.bz += &dz_pre.sum_axis(Axis(0));
        general_mat_mul(1.0, &dr_pre.t(), &step.m, 1.0, &mut g.wr);
        general_mat_mul(1.0, &dr_pre.t(), &step.h_prev, 1.0, &mut g.ur);
        g.br += &dr_pre.sum_axis(Axis(0));

        general_mat_mul(1.0, &dz_pre, &params.uz, 1.0, &mut dh_prev);
        general_mat_mul(1.0, &dr_pre, &params.ur, 1.0, &mut dh_prev);

        let mut dm = dn_pre.dot(&params.wn);
        general_mat_mul(1.0, &dz_pre, &params.wz, 1.0, &mut dm);
        general_mat_mul(1.0, &dr_pre, &params.wr, 1.0, &mut dm);
        Zip::from(&mut dm).and(&step.a1).for_each(|d, &a| {
            if a <= 0.0 {
                *d = 0.0
            }
        });
        general_mat_mul(1.0, &dm.t(), &step.x, 1.0, &mut g.w1);
        g.b1 += &dm.sum_axis(Axis(0));

        dh = dh_prev;
    }
    Ok(grads)
}
