//! MLP → GRU → linear classifier over keypoint frames.
//!
//! Each frame passes through one ReLU layer; a single unidirectional GRU
//! consumes the resulting features and the hidden state at the last valid
//! frame feeds a linear layer whose softmax gives class probabilities.

mod adam;
mod model;
mod ops;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use model::{backward, forward, forward_batch, ForwardCache, SequenceBatch};
pub use ops::{cross_entropy_indices, cross_entropy_loss, relu, sigmoid, softmax, softmax_rows};

use ndarray::{Array1, Array2};
use rand::distr::Uniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer sizes of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub input: usize,
    pub mlp_hidden: usize,
    pub gru_hidden: usize,
    pub num_classes: usize,
}

impl Dims {
    pub fn new(input: usize, mlp_hidden: usize, gru_hidden: usize, num_classes: usize) -> Self {
        Dims {
            input,
            mlp_hidden,
            gru_hidden,
            num_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.mlp_hidden == 0 || self.gru_hidden == 0 || self.num_classes == 0 {
            return Err(Error::Dimension(format!(
                "all layer sizes must be positive, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Shapes of every tensor, in [`TENSOR_NAMES`] order.
    pub fn tensor_shapes(&self) -> [Vec<usize>; 13] {
        let (i, m, g, k) = (self.input, self.mlp_hidden, self.gru_hidden, self.num_classes);
        [
            vec![m, i],
            vec![m],
            vec![g, m],
            vec![g, m],
            vec![g, m],
            vec![g, g],
            vec![g, g],
            vec![g, g],
            vec![g],
            vec![g],
            vec![g],
            vec![k, g],
            vec![k],
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.tensor_shapes()
            .iter()
            .map(|s| s.iter().product::<usize>())
            .sum()
    }
}

/// Tensor names in serialization order.
pub const TENSOR_NAMES: [&str; 13] = [
    "W1", "b1", "Wz", "Wr", "Wn", "Uz", "Ur", "Un", "bz", "br", "bn", "Wo", "bo",
];

/// Every learnable tensor. Matrices are `(out, in)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: Dims,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub wz: Array2<f64>,
    pub wr: Array2<f64>,
    pub wn: Array2<f64>,
    pub uz: Array2<f64>,
    pub ur: Array2<f64>,
    pub un: Array2<f64>,
    pub bz: Array1<f64>,
    pub br: Array1<f64>,
    pub bn: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
}

impl ModelParams {
    pub fn zeros(dims: Dims) -> Self {
        let (i, m, g, k) = (dims.input, dims.mlp_hidden, dims.gru_hidden, dims.num_classes);
        ModelParams {
            dims,
            w1: Array2::zeros((m, i)),
            b1: Array1::zeros(m),
            wz: Array2::zeros((g, m)),
            wr: Array2::zeros((g, m)),
            wn: Array2::zeros((g, m)),
            uz: Array2::zeros((g, g)),
            ur: Array2::zeros((g, g)),
            un: Array2::zeros((g, g)),
            bz: Array1::zeros(g),
            br: Array1::zeros(g),
            bn: Array1::zeros(g),
            wo: Array2::zeros((k, g)),
            bo: Array1::zeros(k),
        }
    }

    /// Rebuilds parameters from flat row-major buffers in [`TENSOR_NAMES`] order.
    pub fn from_flat(dims: Dims, tensors: Vec<Vec<f64>>) -> Result<Self> {
        dims.validate()?;
        let mut params = ModelParams::zeros(dims);
        if tensors.len() != TENSOR_NAMES.len() {
            return Err(Error::Dimension(format!(
                "{} tensors given, expected {}",
                tensors.len(),
                TENSOR_NAMES.len()
            )));
        }
        for ((dst, src), name) in params.slices_mut().into_iter().zip(tensors).zip(TENSOR_NAMES) {
            if dst.len() != src.len() {
                return Err(Error::Dimension(format!(
                    "tensor {name} has {} values, expected {}",
                    src.len(),
                    dst.len()
                )));
            }
            dst.copy_from_slice(&src);
        }
        Ok(params)
    }

    pub fn slices(&self) -> [&[f64]; 13] {
        fn s<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
            a.as_slice().expect("parameter tensors are contiguous")
        }
        [
            s(&self.w1),
            s(&self.b1),
            s(&self.wz),
            s(&self.wr),
            s(&self.wn),
            s(&self.uz),
            s(&self.ur),
            s(&self.un),
            s(&self.bz),
            s(&self.br),
            s(&self.bn),
            s(&self.wo),
            s(&self.bo),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 13] {
        fn s<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
            a.as_slice_mut().expect("parameter tensors are contiguous")
        }
        [
            s(&mut self.w1),
            s(&mut self.b1),
            s(&mut self.wz),
            s(&mut self.wr),
            s(&mut self.wn),
            s(&mut self.uz),
            s(&mut self.ur),
            s(&mut self.un),
            s(&mut self.bz),
            s(&mut self.br),
            s(&mut self.bn),
            s(&mut self.wo),
            s(&mut self.bo),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        for ((slice, shape), name) in self
            .slices()
            .into_iter()
            .zip(self.dims.tensor_shapes())
            .zip(TENSOR_NAMES)
        {
            if slice.len() != shape.iter().product::<usize>() {
                return Err(Error::Dimension(format!(
                    "tensor {name} does not match {shape:?}"
                )));
            }
            if slice.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(name));
            }
        }
        Ok(())
    }
}

/// Gradient of the loss with respect to every tensor of a [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub ModelParams);

impl Gradients {
    pub fn zeros(dims: Dims) -> Self {
        Gradients(ModelParams::zeros(dims))
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.0.slices_mut().into_iter().zip(other.0.slices()) {
            a.iter_mut().zip(b).for_each(|(a, b)| *a += scale * b);
        }
    }

    pub fn max_abs_diff(&self, other: &Gradients) -> f64 {
        self.0
            .slices()
            .into_iter()
            .zip(other.0.slices())
            .flat_map(|(a, b)| a.iter().zip(b).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }
}

impl std::ops::Deref for Gradients {
    type Target = ModelParams;
    fn deref(&self) -> &ModelParams {
        &self.0
    }
}

/// Glorot-uniform weights, zero biases; deterministic per seed.
pub fn init_params(dims: Dims, seed: u64) -> Result<ModelParams> {
    dims.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::zeros(dims);
    let shapes = dims.tensor_shapes();
    for (slice, shape) in params.slices_mut().into_iter().zip(shapes) {
        if let [fan_out, fan_in] = shape[..] {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound)
                .map_err(|e| Error::Invalid(format!("init bound: {e}")))?;
            slice.iter_mut().for_each(|v| *v = rng.sample(dist));
        }
    }
    Ok(params)
}
