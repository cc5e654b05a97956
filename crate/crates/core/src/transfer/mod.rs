//! Checkpoints and weight-initialization transfer between tasks.
//!
//! A source model's MLP layer (optionally its GRU too) seeds a target model;
//! everything else, the classifier head in particular, starts fresh because
//! source and target rarely share a class count.

mod checkpoint;

pub use checkpoint::{
    Checkpoint, CheckpointMetadata, Provenance, TensorEntry, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{init_params, Dims, ModelParams};
use crate::train::LabelMap;

/// Which source tensors are copied into the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferScope {
    #[default]
    MlpOnly,
    MlpAndGru,
}

impl fmt::Display for TransferScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransferScope::MlpOnly => "mlp",
            TransferScope::MlpAndGru => "mlp-gru",
        })
    }
}

impl FromStr for TransferScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" | "mlp_only" => Ok(TransferScope::MlpOnly),
            "mlp-gru" | "mlp_and_gru" => Ok(TransferScope::MlpAndGru),
            other => Err(Error::Invalid(format!("unknown transfer scope {other:?}"))),
        }
    }
}

/// Parameters paired with the class names their outputs stand for.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledModel {
    pub params: ModelParams,
    pub labels: LabelMap,
}

/// Builds a target model whose transferred tensors are bit-exact copies of
/// the source's stored values; the rest comes from `init_params(target_dims, seed)`.
pub fn init_from_source(
    source: &Checkpoint,
    target_dims: Dims,
    target_labels: LabelMap,
    scope: TransferScope,
    seed: u64,
) -> Result<LabeledModel> {
    let src = source.dims();
    if target_labels.len() != target_dims.num_classes {
        return Err(Error::Dimension(format!(
            "target label map has {} classes, dims say {}",
            target_labels.len(),
            target_dims.num_classes
        )));
    }
    if src.input != target_dims.input {
        return Err(Error::Dimension(format!(
            "source frame width {} differs from target {}; landmark layouts are incompatible",
            src.input, target_dims.input
        )));
    }
    if src.mlp_hidden != target_dims.mlp_hidden {
        return Err(Error::Dimension(format!(
            "source MLP has {} units, target {}",
            src.mlp_hidden, target_dims.mlp_hidden
        )));
    }
    if scope == TransferScope::MlpAndGru && src.gru_hidden != target_dims.gru_hidden {
        return Err(Error::Dimension(format!(
            "source GRU has {} units, target {}",
            src.gru_hidden, target_dims.gru_hidden
        )));
    }

    let from = source.params()?;
    let mut params = init_params(target_dims, seed)?;
    params.w1.assign(&from.w1);
    params.b1.assign(&from.b1);
    if scope == TransferScope::MlpAndGru {
        params.wz.assign(&from.wz);
        params.wr.assign(&from.wr);
        params.wn.assign(&from.wn);
        params.uz.assign(&from.uz);
        params.ur.assign(&from.ur);
        params.un.assign(&from.un);
        params.bz.assign(&from.bz);
        params.br.assign(&from.br);
        params.bn.assign(&from.bn);
    }
    Ok(LabeledModel {
        params,
        labels: target_labels,
    })
}

/// Relative change of `transfer_pct` over `baseline_pct`, in percent, rounded to 2 decimals.
pub fn relative_improvement(baseline_pct: f64, transfer_pct: f64) -> Result<f64> {
    if baseline_pct.is_nan() || baseline_pct <= 0.0 {
        return Err(Error::Invalid(format!(
            "relative improvement needs a positive baseline, got {baseline_pct}"
        )));
    }
    let raw = (transfer_pct - baseline_pct) / baseline_pct * 100.0;
    Ok((raw * 100.0).round() / 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn source(dims: Dims) -> Checkpoint {
        let params = init_params(dims, 77).unwrap();
        let labels = LabelMap::from_labels((0..dims.num_classes).map(|i| format!("src{i}")));
        Checkpoint::from_params(&params, labels, Provenance::default()).unwrap()
    }

    fn target_labels(k: usize) -> LabelMap {
        LabelMap::from_labels((0..k).map(|i| format!("tgt{i:02}")))
    }

    #[test]
    fn mlp_only_copies_w1_and_resizes_head() {
        let src = source(Dims::new(138, 16, 12, 8));
        let target = Dims::new(138, 16, 20, 26);
        let model = init_from_source(&src, target, target_labels(26), TransferScope::MlpOnly, 5).unwrap();
        let w1 = src.tensor("W1").unwrap();
        for (a, &b) in model.params.w1.iter().zip(w1) {
            assert_eq!((*a as f32).to_bits(), b.to_bits());
            assert_eq!(*a, b as f64);
        }
        assert_eq!(model.params.wo.nrows(), 26);
        assert_eq!(model.labels.len(), 26);
        // GRU untouched: equals a fresh init for the target dims
        let fresh = init_params(target, 5).unwrap();
        assert_eq!(model.params.uz, fresh.uz);
        assert_eq!(model.params.wo, fresh.wo);
    }

    #[test]
    fn mlp_and_gru_scope() {
        let src = source(Dims::new(138, 16, 12, 8));
        let target = Dims::new(138, 16, 12, 3);
        let model = init_from_source(&src, target, target_labels(3), TransferScope::MlpAndGru, 1).unwrap();
        let from = src.params().unwrap();
        assert_eq!(model.params.un, from.un);
        assert_eq!(model.params.bz, from.bz);
        assert_ne!(model.params.wo.nrows(), from.wo.nrows());
        let mismatched = Dims::new(138, 16, 13, 3);
        assert!(init_from_source(&src, mismatched, target_labels(3), TransferScope::MlpAndGru, 1).is_err());
        assert!(init_from_source(&src, mismatched, target_labels(3), TransferScope::MlpOnly, 1).is_ok());
    }

    #[test]
    fn mismatches_rejected() {
        let src = source(Dims::new(138, 20, 12, 8));
        let err = init_from_source(
            &src,
            Dims::new(138, 10, 12, 8),
            target_labels(8),
            TransferScope::MlpOnly,
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
        assert!(init_from_source(
            &src,
            Dims::new(120, 20, 12, 8),
            target_labels(8),
            TransferScope::MlpOnly,
            0
        )
        .is_err());
        assert!(init_from_source(
            &src,
            Dims::new(138, 20, 12, 8),
            target_labels(7),
            TransferScope::MlpOnly,
            0
        )
        .is_err());
    }

    #[test]
    fn fresh_tensors_do_not_depend_on_source() {
        let a = source(Dims::new(138, 16, 12, 8));
        let b = Checkpoint::from_params(
            &init_params(Dims::new(138, 16, 30, 4), 3).unwrap(),
            target_labels(4),
            Provenance::default(),
        )
        .unwrap();
        let t = Dims::new(138, 16, 10, 5);
        let x = init_from_source(&a, t, target_labels(5), TransferScope::MlpOnly, 42).unwrap();
        let y = init_from_source(&b, t, target_labels(5), TransferScope::MlpOnly, 42).unwrap();
        assert_eq!(x.params.wz, y.params.wz);
        assert_eq!(x.params.wo, y.params.wo);
        assert_ne!(x.params.w1, y.params.w1);
    }

    #[test]
    fn relative_improvement_values() {
        assert_eq!(relative_improvement(80.15, 85.78).unwrap(), 7.02);
        assert_eq!(relative_improvement(90.28, 91.25).unwrap(), 1.07);
        assert_eq!(relative_improvement(55.5, 55.5).unwrap(), 0.0);
        assert!(relative_improvement(80.0, 70.0).unwrap() < 0.0);
        assert!(relative_improvement(0.0, 10.0).is_err());
    }

    #[test]
    fn scope_parsing() {
        assert_eq!("mlp".parse::<TransferScope>().unwrap(), TransferScope::MlpOnly);
        assert_eq!(
            "mlp-gru".parse::<TransferScope>().unwrap(),
            TransferScope::MlpAndGru
        );
        assert!("gru".parse::<TransferScope>().is_err());
    }
}
