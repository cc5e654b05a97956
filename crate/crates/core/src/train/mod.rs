//! Mini-batch training with patience-based early stopping, and evaluation.

mod dataset;
mod metrics;

pub use dataset::{label_map_for, load_sequences, Dataset, LabelMap, Sample};
pub use metrics::{accuracy, macro_f1, ConfusionMatrix};

use std::ops::ControlFlow;

use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    backward, cross_entropy_indices, forward_batch, softmax_rows, AdamState, ModelParams, SequenceBatch,
};

pub const DEFAULT_LEARNING_RATE: f64 = 1e-5;
pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_PATIENCE: usize = 200;

/// Which loss early stopping watches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    #[default]
    TrainLoss,
    EvalLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub patience_epochs: usize,
    /// `None` trains until patience runs out.
    pub max_epochs: Option<usize>,
    pub seed: u64,
    pub shuffle: bool,
    pub monitor: Monitor,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: DEFAULT_LEARNING_RATE,
            batch_size: DEFAULT_BATCH_SIZE,
            patience_epochs: DEFAULT_PATIENCE,
            max_epochs: None,
            seed: 0,
            shuffle: true,
            monitor: Monitor::TrainLoss,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Invalid(format!("learning rate {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Invalid("batch size must be at least 1".into()));
        }
        if self.patience_epochs == 0 {
            return Err(Error::Invalid("patience must be at least 1 epoch".into()));
        }
        if self.max_epochs == Some(0) {
            return Err(Error::Invalid("max_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Tracks the best (lowest) loss and decides when patience has run out.
///
/// Epochs are 1-based. Training stops once `epoch - best_epoch >= patience`.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best_epoch: usize,
    best_loss: f64,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best_epoch: 0,
            best_loss: f64::INFINITY,
        }
    }

    /// Records an epoch's loss; true when it strictly improves on the best so far.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_epoch = epoch;
            true
        } else {
            false
        }
    }

    pub fn should_stop(&self, epoch: usize) -> bool {
        epoch - self.best_epoch >= self.patience
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }
}

/// Metrics of one evaluation pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's samples.
    pub loss: f64,
    pub eval_loss: Option<f64>,
    pub accuracy: Option<f64>,
    pub macro_f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
    /// The caller's epoch observer asked to stop.
    Observer,
}

/// Best epoch and value of one evaluation metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestMetric {
    pub epoch: usize,
    pub value: f64,
}

impl BestMetric {
    fn update(slot: &mut Option<BestMetric>, epoch: usize, value: f64) {
        if slot.is_none_or(|b| value > b.value) {
            *slot = Some(BestMetric { epoch, value });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub best_loss_epoch: usize,
    pub best_loss: f64,
    pub best_accuracy: Option<BestMetric>,
    pub best_macro_f1: Option<BestMetric>,
    pub stopped_epoch: usize,
    pub stop_reason: StopReason,
    pub config: TrainConfig,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    /// Parameters at the end of the best-loss epoch.
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
    pub summary: TrainSummary,
}

impl TrainResult {
    pub fn best_loss_epoch(&self) -> usize {
        self.summary.best_loss_epoch
    }

    pub fn stopped_epoch(&self) -> usize {
        self.summary.stopped_epoch
    }

    /// `epoch,loss,accuracy,macro_f1`; metric columns are empty without an eval set.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,loss,accuracy,macro_f1\n");
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.history {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.epoch,
                r.loss,
                opt(r.accuracy),
                opt(r.macro_f1)
            ));
        }
        out
    }
}

fn check_compatible(params: &ModelParams, set: &Dataset) -> Result<()> {
    if set.num_classes() != params.dims.num_classes {
        return Err(Error::Dimension(format!(
            "dataset has {} classes, model outputs {}",
            set.num_classes(),
            params.dims.num_classes
        )));
    }
    if let Some(s) = set.samples.iter().find(|s| s.target >= params.dims.num_classes) {
        return Err(Error::UnknownLabel(format!("{} (index {})", s.id, s.target)));
    }
    Ok(())
}

fn make_batch(set: &Dataset, indices: &[usize]) -> Result<(SequenceBatch, Vec<usize>)> {
    if indices.is_empty() {
        return Err(Error::Invalid("empty batch".into()));
    }
    let views: Vec<_> = indices.iter().map(|&i| set.samples[i].view()).collect();
    let targets = indices.iter().map(|&i| set.samples[i].target).collect();
    Ok((SequenceBatch::from_sequences(&views)?, targets))
}

pub fn train(
    params: ModelParams,
    train_set: &Dataset,
    config: &TrainConfig,
    eval_set: Option<&Dataset>,
) -> Result<TrainResult> {
    train_with_observer(params, train_set, config, eval_set, |_| ControlFlow::Continue(()))
}

/// [`train`] with a callback after every epoch; returning `Break` ends training.
pub fn train_with_observer(
    mut params: ModelParams,
    train_set: &Dataset,
    config: &TrainConfig,
    eval_set: Option<&Dataset>,
    mut observer: impl FnMut(&EpochRecord) -> ControlFlow<()>,
) -> Result<TrainResult> {
    config.validate()?;
    params.validate()?;
    if train_set.is_empty() {
        return Err(Error::Invalid("training set is empty".into()));
    }
    check_compatible(&params, train_set)?;
    if let Some(eval) = eval_set {
        check_compatible(&params, eval)?;
        if eval.is_empty() {
            return Err(Error::Invalid("evaluation set is empty".into()));
        }
    }
    if config.monitor == Monitor::EvalLoss && eval_set.is_none() {
        return Err(Error::Invalid(
            "monitoring eval loss needs an evaluation set".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(params.dims, config.learning_rate);
    let mut stopper = EarlyStopping::new(config.patience_epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best_params = params.clone();
    let mut history = Vec::new();
    let mut best_accuracy = None;
    let mut best_macro_f1 = None;

    let mut epoch = 0;
    let stop_reason = loop {
        epoch += 1;
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let (batch, targets) = make_batch(train_set, chunk)?;
            let (logits, cache) = forward_batch(&params, &batch)?;
            let probs = softmax_rows(logits.view());
            loss_sum += cross_entropy_indices(probs.view(), &targets)?.iter().sum::<f64>();
            let grads = backward(&params, &cache, &targets)?;
            adam.step(&mut params, &grads)?;
        }
        let loss = loss_sum / train_set.len() as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite("training loss"));
        }

        let eval = eval_set
            .map(|set| evaluate_batched(&params, set, config.batch_size))
            .transpose()?;
        let record = EpochRecord {
            epoch,
            loss,
            eval_loss: eval.as_ref().map(|e| e.loss),
            accuracy: eval.as_ref().map(|e| e.accuracy),
            macro_f1: eval.as_ref().map(|e| e.macro_f1),
            confusion: eval.as_ref().map(|e| e.confusion.clone()),
        };
        if let Some(e) = &eval {
            BestMetric::update(&mut best_accuracy, epoch, e.accuracy);
            BestMetric::update(&mut best_macro_f1, epoch, e.macro_f1);
        }
        let monitored = match config.monitor {
            Monitor::TrainLoss => loss,
            Monitor::EvalLoss => record.eval_loss.unwrap_or(f64::INFINITY),
        };
        if stopper.observe(epoch, monitored) {
            best_params.clone_from(&params);
        }
        let flow = observer(&record);
        history.push(record);

        if stopper.should_stop(epoch) {
            break StopReason::Patience;
        }
        if config.max_epochs.is_some_and(|max| epoch >= max) {
            break StopReason::MaxEpochs;
        }
        if flow.is_break() {
            break StopReason::Observer;
        }
    };

    Ok(TrainResult {
        params: best_params,
        history,
        summary: TrainSummary {
            best_loss_epoch: stopper.best_epoch(),
            best_loss: stopper.best_loss(),
            best_accuracy,
            best_macro_f1,
            stopped_epoch: epoch,
            stop_reason,
            config: config.clone(),
        },
    })
}

/// Index of the largest logit; ties go to the lower index.
pub fn argmax(row: ndarray::ArrayView1<'_, f64>) -> usize {
    row.iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
        )
        .0
}

pub fn predict(params: &ModelParams, set: &Dataset, batch_size: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(set.len());
    let indices: Vec<usize> = (0..set.len()).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let (batch, _) = make_batch(set, chunk)?;
        let (logits, _) = forward_batch(params, &batch)?;
        out.extend(logits.axis_iter(Axis(0)).map(argmax));
    }
    Ok(out)
}

pub fn evaluate(params: &ModelParams, set: &Dataset) -> Result<Evaluation> {
    evaluate_batched(params, set, DEFAULT_BATCH_SIZE)
}

pub fn evaluate_batched(params: &ModelParams, set: &Dataset, batch_size: usize) -> Result<Evaluation> {
    if set.is_empty() {
        return Err(Error::Invalid("evaluation set is empty".into()));
    }
    check_compatible(params, set)?;
    let mut confusion = ConfusionMatrix::new(params.dims.num_classes);
    let mut loss_sum = 0.0;
    let indices: Vec<usize> = (0..set.len()).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let (batch, targets) = make_batch(set, chunk)?;
        let (logits, _) = forward_batch(params, &batch)?;
        let probs = softmax_rows(logits.view());
        loss_sum += cross_entropy_indices(probs.view(), &targets)?.iter().sum::<f64>();
        for (row, &t) in logits.axis_iter(Axis(0)).zip(&targets) {
            confusion.record(t, argmax(row));
        }
    }
    Ok(Evaluation {
        loss: loss_sum / set.len() as f64,
        accuracy: accuracy(&confusion)?,
        macro_f1: macro_f1(&confusion)?,
        confusion,
    })
}
