//! Paired (MLP units, GRU units) search.
//!
//! Each pair is trained from its own seeded initialization and scored by the
//! best evaluation metric it reached. The winner has the highest score; ties
//! go to the pair that reached it at the earlier epoch, then to list order.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{init_params, Dims};
use crate::train::{train, BestMetric, Dataset, TrainConfig};

/// The rows of the search table the paired sizes were chosen from.
pub const DEFAULT_PAIRS: [(usize, usize); 5] =
    [(256, 512), (512, 1024), (1024, 2048), (2000, 3000), (2048, 4096)];

/// Scores closer than this count as a tie.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    Accuracy,
    MacroF1,
}

impl SelectionMetric {
    /// Accuracy for class-balanced data, macro F1 otherwise.
    pub fn auto(train_set: &Dataset) -> Self {
        if train_set.is_balanced() {
            SelectionMetric::Accuracy
        } else {
            SelectionMetric::MacroF1
        }
    }
}

impl fmt::Display for SelectionMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMetric::Accuracy => "accuracy",
            SelectionMetric::MacroF1 => "macro_f1",
        })
    }
}

impl FromStr for SelectionMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(SelectionMetric::Accuracy),
            "macro_f1" | "macro-f1" | "f1" => Ok(SelectionMetric::MacroF1),
            other => Err(Error::Invalid(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub pairs: Vec<(usize, usize)>,
    pub metric: SelectionMetric,
    pub config: TrainConfig,
}

impl GridSpec {
    pub fn new(metric: SelectionMetric, config: TrainConfig) -> Self {
        GridSpec {
            pairs: DEFAULT_PAIRS.to_vec(),
            metric,
            config,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::Invalid("grid has no pairs".into()));
        }
        for (i, p) in self.pairs.iter().enumerate() {
            if self.pairs[..i].contains(p) {
                return Err(Error::Invalid(format!("duplicate grid pair {p:?}")));
            }
        }
        self.config.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub mlp_hidden: usize,
    pub gru_hidden: usize,
    pub accuracy: BestMetric,
    pub macro_f1: BestMetric,
    pub stopped_epoch: usize,
}

impl GridRow {
    pub fn score(&self, metric: SelectionMetric) -> BestMetric {
        match metric {
            SelectionMetric::Accuracy => self.accuracy,
            SelectionMetric::MacroF1 => self.macro_f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub metric: SelectionMetric,
    pub rows: Vec<GridRow>,
    pub winner: usize,
}

impl GridResult {
    pub fn winner_row(&self) -> &GridRow {
        &self.rows[self.winner]
    }

    /// `mlp,gru,accuracy,macro_f1,best_epoch,stopped_epoch`, one row per pair;
    /// `best_epoch` refers to the selection metric.
    pub fn report_csv(&self) -> String {
        let mut out = String::from("mlp,gru,accuracy,macro_f1,best_epoch,stopped_epoch\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.2},{:.2},{},{}\n",
                r.mlp_hidden,
                r.gru_hidden,
                r.accuracy.value,
                r.macro_f1.value,
                r.score(self.metric).epoch,
                r.stopped_epoch
            ));
        }
        out
    }
}

/// Index of the best `(score, epoch)`: highest score, then earliest epoch,
/// then first in order. `None` for an empty table.
pub fn select_winner(scores: &[BestMetric]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => {
                let cur = scores[b];
                s.value > cur.value + TIE_TOLERANCE
                    || ((s.value - cur.value).abs() <= TIE_TOLERANCE && s.epoch < cur.epoch)
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}

/// Trains one model per pair on `jobs` worker threads and picks the winner.
pub fn run_grid(spec: &GridSpec, train_set: &Dataset, eval_set: &Dataset, jobs: usize) -> Result<GridResult> {
    spec.validate()?;
    let input = train_set
        .samples
        .first()
        .map(|s| s.frames.ncols())
        .ok_or_else(|| Error::Invalid("training set is empty".into()))?;
    let k = train_set.num_classes();

    let run_pair = |&(mlp, gru): &(usize, usize)| -> Result<GridRow> {
        let params = init_params(Dims::new(input, mlp, gru, k), spec.config.seed)?;
        let result = train(params, train_set, &spec.config, Some(eval_set))?;
        let s = &result.summary;
        Ok(GridRow {
            mlp_hidden: mlp,
            gru_hidden: gru,
            accuracy: s.best_accuracy.expect("evaluated every epoch"),
            macro_f1: s.best_macro_f1.expect("evaluated every epoch"),
            stopped_epoch: s.stopped_epoch,
        })
    };

    let outcomes: Vec<Result<GridRow>> = if jobs <= 1 {
        spec.pairs.iter().map(run_pair).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Grid(format!("thread pool: {e}")))?;
        pool.install(|| spec.pairs.par_iter().map(run_pair).collect())
    };

    let mut rows = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (pair, outcome) in spec.pairs.iter().zip(outcomes) {
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(format!("({}, {}): {e}", pair.0, pair.1)),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Grid(failures.join("; ")));
    }
    let scores: Vec<_> = rows.iter().map(|r| r.score(spec.metric)).collect();
    let winner = select_winner(&scores).expect("grid is non-empty");
    Ok(GridResult {
        metric: spec.metric,
        rows,
        winner,
    })
}
