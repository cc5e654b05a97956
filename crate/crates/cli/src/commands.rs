use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slr_core::data::{default_concept_anchors, filter_frames, read_kpseq, split_manifest, write_synth};
use slr_core::grid::{run_grid, DEFAULT_PAIRS};
use slr_core::heatmap::{accumulate_concept, concept_similarity};
use slr_core::nn::init_params;
use slr_core::train::{evaluate_batched, label_map_for, load_sequences, train as train_model, TrainSummary};
use slr_core::transfer::{init_from_source, relative_improvement, Provenance};
use slr_core::{
    ActivityGrid, Checkpoint, Dataset, Dims, GridSpec, KeypointSequence, Manifest, SelectionMetric, Split,
    SynthSpec, TrainConfig,
};

use crate::config::{ExperimentConfig, TransferSource};
use crate::error::{CliError, CliResult};
use crate::{
    CompareArgs, EvalArgs, FilterArgs, GridArgs, HeatmapArgs, ReportArgs, SplitArgs, SynthArgs, TrainArgs,
    TransferInitArgs, DEFAULT_GRU_HIDDEN, DEFAULT_MLP_HIDDEN,
};

/// `metrics.json`, written by `train` and `eval` and read by `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: Vec<Vec<u64>>,
    pub best_epoch: Option<usize>,
    pub stopped_epoch: Option<usize>,
}

/// `summary.json`, written by `train`.
#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    dims: Dims,
    metric: SelectionMetric,
    train_samples: usize,
    test_samples: usize,
    transfer: Option<&'a TransferSource>,
    #[serde(flatten)]
    training: &'a TrainSummary,
}

fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::json(path, e))? + "\n";
    write_bytes(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::json(path, e))
}

fn data_dir(manifest: &Path, explicit: Option<&PathBuf>) -> PathBuf {
    match explicit {
        Some(d) => d.clone(),
        None => manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
    }
}

fn check_threshold(t: Option<f64>) -> CliResult<()> {
    match t {
        Some(t) if !(t > 0.0 && t <= 1.0) => {
            Err(CliError::usage(format!("filter threshold {t} outside (0, 1]")))
        }
        _ => Ok(()),
    }
}

fn create_out_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn synth(args: SynthArgs) -> CliResult<()> {
    let mut spec = match &args.spec {
        Some(path) => read_json::<SynthSpec>(path)?,
        None => {
            let mut spec = SynthSpec::new(
                args.dataset_id.clone(),
                args.classes,
                args.per_class,
                default_concept_anchors(),
                0,
            );
            spec.frames_per_sample = (args.min_frames, args.max_frames);
            spec.jitter_stddev = args.jitter;
            spec.fps = args.fps;
            spec
        }
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    spec.validate()?;
    create_out_dir(&args.out)?;
    let manifest = write_synth(&spec, &args.out)?;
    write_json(&args.out.join("spec.json"), &spec)?;
    println!("wrote {} samples to {}", manifest.rows.len(), args.out.display());
    Ok(())
}

pub fn filter(args: FilterArgs) -> CliResult<()> {
    check_threshold(Some(args.threshold))?;
    let seq = read_kpseq(&args.input)?;
    let kept = filter_frames(&seq, args.threshold)?;
    write_bytes(&args.out, &kept.to_kpseq_bytes()?)?;
    println!("kept {} of {} frames", kept.len(), seq.len());
    Ok(())
}

pub fn split(args: SplitArgs) -> CliResult<()> {
    let manifest = Manifest::load(&args.manifest)?;
    let out = split_manifest(&manifest, args.train_fraction, args.seed)?;
    let mut buf = Vec::new();
    out.write(&mut buf)?;
    write_bytes(&args.out, &buf)?;
    println!(
        "{} train, {} test",
        out.rows_in(Split::Train).count(),
        out.rows_in(Split::Test).count()
    );
    Ok(())
}

/// Merges `--config` with explicit flags.
fn resolve_experiment(args: &TrainArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let manifest = args
                .manifest
                .clone()
                .ok_or_else(|| CliError::usage("train needs --manifest or --config"))?;
            let source_dims = match &args.init_from {
                Some(p) => Some(Checkpoint::load(p)?.dims()),
                None => None,
            };
            ExperimentConfig {
                manifest,
                data_dir: None,
                mlp_hidden: source_dims.map_or(DEFAULT_MLP_HIDDEN, |d| d.mlp_hidden),
                gru_hidden: source_dims.map_or(DEFAULT_GRU_HIDDEN, |d| d.gru_hidden),
                train: TrainConfig::default(),
                filter_threshold: None,
                transfer: None,
                metric: None,
                evaluate: true,
            }
        }
    };
    if let Some(m) = &args.manifest {
        cfg.manifest = m.clone();
    }
    if let Some(d) = &args.data_dir {
        cfg.data_dir = Some(d.clone());
    }
    if let Some(v) = args.mlp {
        cfg.mlp_hidden = v;
    }
    if let Some(v) = args.gru {
        cfg.gru_hidden = v;
    }
    if let Some(v) = args.lr {
        cfg.train.learning_rate = v;
    }
    if let Some(v) = args.batch {
        cfg.train.batch_size = v;
    }
    if let Some(v) = args.patience {
        cfg.train.patience_epochs = v;
    }
    if let Some(v) = args.max_epochs {
        cfg.train.max_epochs = Some(v);
    }
    if let Some(v) = args.seed {
        cfg.train.seed = v;
    }
    if let Some(v) = args.filter_threshold {
        cfg.filter_threshold = Some(v);
    }
    if let Some(p) = &args.init_from {
        cfg.transfer = Some(TransferSource {
            checkpoint: p.clone(),
            scope: args.transfer_scope.unwrap_or_default(),
        });
    } else if let (Some(scope), Some(t)) = (args.transfer_scope, cfg.transfer.as_mut()) {
        t.scope = scope;
    } else if args.transfer_scope.is_some() {
        return Err(CliError::usage("--transfer-scope needs --init-from"));
    }
    if args.no_eval {
        cfg.evaluate = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dataset_of(seqs: &[KeypointSequence], labels: &slr_core::LabelMap) -> CliResult<Option<Dataset>> {
    if seqs.is_empty() {
        Ok(None)
    } else {
        Ok(Some(Dataset::from_sequences(seqs, labels.clone())?))
    }
}

pub fn train(args: TrainArgs) -> CliResult<()> {
    let cfg = resolve_experiment(&args)?;
    let manifest = Manifest::load(&cfg.manifest)?;
    let labels = label_map_for(&manifest)?;
    let dir = cfg.data_dir();
    let train_seqs = load_sequences(&manifest, &dir, Split::Train, cfg.filter_threshold)?;
    let test_seqs = load_sequences(&manifest, &dir, Split::Test, cfg.filter_threshold)?;
    let train_set = dataset_of(&train_seqs, &labels)?
        .ok_or_else(|| CliError::new("invalid", "manifest has no training rows"))?;
    let test_set = dataset_of(&test_seqs, &labels)?;
    let metric = cfg.metric.unwrap_or_else(|| SelectionMetric::auto(&train_set));

    let input = train_set.samples[0].frames.ncols();
    let dims = Dims::new(input, cfg.mlp_hidden, cfg.gru_hidden, labels.len());
    let params = match &cfg.transfer {
        Some(t) => {
            let source = Checkpoint::load(&t.checkpoint)?;
            init_from_source(&source, dims, labels.clone(), t.scope, cfg.train.seed)?.params
        }
        None => init_params(dims, cfg.train.seed)?,
    };

    let eval_set = test_set.as_ref().filter(|_| cfg.evaluate);
    let result = train_model(params, &train_set, &cfg.train, eval_set)?;
    let summary = &result.summary;

    let metrics = eval_set
        .map(|_| -> CliResult<MetricsFile> {
            let (best, other) = match metric {
                SelectionMetric::Accuracy => (summary.best_accuracy, summary.best_macro_f1),
                SelectionMetric::MacroF1 => (summary.best_macro_f1, summary.best_accuracy),
            };
            let best = best.expect("evaluated every epoch");
            let other = other.expect("evaluated every epoch");
            let confusion = result.history[best.epoch - 1]
                .confusion
                .clone()
                .expect("evaluated every epoch");
            let (accuracy, macro_f1) = match metric {
                SelectionMetric::Accuracy => (best.value, other.value),
                SelectionMetric::MacroF1 => (other.value, best.value),
            };
            Ok(MetricsFile {
                accuracy,
                macro_f1,
                confusion: confusion.counts().to_vec(),
                best_epoch: Some(best.epoch),
                stopped_epoch: Some(summary.stopped_epoch),
            })
        })
        .transpose()?;

    let mut provenance = Provenance {
        dataset_id: train_seqs.first().map(|s| s.dataset_id.clone()),
        config: Some(cfg.train.clone()),
        best_epoch: Some(summary.best_loss_epoch),
        stopped_epoch: Some(summary.stopped_epoch),
        transferred_from: cfg.transfer.as_ref().map(|t| t.checkpoint.display().to_string()),
        ..Provenance::default()
    };
    if let Some(test) = &test_set {
        let saved = evaluate_batched(&result.params, test, cfg.train.batch_size)?;
        provenance.metrics.insert("test_accuracy".into(), saved.accuracy);
        provenance.metrics.insert("test_macro_f1".into(), saved.macro_f1);
    }
    if let Some(m) = &metrics {
        provenance.metrics.insert("best_accuracy".into(), m.accuracy);
        provenance.metrics.insert("best_macro_f1".into(), m.macro_f1);
    }

    create_out_dir(&args.out)?;
    Checkpoint::from_params(&result.params, labels, provenance)?.save(args.out.join("model.slrm"))?;
    write_bytes(&args.out.join("history.csv"), result.history_csv().as_bytes())?;
    write_json(
        &args.out.join("summary.json"),
        &RunSummary {
            dims,
            metric,
            train_samples: train_set.len(),
            test_samples: test_set.as_ref().map_or(0, Dataset::len),
            transfer: cfg.transfer.as_ref(),
            training: summary,
        },
    )?;
    write_bytes(&args.out.join("config.json"), cfg.to_json().as_bytes())?;
    match &metrics {
        Some(m) => {
            write_json(&args.out.join("metrics.json"), m)?;
            println!(
                "epochs {} (best loss at {}), accuracy {:.2}, macro F1 {:.2}, best {metric} at epoch {}",
                summary.stopped_epoch,
                summary.best_loss_epoch,
                m.accuracy,
                m.macro_f1,
                m.best_epoch.unwrap_or_default()
            );
        }
        None => println!(
            "epochs {} (best loss {:.6} at {}); no test split evaluated",
            summary.stopped_epoch, summary.best_loss, summary.best_loss_epoch
        ),
    }
    Ok(())
}

pub fn eval(args: EvalArgs) -> CliResult<()> {
    check_threshold(args.filter_threshold)?;
    if args.batch == 0 {
        return Err(CliError::usage("--batch must be at least 1"));
    }
    let ck = Checkpoint::load(&args.model)?;
    let manifest = Manifest::load(&args.manifest)?;
    let dir = data_dir(&args.manifest, args.data_dir.as_ref());
    let set = Dataset::from_manifest(
        &manifest,
        &dir,
        args.split,
        ck.label_map().clone(),
        args.filter_threshold,
    )?;
    if set.is_empty() {
        return Err(CliError::new(
            "invalid",
            format!("manifest has no {} rows", args.split),
        ));
    }
    let result = evaluate_batched(&ck.params()?, &set, args.batch)?;
    let prov = &ck.metadata.provenance;
    let metrics = MetricsFile {
        accuracy: result.accuracy,
        macro_f1: result.macro_f1,
        confusion: result.confusion.counts().to_vec(),
        best_epoch: prov.best_epoch,
        stopped_epoch: prov.stopped_epoch,
    };
    write_json(&args.out, &metrics)?;
    println!(
        "accuracy {:.2}, macro F1 {:.2} on {} samples",
        result.accuracy,
        result.macro_f1,
        set.len()
    );
    Ok(())
}

fn parse_pairs(text: &str) -> CliResult<Vec<(usize, usize)>> {
    text.split(',')
        .map(|item| {
            let (m, g) = item
                .trim()
                .split_once(['x', 'X'])
                .ok_or_else(|| CliError::usage(format!("pair {item:?} is not MLPxGRU")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::usage(format!("pair {item:?} is not MLPxGRU")))
            };
            Ok((parse(m)?, parse(g)?))
        })
        .collect()
}

pub fn grid(args: GridArgs) -> CliResult<()> {
    check_threshold(args.filter_threshold)?;
    if args.jobs == 0 {
        return Err(CliError::usage("--jobs must be at least 1"));
    }
    let pairs = match &args.pairs {
        Some(p) => parse_pairs(p)?,
        None => DEFAULT_PAIRS.to_vec(),
    };
    let manifest = Manifest::load(&args.manifest)?;
    let labels = label_map_for(&manifest)?;
    let dir = data_dir(&args.manifest, args.data_dir.as_ref());
    let train_set = Dataset::from_manifest(
        &manifest,
        &dir,
        Split::Train,
        labels.clone(),
        args.filter_threshold,
    )?;
    let test_set = Dataset::from_manifest(&manifest, &dir, Split::Test, labels, args.filter_threshold)?;
    if test_set.is_empty() {
        return Err(CliError::new(
            "invalid",
            "grid search needs test rows to score pairs",
        ));
    }
    let metric = match args.metric.as_str() {
        "auto" => SelectionMetric::auto(&train_set),
        other => other.parse()?,
    };
    let config = TrainConfig {
        learning_rate: args.lr,
        batch_size: args.batch,
        patience_epochs: args.patience,
        max_epochs: args.max_epochs,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let spec = GridSpec {
        pairs,
        metric,
        config,
    };
    let result = run_grid(&spec, &train_set, &test_set, args.jobs)?;
    write_bytes(&args.out, result.report_csv().as_bytes())?;
    let w = result.winner_row();
    let score = w.score(metric);
    println!(
        "winner: mlp {} gru {}, {metric} {:.2} at epoch {}",
        w.mlp_hidden, w.gru_hidden, score.value, score.epoch
    );
    Ok(())
}

pub fn transfer_init(args: TransferInitArgs) -> CliResult<()> {
    let source = Checkpoint::load(&args.source)?;
    let manifest = Manifest::load(&args.manifest)?;
    let labels = label_map_for(&manifest)?;
    let src = source.dims();
    let dims = Dims::new(
        src.input,
        args.mlp.unwrap_or(src.mlp_hidden),
        args.gru.unwrap_or(src.gru_hidden),
        labels.len(),
    );
    let model = init_from_source(&source, dims, labels, args.scope, args.seed)?;
    let provenance = Provenance {
        transferred_from: Some(args.source.display().to_string()),
        ..Provenance::default()
    };
    Checkpoint::from_params(&model.params, model.labels, provenance)?.save(&args.out)?;
    println!(
        "{} classes, {} scope, {} parameters",
        dims.num_classes,
        args.scope,
        dims.parameter_count()
    );
    Ok(())
}

fn metric_value(path: &Path, field: &str) -> CliResult<f64> {
    let value: serde_json::Value = read_json(path)?;
    value
        .get(field)
        .and_then(serde_json::Value::as_f64)
        .ok_or_else(|| {
            CliError::new(
                "schema",
                format!("{}: no numeric {field:?} field", path.display()),
            )
        })
}

pub fn report(args: ReportArgs) -> CliResult<()> {
    if !matches!(args.metric.as_str(), "accuracy" | "macro_f1") {
        return Err(CliError::usage(format!("unknown metric {:?}", args.metric)));
    }
    let baseline = metric_value(&args.baseline, &args.metric)?;
    let tl = metric_value(&args.tl, &args.metric)?;
    println!("{:+.2}%", relative_improvement(baseline, tl)?);
    Ok(())
}

pub fn heatmap(args: HeatmapArgs) -> CliResult<()> {
    let manifest = Manifest::load(&args.manifest)?;
    let dir = data_dir(&args.manifest, args.data_dir.as_ref());
    let splits = match args.split {
        Some(s) => vec![s],
        None => vec![Split::Train, Split::Test, Split::Unassigned],
    };
    let mut seqs = Vec::new();
    for s in splits {
        seqs.extend(load_sequences(&manifest, &dir, s, None)?);
    }
    let grid = accumulate_concept(&seqs, &args.concept, args.grid, args.selector)?;
    write_bytes(&args.out, grid.to_csv().as_bytes())?;
    if let Some(pgm) = &args.pgm {
        write_bytes(pgm, &grid.to_pgm())?;
    }
    println!("{} points from {} sequences", grid.count, seqs.len());
    Ok(())
}

fn read_grid(path: &Path) -> CliResult<ActivityGrid> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(ActivityGrid::from_csv(&text)?)
}

pub fn compare_heatmaps(args: CompareArgs) -> CliResult<()> {
    let a = read_grid(&args.a)?;
    let b = read_grid(&args.b)?;
    println!("{:.6}", concept_similarity(&a, &b)?);
    Ok(())
}
