use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clap::CommandFactory;
use slr_cli::Cli;
use slr_core::data::{LandmarkFrame, POSE_LEFT_WRIST, POSE_RIGHT_WRIST};
use slr_core::{Checkpoint, KeypointSequence, FRAME_WIDTH};

fn slr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slr"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = slr(args, cwd);
    assert!(
        out.status.success(),
        "slr {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(path.clone(), fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn help_text() -> String {
    let dir = std::env::temp_dir();
    let mut text = ok(&["--help"], &dir);
    for sub in Cli::command().get_subcommands() {
        let name = sub.get_name();
        text.push_str(&format!("\n==> slr {name} --help\n"));
        text.push_str(&ok(&[name, "--help"], &dir));
    }
    text
}

#[test]
fn help_matches_golden_file() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/help.txt");
    let text = help_text();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(golden.parent().unwrap()).unwrap();
        fs::write(&golden, &text).unwrap();
    }
    let expected = fs::read_to_string(&golden).expect("golden file; regenerate with UPDATE_GOLDEN=1");
    assert_eq!(
        text, expected,
        "help output changed; regenerate with UPDATE_GOLDEN=1"
    );
}

#[test]
fn help_lists_every_flag() {
    let dir = std::env::temp_dir();
    for sub in Cli::command().get_subcommands() {
        let help = ok(&[sub.get_name(), "--help"], &dir);
        for arg in sub.get_arguments() {
            if let Some(long) = arg.get_long() {
                assert!(
                    help.contains(&format!("--{long}")),
                    "{} --help lacks --{long}",
                    sub.get_name()
                );
            }
        }
    }
}

#[test]
fn report_prints_relative_improvement() {
    let dir = tempfile::tempdir().unwrap();
    let metrics = |acc: f64| {
        format!(
            r#"{{"accuracy": {acc}, "macro_f1": 50.0, "confusion": [[1]], "best_epoch": 3, "stopped_epoch": 9}}"#
        )
    };
    fs::write(dir.path().join("a.json"), metrics(80.15)).unwrap();
    fs::write(dir.path().join("b.json"), metrics(85.78)).unwrap();
    let out = ok(&["report", "--baseline", "a.json", "--tl", "b.json"], dir.path());
    assert_eq!(out.trim(), "+7.02%");
    fs::write(dir.path().join("c.json"), metrics(91.25)).unwrap();
    fs::write(dir.path().join("d.json"), metrics(90.28)).unwrap();
    let out = ok(&["report", "--baseline", "d.json", "--tl", "c.json"], dir.path());
    assert_eq!(out.trim(), "+1.07%");
    let out = ok(&["report", "--baseline", "c.json", "--tl", "d.json"], dir.path());
    assert!(out.trim().starts_with('-'));
}

#[test]
fn filtering_resting_hands_fails_with_empty_result() {
    let dir = tempfile::tempdir().unwrap();
    let mut coords = vec![0.5f32; FRAME_WIDTH];
    coords[POSE_LEFT_WRIST * 3 + 1] = 0.8;
    coords[POSE_RIGHT_WRIST * 3 + 1] = 0.6;
    let frame = LandmarkFrame::with_zeroed_hands(coords, [false, false]).unwrap();
    let seq = KeypointSequence {
        sample_id: "rest".into(),
        dataset_id: "t".into(),
        label: "x".into(),
        concept: None,
        fps: 25.0,
        frames: vec![frame; 4],
    };
    seq.save(dir.path().join("rest.kpseq.json")).unwrap();
    let out = slr(
        &[
            "filter",
            "--input",
            "rest.kpseq.json",
            "--threshold",
            "0.6",
            "--out",
            "kept.kpseq.json",
        ],
        dir.path(),
    );
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.starts_with("error: empty-result: "), "{stderr}");
    assert!(!dir.path().join("kept.kpseq.json").exists());
}

#[test]
fn usage_errors_are_machine_parsable() {
    let dir = tempfile::tempdir().unwrap();
    let out = slr(&["train", "--bogus"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .starts_with("error: usage: "));
    let out = slr(
        &[
            "eval",
            "--model",
            "missing.slrm",
            "--manifest",
            "m.csv",
            "--out",
            "x.json",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error: io: "));
}

/// synth -> split -> train -> eval in `root`, returning the eval metrics.
fn pipeline(root: &Path) -> String {
    ok(
        &[
            "synth",
            "--classes",
            "3",
            "--per-class",
            "6",
            "--seed",
            "11",
            "--out",
            "data",
        ],
        root,
    );
    ok(
        &[
            "split",
            "--manifest",
            "data/manifest.csv",
            "--seed",
            "11",
            "--out",
            "split/manifest.csv",
        ],
        root,
    );
    let train = [
        "train",
        "--manifest",
        "split/manifest.csv",
        "--data-dir",
        "data",
        "--mlp",
        "16",
        "--gru",
        "12",
        "--lr",
        "1e-2",
        "--max-epochs",
        "6",
        "--seed",
        "11",
        "--out",
        "run",
    ];
    ok(&train, root);
    ok(
        &[
            "eval",
            "--model",
            "run/model.slrm",
            "--manifest",
            "split/manifest.csv",
            "--data-dir",
            "data",
            "--out",
            "eval/metrics.json",
        ],
        root,
    );
    fs::read_to_string(root.join("eval/metrics.json")).unwrap()
}

#[test]
fn pipeline_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = pipeline(a.path());
    assert_eq!(first, pipeline(b.path()));
    let metrics: serde_json::Value = serde_json::from_str(&first).unwrap();
    for key in ["accuracy", "macro_f1", "confusion", "best_epoch", "stopped_epoch"] {
        assert!(metrics.get(key).is_some(), "metrics lack {key}");
    }
    assert_eq!(
        fs::read(a.path().join("run/metrics.json")).unwrap(),
        fs::read(b.path().join("run/metrics.json")).unwrap()
    );
    assert_eq!(
        fs::read(a.path().join("run/model.slrm")).unwrap(),
        fs::read(b.path().join("run/model.slrm")).unwrap()
    );
}

#[test]
fn config_file_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path());
    let cfg = fs::read_to_string(dir.path().join("run/config.json")).unwrap();
    ok(
        &["train", "--config", "run/config.json", "--out", "again"],
        dir.path(),
    );
    assert_eq!(
        fs::read_to_string(dir.path().join("again/config.json")).unwrap(),
        cfg
    );
    assert_eq!(
        fs::read(dir.path().join("run/metrics.json")).unwrap(),
        fs::read(dir.path().join("again/metrics.json")).unwrap()
    );
}

#[test]
fn commands_leave_inputs_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    pipeline(root);
    let data = snapshot(&root.join("data"));
    let split = snapshot(&root.join("split"));
    let model = fs::read(root.join("run/model.slrm")).unwrap();

    ok(
        &[
            "split",
            "--manifest",
            "data/manifest.csv",
            "--seed",
            "2",
            "--out",
            "out/m.csv",
        ],
        root,
    );
    ok(
        &[
            "train",
            "--manifest",
            "split/manifest.csv",
            "--data-dir",
            "data",
            "--init-from",
            "run/model.slrm",
            "--transfer-scope",
            "mlp",
            "--lr",
            "1e-2",
            "--max-epochs",
            "2",
            "--no-eval",
            "--out",
            "out/tl",
        ],
        root,
    );
    ok(
        &[
            "transfer-init",
            "--source",
            "run/model.slrm",
            "--manifest",
            "split/manifest.csv",
            "--out",
            "out/t.slrm",
        ],
        root,
    );
    let sample = data
        .keys()
        .find(|p| p.to_string_lossy().ends_with(".kpseq.json"))
        .unwrap();
    let sample = sample.to_str().unwrap();
    ok(&["filter", "--input", sample, "--out", "out/f.kpseq.json"], root);
    ok(
        &[
            "heatmap",
            "--manifest",
            "data/manifest.csv",
            "--concept",
            "anatomy",
            "--grid",
            "16",
            "--out",
            "out/a.csv",
            "--pgm",
            "out/a.pgm",
        ],
        root,
    );
    ok(
        &[
            "heatmap",
            "--manifest",
            "data/manifest.csv",
            "--concept",
            "emotion",
            "--grid",
            "16",
            "--out",
            "out/b.csv",
        ],
        root,
    );
    let similarity = ok(
        &["compare-heatmaps", "--a", "out/a.csv", "--b", "out/b.csv"],
        root,
    );
    assert!(similarity.trim().parse::<f64>().unwrap().abs() <= 1.0);
    ok(
        &[
            "grid",
            "--manifest",
            "split/manifest.csv",
            "--data-dir",
            "data",
            "--pairs",
            "8x6,10x8",
            "--lr",
            "1e-2",
            "--max-epochs",
            "2",
            "--jobs",
            "2",
            "--out",
            "out/grid.csv",
        ],
        root,
    );

    assert_eq!(snapshot(&root.join("data")), data);
    assert_eq!(snapshot(&root.join("split")), split);
    assert_eq!(fs::read(root.join("run/model.slrm")).unwrap(), model);

    let tl = Checkpoint::load(root.join("out/tl/model.slrm")).unwrap();
    assert_eq!(
        tl.metadata.provenance.transferred_from.as_deref(),
        Some("run/model.slrm")
    );
    let pgm = fs::read(root.join("out/a.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n16 16\n255\n"));
    let grid = fs::read_to_string(root.join("out/grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 3);
}
