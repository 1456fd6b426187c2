//! End-to-end checks of the command-line surface: exit codes, file
//! outputs, and a miniature train/eval cycle on a handcrafted corpus.

use std::path::Path;
use std::process::{Command, Output};

use qtopo::dataset::{Dataset, LabeledSample};
use qtopo::spin;

fn qtopo_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qtopo"))
}

fn run(args: &[&str]) -> Output {
    qtopo_bin().args(args).output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn chern_reports_the_phase_diagram() {
    let out = run(&["chern", "--c", "1", "--m", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("chern = 1"), "{text}");
    assert!(text.contains("min_gap"));

    let out = run(&["chern", "--c", "2", "--m", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("chern = 0"));
}

#[test]
fn chern_at_the_transition_exits_numeric() {
    let out = run(&["chern", "--c", "1", "--m", "2"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn chern_without_arguments_is_a_usage_error() {
    let out = run(&["chern"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fmap_writes_mid_gray_panel_for_trivial_phase() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("panel");
    let out = run(&[
        "fmap",
        "--c",
        "1",
        "--m",
        "3",
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let pgm = std::fs::read(prefix.with_extension("pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n"));
    let body = &pgm[pgm.len() - 1600..];
    assert!(body.iter().all(|&b| b == 128), "trivial map must be flat");
    assert!(prefix.with_extension("csv").exists());
}

#[test]
fn eval_with_missing_model_exits_data_error() {
    let out = run(&["eval", "--model", "/nonexistent.qnn", "--data", "/nonexistent.qds"]);
    assert_eq!(out.status.code(), Some(3));
}

fn tiny_corpus(dir: &Path) {
    let mut samples = Vec::new();
    for (c, m) in [(1u32, 1.0f64), (1, -1.0), (2, 1.0), (1, 3.0)] {
        for k in 0..3u64 {
            let t = spin::texture(c, m, 40).unwrap();
            let t = spin::augment(&t, 500 + k, spin::AugmentOpts::NO_NOISE).unwrap();
            samples.push(LabeledSample {
                class: (t.meta.label + 4) as u8,
                aug_seed: 500 + k,
                texture: t,
            });
        }
    }
    let ds = Dataset { l: 40, samples };
    for name in ["train.qds", "val.qds", "test.qds"] {
        ds.save(&dir.join(name)).unwrap();
    }
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    tiny_corpus(dir.path());

    let out = run(&[
        "train",
        "--arch",
        "qcnn",
        "--epochs",
        "1",
        "--batch-size",
        "4",
        "--seed",
        "7",
        "--data",
        dir.path().to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("parameters = 19554"), "{text}");
    assert!(text.contains("test_accuracy"));
    assert!(dir.path().join("qcnn.qnn").exists());
    assert!(dir.path().join("qcnn_curves.csv").exists());

    let model = dir.path().join("qcnn.qnn");
    let data = dir.path().join("test.qds");
    let out = run(&[
        "eval",
        "--model",
        model.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("dataset,count,accuracy"));
}

#[test]
fn identical_seeds_give_identical_curves() {
    let dir = tempfile::tempdir().unwrap();
    tiny_corpus(dir.path());
    let curves = |out_dir: &Path| {
        let out = run(&[
            "train",
            "--arch",
            "cnn",
            "--epochs",
            "2",
            "--batch-size",
            "4",
            "--seed",
            "11",
            "--data",
            dir.path().to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        std::fs::read(out_dir.join("cnn_curves.csv")).unwrap()
    };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    assert_eq!(curves(d1.path()), curves(d2.path()));
}

#[test]
fn pca_command_emits_all_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "pca",
        "--sd",
        "0",
        "--components",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    for file in ["spectrum.csv", "projections.csv", "confusion.csv", "report.csv"] {
        assert!(dir.path().join(file).exists(), "missing {file}");
    }
    let text = stdout(&out);
    assert!(text.contains("accuracy"));
    assert!(text.contains("mean-centered only"));
}
