use std::path::Path;
use std::process::{Command, Output};

use affect_core::corpus::{load_manifest, stratified_split};
use affect_core::pipeline::SessionAnalysis;
use affect_core::EmotionLabel;
use serde_json::Value;

fn affect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_affect")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = affect(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_eval_analyze_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    let manifest = fx.join("manifest.csv");
    ok(&["fixtures", "--out", s(&fx), "--clips-per-emotion", "12"]);

    let a = dir.path().join("a.emov");
    let b = dir.path().join("b.emov");
    let loss = dir.path().join("loss.csv");
    let out = ok(&[
        "train",
        "--manifest",
        s(&manifest),
        "--seed",
        "5",
        "--out",
        s(&a),
        "--loss-csv",
        s(&loss),
    ]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.starts_with("epoch ")).count(), 600);
    let csv = std::fs::read_to_string(&loss).unwrap();
    assert!(csv.starts_with("epoch,loss\n1,"));
    assert_eq!(csv.lines().count(), 601);
    ok(&["train", "--manifest", s(&manifest), "--seed", "5", "--out", s(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let report = dir.path().join("train.tsv");
    ok(&[
        "eval",
        "--model",
        s(&a),
        "--manifest",
        s(&manifest),
        "--seed",
        "5",
        "--split",
        "train",
        "--out",
        s(&report),
    ]);
    let table = std::fs::read_to_string(&report).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "Emotion\tDNN (Err %)\tCNN (Err %)");
    assert_eq!(rows.len(), 9);
    for row in &rows[1..] {
        let cells: Vec<&str> = row.split('\t').collect();
        let dnn: i64 = cells[1].parse().unwrap();
        assert!(dnn <= 5, "{row}");
        assert_eq!(cells[2], "—");
    }

    let out = ok(&["analyze", "--model", s(&a), "--wav", s(&fx.join("session.wav"))]);
    let analysis: SessionAnalysis = serde_json::from_slice(&out.stdout).unwrap();
    analysis.validate().unwrap();
    assert_eq!(analysis.segments.len(), 10);
    assert!(!analysis.spans.is_empty());
}

#[test]
fn zero_model_reports_only_neutral() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    let manifest = fx.join("manifest.csv");
    ok(&["fixtures", "--out", s(&fx), "--clips-per-emotion", "5"]);
    let zero = dir.path().join("zero.emov");
    ok(&["init", "--zero", "--out", s(&zero)]);
    let out = ok(&[
        "eval",
        "--model",
        s(&zero),
        "--manifest",
        s(&manifest),
        "--seed",
        "3",
        "--format",
        "json",
    ]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();

    let entries = load_manifest(&manifest).unwrap();
    let (_, test) = stratified_split(&entries, 0.7, 3).unwrap();
    let neutral = test.iter().filter(|e| e.emotion == EmotionLabel::Neutral).count() as f64;
    let expected = 1.0 - neutral / test.len() as f64;

    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows[0]["emotion"], "neutral");
    assert!((rows[0]["dnn_err"].as_f64().unwrap() - expected).abs() < 1e-12);
    for row in &rows[1..] {
        assert!(row["dnn_err"].is_null());
    }
    assert!(rows.iter().all(|r| r["cnn_err"].is_null()));
}

#[test]
fn both_columns_from_two_models() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    let manifest = fx.join("manifest.csv");
    ok(&["fixtures", "--out", s(&fx), "--clips-per-emotion", "3"]);
    let dnn = dir.path().join("dnn.emov");
    let cnn = dir.path().join("cnn.emov");
    ok(&["init", "--zero", "--out", s(&dnn)]);
    ok(&["init", "--zero", "--arch", "cnn", "--out", s(&cnn)]);
    let out = ok(&[
        "eval",
        "--model",
        s(&dnn),
        "--model",
        s(&cnn),
        "--manifest",
        s(&manifest),
    ]);
    let table = String::from_utf8(out.stdout).unwrap();
    let neutral = table.lines().nth(1).unwrap();
    let cells: Vec<&str> = neutral.split('\t').collect();
    assert_eq!(cells[1], cells[2]);
    assert_ne!(cells[1], "—");

    let out = affect(&[
        "eval",
        "--model",
        s(&dnn),
        "--model",
        s(&dnn),
        "--manifest",
        s(&manifest),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(affect(&["train"]).status.code(), Some(2));
    assert_eq!(affect(&["bogus"]).status.code(), Some(2));
    assert_eq!(affect(&["--help"]).status.code(), Some(0));

    let missing = dir.path().join("missing.csv");
    let model = dir.path().join("m.emov");
    let out = affect(&["train", "--manifest", s(&missing), "--out", s(&model)]);
    assert_eq!(out.status.code(), Some(3));

    let bad_wav = dir.path().join("bad.wav");
    std::fs::write(&bad_wav, b"RIFF....WAVEjunk").unwrap();
    ok(&["init", "--out", s(&model)]);
    assert_eq!(
        affect(&["analyze", "--model", s(&model), "--wav", s(&bad_wav)])
            .status
            .code(),
        Some(3)
    );

    let empty_wav = dir.path().join("empty.wav");
    std::fs::write(
        &empty_wav,
        affect_core::audio_io::write_wav(&affect_core::AudioClip::new(Vec::new(), 16000).unwrap()),
    )
    .unwrap();
    assert_eq!(
        affect(&["analyze", "--model", s(&model), "--wav", s(&empty_wav)])
            .status
            .code(),
        Some(4)
    );
    assert_eq!(
        affect(&["analyze", "--model", s(&model), "--wav", s(&empty_wav), "--hop", "0"])
            .status
            .code(),
        Some(2)
    );
}
