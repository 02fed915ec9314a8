use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn f10(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_f10"))
        .args(args)
        .env_remove("F10_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn classification_file(dir: &Path) -> String {
    let mut text = String::new();
    for i in 0..60 {
        if i % 2 == 0 {
            text.push_str(&format!("__label__pos great fun movie {}\n", i % 7));
        } else {
            text.push_str(&format!("__label__neg dull boring plot {}\n", i % 5));
        }
    }
    let path = dir.join("train.txt");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn conll_file(dir: &Path) -> String {
    let mut text = String::from("-DOCSTART- -X- O\n\n");
    for i in 0..30 {
        let city = ["Paris", "Berlin", "Rome"][i % 3];
        text.push_str(&format!("John B-PER\nSmith I-PER\nvisited O\n{city} B-LOC\n. O\n\n"));
        text.push_str(&format!("She O\nlikes O\n{city} B-LOC\n\n"));
    }
    let path = dir.join("train.conll");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn maxent_train_predict_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let train = classification_file(dir.path());
    let model = dir.path().join("m.f10m");
    let model = model.to_str().unwrap();

    let out = f10(&[
        "train", "--task", "maxent", "--train", &train, "--dev", &train, "--epochs", "4", "--ab-start", "3",
        "--alpha0", "0.5", "--threads", "1", "--model", model,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = stdout(&out);
    assert_eq!(log.lines().filter(|l| l.starts_with("epoch=")).count(), 4);
    assert!(log.lines().any(|l| l.starts_with("epoch=3") && l.ends_with(" ab")));
    assert!(log.contains("saved "));

    let input = dir.path().join("input.txt");
    fs::write(&input, "__label__pos great fun\nboring plot\n").unwrap();
    let out = f10(&["predict", "--model", model, "--input", input.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "pos\nneg\n");

    let out = f10(&["evaluate", "--model", model, "--test", &train]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("metric=accuracy value=1.000000"), "{}", stdout(&out));

    let out = f10(&["evaluate", "--task", "crf", "--model", model, "--test", &train]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn crf_train_predict_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let train = conll_file(dir.path());
    let gaz = dir.path().join("cities.txt");
    fs::write(&gaz, "Paris\nBerlin\n").unwrap();
    let gaz_arg = format!("LOC={}", gaz.display());
    let model = dir.path().join("crf.f10m");
    let model = model.to_str().unwrap();

    let out = f10(&[
        "train", "--task", "crf", "--train", &train, "--dev", &train, "--epochs", "10", "--ab-start", "7",
        "--alpha0", "0.1", "--l1", "1.0", "--l2", "1.0", "--threads", "1", "--seed", "42", "--gazetteer", &gaz_arg,
        "--model", model,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = f10(&["evaluate", "--task", "crf", "--model", model, "--test", &train]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("metric=f1 value=1.000000"), "{text}");

    let input = dir.path().join("in.conll");
    fs::write(&input, "Mary\nvisited\nRome\n\n").unwrap();
    let out = f10(&["predict", "--model", model, "--input", input.to_str().unwrap()]);
    assert!(out.status.success());
    let lines: Vec<String> = stdout(&out).lines().map(str::to_owned).collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[1], "visited O");
    assert_eq!(lines[2], "Rome B-LOC");
}

#[test]
fn grid_prints_table_and_best() {
    let dir = tempfile::tempdir().unwrap();
    let train = classification_file(dir.path());
    let out = f10(&[
        "grid", "--task", "maxent", "--train", &train, "--dev", &train, "--epochs", "2", "--threads", "1",
        "--alphas", "0.05,0.5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("alpha0=0.05 dev="));
    assert!(text.contains("alpha0=0.5 dev="));
    assert!(text.contains("best_alpha0="));

    let out = f10(&["grid", "--task", "maxent", "--train", &train, "--threads", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.f10m");
    let out = f10(&["predict", "--model", missing.to_str().unwrap(), "--input", "x"]);
    assert_eq!(out.status.code(), Some(2));

    assert_eq!(f10(&["train", "--unknown-flag"]).status.code(), Some(1));
    assert_eq!(f10(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(f10(&["--help"]).status.code(), Some(0));

    let train = classification_file(dir.path());
    let model = dir.path().join("m.f10m");
    let bad_alpha = f10(&[
        "train", "--task", "maxent", "--train", &train, "--alpha0", "-1", "--threads", "1", "--model",
        model.to_str().unwrap(),
    ]);
    assert_eq!(bad_alpha.status.code(), Some(1));

    let no_file = f10(&[
        "train", "--task", "maxent", "--train", "/nonexistent/data.txt", "--threads", "1", "--model",
        model.to_str().unwrap(),
    ]);
    assert_eq!(no_file.status.code(), Some(2));
}

#[test]
fn threads_default_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let train = classification_file(dir.path());
    let model = dir.path().join("m.f10m");
    let out = Command::new(env!("CARGO_BIN_EXE_f10"))
        .args(["train", "--task", "maxent", "--train", &train, "--epochs", "1", "--model"])
        .arg(&model)
        .env("F10_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = Command::new(env!("CARGO_BIN_EXE_f10"))
        .args(["train", "--task", "maxent", "--train", &train, "--epochs", "1", "--model"])
        .arg(&model)
        .env("F10_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
}
