use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

fn puffscan(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_puffscan"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn ok(args: &[&str]) -> String {
    let (code, stdout, stderr) = puffscan(args);
    assert_eq!(code, 0, "{args:?} failed: {stderr}");
    stdout
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

/// Small labeled stream plus a quickly trained MLP.
fn fixture(dir: &TempDir) -> (String, String) {
    let data = p(dir, "s.csv");
    let model = p(dir, "m.txt");
    ok(&["generate", "--out", &data, "--seed", "3", "--puffs", "6", "--distractors", "2"]);
    ok(&["train", "--data", &data, "--model", &model, "--epochs", "3", "--balance-factor", "3"]);
    (data, model)
}

#[test]
fn generate_writes_stream_sidecars_and_is_seeded() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (p(&dir, "a.csv"), p(&dir, "b.csv"));
    ok(&["generate", "--out", &a, "--seed", "9", "--puffs", "3"]);
    ok(&["generate", "--out", &b, "--seed", "9", "--puffs", "3"]);
    assert_eq!(read(&a), read(&b));
    let truth = String::from_utf8(read(format!("{a}.truth.csv"))).unwrap();
    assert_eq!(truth.lines().count(), 4);
    assert!(String::from_utf8(read(format!("{a}.meta"))).unwrap().contains("feature_order=xyz-interleaved"));
    let manifest = String::from_utf8(read(format!("{a}.manifest"))).unwrap();
    assert!(manifest.starts_with("format=puffscan-manifest/1\n"));
    assert!(manifest.contains("\npuffs=3\n"));
    assert!(Path::new(&format!("{a}.manifest.timing")).exists());
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "x.csv");
    assert_eq!(puffscan(&["generate", "--out", &out, "--puffs", "-1"]).0, 2);
    assert_eq!(puffscan(&["generate"]).0, 2);
    assert_eq!(puffscan(&["generate", "--out", &out, "--hol-min", "3", "--hol-max", "1"]).0, 2);
    assert_eq!(puffscan(&["frobnicate"]).0, 2);
    let (code, _, stderr) = puffscan(&[
        "detect", "--model", "m.txt", "--data", "s.csv", "--min-hol", "3", "--max-hol", "0.5",
    ]);
    assert_eq!(code, 2, "{stderr}");
}

#[test]
fn missing_input_exits_3() {
    let dir = TempDir::new().unwrap();
    let (code, _, stderr) = puffscan(&["train", "--data", &p(&dir, "nope.csv"), "--model", &p(&dir, "m")]);
    assert_eq!(code, 3, "{stderr}");
    assert_eq!(puffscan(&["replay", &p(&dir, "nope.manifest")]).0, 3);
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = p(&dir, "gen.conf");
    let out = p(&dir, "c.csv");
    fs::write(&cfg, "format=puffscan-config/1\n# comment\npuffs = 2\nseed=4\nrest-min=1\n").unwrap();
    ok(&["generate", "--config", &cfg, "--out", &out, "--seed", "5"]);
    let manifest = String::from_utf8(read(format!("{out}.manifest"))).unwrap();
    assert!(manifest.contains("\npuffs=2\n"));
    assert!(manifest.contains("\nseed=5\n"));
    assert!(manifest.contains("\nrest_min=1\n"));

    fs::write(&cfg, "pufs=2\n").unwrap();
    assert_eq!(puffscan(&["generate", "--config", &cfg, "--out", &out]).0, 2);
}

#[test]
fn eval_twice_gives_identical_reports() {
    let dir = TempDir::new().unwrap();
    let (data, model) = fixture(&dir);
    let (r1, r2) = (p(&dir, "r1.csv"), p(&dir, "r2.csv"));
    ok(&["eval", "--model", &model, "--data", &data, "--report", &r1]);
    ok(&["eval", "--model", &model, "--data", &data, "--report", &r2]);
    let text = read(&r1);
    assert_eq!(text, read(&r2));
    let text = String::from_utf8(text).unwrap();
    assert_eq!(text.lines().count(), 8);
    assert!(text.starts_with("class,precision,recall,f1,support\n"));
    ok(&["eval", "--model", &model, "--data", &data, "--report", &r1, "--all"]);
}

#[test]
fn feature_order_mismatch_exits_6() {
    let dir = TempDir::new().unwrap();
    let (data, model) = fixture(&dir);
    let meta = format!("{data}.meta");
    let text = String::from_utf8(read(&meta)).unwrap();
    fs::write(&meta, text.replace("xyz-interleaved", "xyz-planar")).unwrap();
    let (code, _, stderr) = puffscan(&["eval", "--model", &model, "--data", &data]);
    assert_eq!(code, 6, "{stderr}");
    assert!(stderr.contains("incompatible inputs"));
    assert_eq!(puffscan(&["detect", "--model", &model, "--data", &data]).0, 6);
}

#[test]
fn wrong_sample_rate_exits_6() {
    let dir = TempDir::new().unwrap();
    let (data, model) = fixture(&dir);
    let other = p(&dir, "fast.csv");
    ok(&["generate", "--out", &other, "--sample-rate", "50", "--puffs", "2"]);
    assert_eq!(puffscan(&["detect", "--model", &model, "--data", &other]).0, 6);
    fs::remove_file(format!("{other}.meta")).unwrap();
    assert_eq!(puffscan(&["detect", "--model", &model, "--data", &other]).0, 6);
    ok(&["detect", "--model", &model, "--data", &other, "--rate-check", "false"]);
    let _ = data;
}

#[test]
fn corrupted_model_is_a_parse_error() {
    let dir = TempDir::new().unwrap();
    let (data, model) = fixture(&dir);
    let text = String::from_utf8(read(&model)).unwrap();
    let tampered = text.replacen("blocks=", "blocks= ", 1);
    fs::write(&model, tampered).unwrap();
    assert_eq!(puffscan(&["eval", "--model", &model, "--data", &data]).0, 4);
}

#[test]
fn short_stream_detects_nothing() {
    let dir = TempDir::new().unwrap();
    let (data, model) = fixture(&dir);
    let text = String::from_utf8(read(&data)).unwrap();
    let short = p(&dir, "short.csv");
    let head: Vec<&str> = text.lines().take(11).collect();
    fs::write(&short, head.join("\n") + "\n").unwrap();
    let events = p(&dir, "ev.csv");
    let stdout = ok(&["detect", "--model", &model, "--data", &short, "--events", &events]);
    assert!(stdout.contains("0 puffs"));
    assert_eq!(
        String::from_utf8(read(&events)).unwrap(),
        "kind,start_sample,end_sample,hol_duration_s,session_id\n"
    );
}

#[test]
fn detect_writes_puffs_then_sessions() {
    let dir = TempDir::new().unwrap();
    let (data, model) = fixture(&dir);
    let events = p(&dir, "ev.csv");
    ok(&["detect", "--model", &model, "--data", &data, "--events", &events, "--min-puffs", "1"]);
    let text = String::from_utf8(read(&events)).unwrap();
    let kinds: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    let first_session = kinds.iter().position(|k| *k == "session").unwrap_or(kinds.len());
    assert!(kinds[first_session..].iter().all(|k| *k == "session"));
}

#[test]
fn sweep_grid_has_one_ranked_row_per_point() {
    let dir = TempDir::new().unwrap();
    let (data, _) = fixture(&dir);
    let out = p(&dir, "sweep.csv");
    ok(&[
        "sweep", "--data", &data, "--out", &out, "--epochs", "1,2", "--batches", "50,100", "--layers", "1,2",
        "--balance-factor", "3",
    ]);
    let text = String::from_utf8(read(&out)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "rank,epoch,batch,arch,params,loss,val_loss,acc,val_acc,test_acc");
    assert_eq!(lines.len(), 9);
    for (i, line) in lines[1..].iter().enumerate() {
        assert!(line.starts_with(&format!("{},", i + 1)));
    }
    let single = p(&dir, "single.csv");
    ok(&["sweep", "--data", &data, "--out", &single, "--epochs", "1,2", "--batches", "50,100", "--layers", "1,2",
        "--balance-factor", "3", "--jobs", "1"]);
    assert_eq!(read(&out), read(&single));

    assert_eq!(puffscan(&["sweep", "--data", &data, "--out", &out, "--layers", ""]).0, 2);
}

#[test]
fn lstm_family_trains_and_evaluates() {
    let dir = TempDir::new().unwrap();
    let (data, _) = fixture(&dir);
    let model = p(&dir, "lstm.txt");
    ok(&["train", "--data", &data, "--model", &model, "--family", "lstm", "--units", "2", "--epochs", "2"]);
    let text = String::from_utf8(read(&model)).unwrap();
    assert!(text.contains("family=lstm"));
    assert!(text.contains("loss=mse"));
    ok(&["eval", "--model", &model, "--data", &data]);
    assert_eq!(
        puffscan(&["train", "--data", &data, "--model", &model, "--family", "lstm", "--units", "5"]).0,
        2
    );
}

fn manifest_of(artifact: &str) -> PathBuf {
    PathBuf::from(format!("{artifact}.manifest"))
}

#[test]
fn replay_reproduces_train_bytes() {
    let dir = TempDir::new().unwrap();
    let (_, model) = fixture(&dir);
    let before = (read(&model), read(format!("{model}.trace.csv")), read(manifest_of(&model)));
    fs::remove_file(&model).unwrap();
    ok(&["replay", manifest_of(&model).to_str().unwrap()]);
    let after = (read(&model), read(format!("{model}.trace.csv")), read(manifest_of(&model)));
    assert!(before == after, "replayed training differs");
}
