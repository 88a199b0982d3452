//! Black-box tests driving the `tarnlab` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_tarnlab")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("TARNLAB_DATA_DIR")
        .output()
        .expect("spawn tarnlab")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn synth_corpus(dir: &Path, seed: u64) -> PathBuf {
    let data = dir.join("data");
    run_ok(&[
        "synth",
        "--topics",
        "3",
        "--per-topic",
        "6",
        "--images",
        "2",
        "--seed",
        &seed.to_string(),
        "--out",
        &path_str(&data),
    ]);
    data
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(
        &path,
        "learning_rate = 0.005\nmle_epochs = 3\nmixed_epochs = 2\nbatch_size = 4\n\
         d_h = 16\nd_e = 12\nmax_len = 10\n",
    )
    .unwrap();
    path
}

fn topics_sidecar(data: &Path) -> PathBuf {
    let out = data.join("topics.jsonl");
    run_ok(&[
        "topics",
        "--data",
        &path_str(&data.join("train.jsonl")),
        "--fixture",
        &path_str(&data.join("fixture.json")),
        "--out",
        &path_str(&out),
    ]);
    out
}

#[test]
fn synth_is_reproducible_and_splits_sum() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth_corpus(&dir.path().join("a"), 7);
    let b = synth_corpus(&dir.path().join("b"), 7);
    let mut total = 0;
    for name in ["train.jsonl", "val.jsonl", "test.jsonl", "fixture.json"] {
        let left = std::fs::read(a.join(name)).unwrap();
        let right = std::fs::read(b.join(name)).unwrap();
        assert_eq!(left, right, "split {name} differs between identical runs");
        if name.ends_with(".jsonl") {
            total += String::from_utf8(left).unwrap().lines().count();
        }
    }
    assert_eq!(total, 18); // 3 topics x 6 stories
}

#[test]
fn missing_required_flag_is_usage_error() {
    let out = run(&["synth", "--topics", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn topics_rerun_is_identical_and_blocklist_falls_back() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_corpus(dir.path(), 7);
    let first = topics_sidecar(&data);
    let bytes_first = std::fs::read(&first).unwrap();
    // Rerun with a blocklist path that does not exist: built-in list
    // plus a notice, same output.
    let out = run_ok(&[
        "topics",
        "--data",
        &path_str(&data.join("train.jsonl")),
        "--fixture",
        &path_str(&data.join("fixture.json")),
        "--blocklist",
        &path_str(&data.join("missing-blocklist.txt")),
        "--out",
        &path_str(&first),
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("built-in"));
    assert_eq!(std::fs::read(&first).unwrap(), bytes_first);
}

#[test]
fn train_log_and_checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_corpus(dir.path(), 7);
    let topics = topics_sidecar(&data);
    let config = write_config(dir.path());
    let run_dir = dir.path().join("run");
    run_ok(&[
        "train",
        "--data",
        &path_str(&data.join("train.jsonl")),
        "--topics",
        &path_str(&topics),
        "--fixture",
        &path_str(&data.join("fixture.json")),
        "--config",
        &path_str(&config),
        "--out",
        &path_str(&run_dir),
    ]);
    let log = std::fs::read_to_string(run_dir.join("train_log.jsonl")).unwrap();
    // 16 train samples, batch 4: 4 steps per epoch, 3 MLE + 2 mixed epochs.
    assert_eq!(log.lines().count(), 20);

    let generated = run_dir.join("generated.jsonl");
    run_ok(&[
        "generate",
        "--checkpoint",
        &path_str(&run_dir.join("checkpoint.json")),
        "--data",
        &path_str(&data.join("val.jsonl")),
        "--fixture",
        &path_str(&data.join("fixture.json")),
        "--max-len",
        "10",
        "--out",
        &path_str(&generated),
    ]);
    let first = std::fs::read(&generated).unwrap();
    run_ok(&[
        "generate",
        "--checkpoint",
        &path_str(&run_dir.join("checkpoint.json")),
        "--data",
        &path_str(&data.join("val.jsonl")),
        "--fixture",
        &path_str(&data.join("fixture.json")),
        "--max-len",
        "10",
        "--out",
        &path_str(&generated),
    ]);
    assert_eq!(std::fs::read(&generated).unwrap(), first, "greedy decode not deterministic");

    // Album ids match the input split one-to-one.
    let val = std::fs::read_to_string(data.join("val.jsonl")).unwrap();
    let gen = String::from_utf8(first).unwrap();
    let ids = |text: &str| -> Vec<String> {
        text.lines()
            .map(|l| {
                serde_json::from_str::<serde_json::Value>(l).unwrap()["album_id"]
                    .as_str()
                    .unwrap()
                    .to_string()
            })
            .collect()
    };
    assert_eq!(ids(&gen), ids(&val));
}

#[test]
fn corrupted_checkpoint_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_corpus(dir.path(), 7);
    let topics = topics_sidecar(&data);
    let config = write_config(dir.path());
    let run_dir = dir.path().join("run");
    run_ok(&[
        "train",
        "--data",
        &path_str(&data.join("train.jsonl")),
        "--topics",
        &path_str(&topics),
        "--fixture",
        &path_str(&data.join("fixture.json")),
        "--config",
        &path_str(&config),
        "--out",
        &path_str(&run_dir),
    ]);
    let ckpt_path = run_dir.join("checkpoint.json");
    let mut ckpt: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&ckpt_path).unwrap()).unwrap();
    ckpt["vocab_hash"] = serde_json::json!("deadbeef");
    std::fs::write(&ckpt_path, serde_json::to_string(&ckpt).unwrap()).unwrap();
    let out = run(&[
        "generate",
        "--checkpoint",
        &path_str(&ckpt_path),
        "--data",
        &path_str(&data.join("val.jsonl")),
        "--fixture",
        &path_str(&data.join("fixture.json")),
        "--out",
        &path_str(&run_dir.join("g.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("integrity"));
}

#[test]
fn self_evaluation_is_perfect_and_externals_merge() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_corpus(dir.path(), 7);
    // Build a "generated" file directly from the references.
    let train = std::fs::read_to_string(data.join("train.jsonl")).unwrap();
    let mut generated = String::new();
    for line in train.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        generated.push_str(
            &serde_json::json!({
                "album_id": v["album_id"],
                "sentences": v["sentences"],
            })
            .to_string(),
        );
        generated.push('\n');
    }
    let gen_path = dir.path().join("generated.jsonl");
    std::fs::write(&gen_path, generated).unwrap();
    let external = dir.path().join("external.json");
    std::fs::write(&external, r#"{"meteor": 0.31}"#).unwrap();
    let eval_dir = dir.path().join("eval");
    run_ok(&[
        "evaluate",
        "--generated",
        &path_str(&gen_path),
        "--data",
        &path_str(&data.join("train.jsonl")),
        "--external",
        &path_str(&external),
        "--out",
        &path_str(&eval_dir),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval_dir.join("report.json")).unwrap())
            .unwrap();
    assert!((report["bleu"][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((report["external"]["meteor"].as_f64().unwrap() - 0.31).abs() < 1e-12);
    assert!(eval_dir.join("metrics.svg").exists());
}

#[test]
fn evaluate_id_mismatch_lists_offenders() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_corpus(dir.path(), 7);
    let gen_path = dir.path().join("generated.jsonl");
    std::fs::write(
        &gen_path,
        "{\"album_id\":\"bogus-album\",\"sentences\":[\"x\",\"y\"]}\n",
    )
    .unwrap();
    let out = run(&[
        "evaluate",
        "--generated",
        &path_str(&gen_path),
        "--data",
        &path_str(&data.join("val.jsonl")),
        "--out",
        &path_str(&dir.path().join("eval")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bogus-album"), "offender missing: {stderr}");
}

#[test]
fn malformed_dataset_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "not json at all\n").unwrap();
    let fixture = dir.path().join("fixture.json");
    std::fs::write(&fixture, "{}").unwrap();
    let out = run(&[
        "topics",
        "--data",
        &path_str(&bad),
        "--fixture",
        &path_str(&fixture),
        "--out",
        &path_str(&dir.path().join("t.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn data_dir_env_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(bin())
        .args(["synth", "--topics", "2", "--per-topic", "4", "--seed", "3", "--out", "envdata"])
        .env("TARNLAB_DATA_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("envdata").join("train.jsonl").exists());
}

#[test]
fn manifests_record_inputs_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_corpus(dir.path(), 7);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "synth");
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 4);
    let topics = topics_sidecar(&data);
    let tm: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(data.join("topics.jsonl.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(tm["command"], "topics");
    assert_eq!(tm["inputs"].as_object().unwrap().len(), 2);
    assert!(topics.exists());
}
