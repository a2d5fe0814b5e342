use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use hopqa::corpus::{write_corpus, write_questions};
use hopqa::synth::bridge_task;

const CONFIG: &str = r#"
seed = 3
facts_per_input = 4
sweep_counts = [0, 2, 4]

[paths]
train_questions = "train.jsonl"
eval_questions = "eval.jsonl"

[[paths.corpus]]
path = "facts.jsonl"

[ranker.encoder]
d_model = 8
n_heads = 2
n_layers = 1
d_ff = 16
max_len = 64

[ranker.train]
epochs = 2
batch_size = 8

[qa.encoder]
d_model = 8
n_heads = 2
n_layers = 1
d_ff = 16
max_len = 96

[qa.train]
epochs = 2
batch_size = 4
"#;

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let (questions, corpus) = bridge_task(12, 4, 7);
    write_corpus(dir.path().join("facts.jsonl"), corpus.facts()).unwrap();
    write_questions(dir.path().join("train.jsonl"), &questions[..8]).unwrap();
    write_questions(dir.path().join("eval.jsonl"), &questions[8..]).unwrap();
    fs::write(dir.path().join("config.toml"), CONFIG).unwrap();
    dir
}

fn hopqa(dir: &Path, args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_hopqa"))
        .current_dir(dir)
        .args(["--config", "config.toml", "--out", "out"])
        .args(args)
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(
        out.status.success(),
        "hopqa {args:?} failed:\n{stdout}\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    stdout
}

fn out(dir: &Path, name: &str) -> PathBuf {
    dir.join("out").join(name)
}

#[test]
fn full_pipeline() {
    let tmp = setup();
    let dir = tmp.path();
    assert!(hopqa(dir, &["index"]).contains("indexed"));
    hopqa(dir, &["build-rankdata"]);
    let train = fs::read_to_string(out(dir, "rank_train.jsonl")).unwrap();
    assert!(train.lines().count() > 0);

    let table = hopqa(dir, &["train-ranker"]);
    assert!(table.starts_with("split"));
    assert!(out(dir, "ranker.ckpt").exists());

    let retrieved = hopqa(dir, &["retrieve"]);
    assert!(retrieved.contains("F2 R@10"));
    assert_eq!(
        fs::read_to_string(out(dir, "traces.jsonl")).unwrap().lines().count(),
        4 * 4
    );

    fs::write(
        dir.join("pairs.jsonl"),
        "{\"question\":\"what\",\"answer\":\"x\",\"fact\":\"y z\"}\n",
    )
    .unwrap();
    hopqa(dir, &["rank", "--input", "pairs.jsonl"]);
    let scored: serde_json::Value =
        serde_json::from_str(fs::read_to_string(out(dir, "scores.jsonl")).unwrap().trim()).unwrap();
    let p = scored["probability"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));

    hopqa(dir, &["train-qa"]);
    assert!(out(dir, "qa.ckpt").exists());
    hopqa(dir, &["answer"]);
    assert_eq!(
        fs::read_to_string(out(dir, "predictions.jsonl"))
            .unwrap()
            .lines()
            .count(),
        4
    );

    let report = hopqa(dir, &["eval"]);
    assert!(report.contains("qa accuracy"));
    let csv = fs::read_to_string(out(dir, "histogram.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("bin_low,bin_high,correct_count,incorrect_count"));
    let total: usize = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            f[2].parse::<usize>().unwrap() + f[3].parse::<usize>().unwrap()
        })
        .sum();
    assert_eq!(total, 4);

    let sweep = hopqa(dir, &["sweep"]);
    assert_eq!(sweep.lines().count(), 2 + 3);
    assert_eq!(fs::read_to_string(out(dir, "sweep.jsonl")).unwrap().lines().count(), 3);
}

#[test]
fn ablation_grid_and_determinism() {
    let tmp = setup();
    let dir = tmp.path();
    hopqa(dir, &["index"]);
    hopqa(dir, &["build-rankdata"]);
    hopqa(dir, &["train-ranker"]);
    let first = hopqa(dir, &["ablate", "--grid", "step-skr"]);
    let rows = fs::read_to_string(out(dir, "ablation.jsonl")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 4);
    assert!(rows.lines().next().unwrap().contains("No Knowledge"));
    let second = hopqa(dir, &["ablate", "--grid", "step-skr"]);
    assert_eq!(first, second);
    assert_eq!(rows, fs::read_to_string(out(dir, "ablation.jsonl")).unwrap());
}

#[test]
fn seed_flag_changes_ranker() {
    let tmp = setup();
    let dir = tmp.path();
    hopqa(dir, &["index"]);
    hopqa(dir, &["build-rankdata"]);
    hopqa(dir, &["train-ranker"]);
    let a = fs::read(out(dir, "ranker.ckpt")).unwrap();
    hopqa(dir, &["train-ranker"]);
    assert_eq!(a, fs::read(out(dir, "ranker.ckpt")).unwrap());
    hopqa(dir, &["--seed", "99", "train-ranker"]);
    assert_ne!(a, fs::read(out(dir, "ranker.ckpt")).unwrap());
}

#[test]
fn missing_ranker_is_reported() {
    let tmp = setup();
    let dir = tmp.path();
    hopqa(dir, &["index"]);
    let out = Command::new(env!("CARGO_BIN_EXE_hopqa"))
        .current_dir(dir)
        .args(["--config", "config.toml", "--out", "out", "retrieve"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("train-ranker"));
}
