use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plotsearch"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn plotsearch")
}

fn ok_json(dir: &Path, args: &[&str]) -> Value {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

const CONFIG: &str = r#"
seed = 1
[search]
max_iterations = 10
frontier_cap = 8
ucb_descents = 4
[search.schedule]
first = 6
second = 3
later = 2
[value]
model = "model.json"
"#;

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), CONFIG).unwrap();
    std::fs::write(dir.path().join("p.txt"), "A map that redraws itself.\n").unwrap();
    let d = dir.path();
    ok_json(
        d,
        &[
            "gen-corpus",
            "--config",
            "c.toml",
            "--stories",
            "30",
            "--out",
            "corpus.jsonl",
        ],
    );
    ok_json(
        d,
        &[
            "train-value",
            "--config",
            "c.toml",
            "--corpus",
            "corpus.jsonl",
            "--out",
            "model.json",
        ],
    );
    dir
}

#[test]
fn value_commands() {
    let dir = setup();
    let d = dir.path();
    let eval = ok_json(
        d,
        &[
            "eval-value",
            "--config",
            "c.toml",
            "--corpus",
            "corpus.jsonl",
        ],
    );
    assert_eq!(eval["n"], 150);
    assert!(eval["macro_f1"].as_f64().unwrap() > 0.8);

    std::fs::write(
        d.join("story.txt"),
        "- kalo mimi renren.\n- talvor sendri muzel.\n",
    )
    .unwrap();
    let score = ok_json(d, &["score", "--config", "c.toml", "--story", "story.txt"]);
    let v = score["value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&v));
    assert_eq!(score["bullets"], 2);

    let tune = ok_json(
        d,
        &[
            "tune-curiosity",
            "--config",
            "c.toml",
            "--corpus",
            "corpus.jsonl",
            "--s0",
            "3:5:1",
            "--sigma",
            "0.6",
            "--folds",
            "3",
            "--repeats",
            "1",
            "--csv",
            "grid.csv",
        ],
    );
    assert_eq!(tune["s0_grid"].as_array().unwrap().len(), 3);
    let grid = std::fs::read_to_string(d.join("grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 3);
}

#[test]
fn search_outputs_and_tree_export() {
    let dir = setup();
    let d = dir.path();
    let summary = ok_json(
        d,
        &[
            "search",
            "--config",
            "c.toml",
            "--prompts",
            "p.txt",
            "--out",
            "run",
        ],
    );
    assert_eq!(summary["iterations"], 10);
    for f in [
        "tree.json",
        "reports.jsonl",
        "summary.json",
        "best_story.txt",
        "worst_story.txt",
    ] {
        assert!(d.join("run").join(f).exists(), "missing {f}");
    }
    let best = std::fs::read_to_string(d.join("run/best_story.txt")).unwrap();
    assert!(best.starts_with("A map that redraws itself."));

    let out = run(
        d,
        &["export-tree", "--tree", "run/tree.json", "--format", "dot"],
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("digraph"));

    let vq = ok_json(
        d,
        &[
            "analyze",
            "vq",
            "--tree",
            "run/tree.json",
            "--csv",
            "vq.csv",
        ],
    );
    assert!(vq["pearson_r"].as_f64().is_some());
    let speed = ok_json(
        d,
        &[
            "analyze",
            "speedup",
            "--reports",
            "run/reports.jsonl",
            "--gain",
            "0.0",
        ],
    );
    assert_eq!(speed[0]["iterations"], 8);
}

#[test]
fn stats_and_rate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.toml"), "").unwrap();
    std::fs::write(
        d.join("s.csv"),
        "id,new,old\n1,7,6\n2,8,6\n3,6,6\n4,9,7\n5,7,5\n",
    )
    .unwrap();
    let stats = ok_json(d, &["stats", "--csv", "s.csv", "--a", "new", "--b", "old"]);
    assert_eq!(stats["n"], 5);
    assert_eq!(stats["wilcoxon"]["n"], 4);
    assert!(stats["cles"].as_f64().unwrap() > 0.5);

    let bad = run(
        d,
        &["stats", "--csv", "s.csv", "--a", "new", "--b", "missing"],
    );
    assert!(!bad.status.success());

    std::fs::write(d.join("story.txt"), "- One.\n- Two.\n").unwrap();
    let rated = ok_json(
        d,
        &[
            "rate",
            "--config",
            "c.toml",
            "--stories",
            "story.txt",
            "--repeats",
            "4",
        ],
    );
    assert_eq!(rated[0]["ratings"], 4);
    assert_eq!(rated[0]["dimension_means"].as_object().unwrap().len(), 9);
}

#[test]
fn helpful_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.toml"), "").unwrap();
    std::fs::write(d.join("p.txt"), "x\n").unwrap();
    let out = run(
        d,
        &[
            "search",
            "--config",
            "c.toml",
            "--prompts",
            "p.txt",
            "--out",
            "o",
        ],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("value model"));

    std::fs::write(d.join("bad.toml"), "[search]\nexploration = -1.0\n").unwrap();
    let out = run(
        d,
        &["gen-corpus", "--config", "bad.toml", "--out", "c.jsonl"],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("exploration"));
}
