mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::*;
use fssl_core::metrics::{load_csv, Summary, CSV_HEADER};

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sim")).args(args).output().expect("sim runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn tiny_json(strategy: &str) -> String {
    tiny_config(strategy).to_json_pretty()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn print_config_materializes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "min.json", r#"{"task": {"kind": "synthetic"}, "strategy": "suma"}"#);
    let out = sim(&["run", s(&cfg), "--print-config", "--seed", "42"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["seed"], 42);
    assert_eq!(value["residual_width_fraction"], 0.25);
    assert!(value.get("gamma").is_some() && value.get("tau").is_some());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.json", r#"{"task": {"kind": "synthetic"}, "strategy": "suma", "gamma": -1}"#);
    let out = sim(&["run", s(&bad)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma"));

    let unknown = write_config(dir.path(), "unknown.json", r#"{"task": {"kind": "synthetic"}, "strategy": "suma", "gama": 1}"#);
    assert_eq!(code(&sim(&["run", s(&unknown)])), 1);
    assert_eq!(code(&sim(&["run"])), 1);
    assert_eq!(code(&sim(&["suite", "nonsense", s(&bad)])), 1);

    let missing = write_config(
        dir.path(),
        "missing.json",
        r#"{"task": {"kind": "idx", "train_images": "/nonexistent/a", "train_labels": "/nonexistent/b",
            "test_images": "/nonexistent/c", "test_labels": "/nonexistent/d"}, "strategy": "fedavg"}"#,
    );
    assert_eq!(code(&sim(&["run", s(&missing)])), 2);

    let mut diverging = tiny_config("fedavg");
    diverging.learning_rate = 1e300;
    let diverging = write_config(dir.path(), "div.json", &diverging.to_json_pretty());
    let out = sim(&["run", s(&diverging)]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));

    let out = sim(&["suite", "ablation", s(&diverging), "--out", s(&dir.path().join("suite"))]);
    assert_eq!(code(&out), 3);
    assert!(dir.path().join("suite/failures.json").exists());
}

#[test]
fn run_directory_is_complete_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tiny.json", &tiny_json("suma"));
    let first = dir.path().join("a");
    let out = sim(&["run", s(&cfg), "--out", s(&first)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["config.json", "metrics.csv", "summary.json"] {
        assert!(first.join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(first.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(csv.lines().count(), 1 + tiny_config("suma").rounds);

    // The resolved config alone reproduces the run.
    let second = dir.path().join("b");
    assert_eq!(code(&sim(&["run", s(&first.join("config.json")), "--out", s(&second)])), 0);
    for f in ["config.json", "metrics.csv", "summary.json"] {
        assert_eq!(std::fs::read(first.join(f)).unwrap(), std::fs::read(second.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn partition_dump_lists_every_client() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tiny.json", &tiny_json("suma"));
    let dump = dir.path().join("clients.json");
    assert_eq!(code(&sim(&["partition", s(&cfg), "--dump", s(&dump)])), 0);
    let clients: Vec<serde_json::Value> = serde_json::from_str(&std::fs::read_to_string(&dump).unwrap()).unwrap();
    assert_eq!(clients.len(), 6);
    let total: u64 = clients
        .iter()
        .map(|c| c["n_labeled"].as_u64().unwrap() + c["n_unlabeled"].as_u64().unwrap())
        .sum();
    assert_eq!(total, 120);
    assert_eq!(clients[0]["kind"], "fully_labeled");
    assert_eq!(clients[3]["kind"], "unlabeled");
}

#[test]
fn ablation_suite_writes_twelve_runs_and_a_consistent_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tiny.json", &tiny_json("suma"));
    let out_dir = dir.path().join("runs");
    let out = sim(&["suite", "ablation", s(&cfg), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let mut csvs: Vec<PathBuf> = Vec::new();
    for cell in std::fs::read_dir(&out_dir).unwrap() {
        let cell = cell.unwrap().path();
        if cell.is_dir() {
            for run in std::fs::read_dir(&cell).unwrap() {
                csvs.push(run.unwrap().path().join("metrics.csv"));
            }
        }
    }
    assert_eq!(csvs.len(), 12);

    // Recompute the means straight from the CSV files.
    let summary: Summary = serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.cells.len(), 4);
    for cell in &summary.cells {
        assert_eq!(cell.seeds.len(), 3);
        let finals: Vec<f64> = cell
            .seeds
            .iter()
            .map(|seed| {
                let path = out_dir.join(&cell.name).join(format!("seed-{seed}")).join("metrics.csv");
                load_csv(&path).unwrap().last().unwrap().acc_em
            })
            .collect();
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        assert!((mean - cell.mean.em).abs() < 1e-12, "{}", cell.name);
    }
}

#[test]
fn plots_are_deterministic_and_shaped() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for (i, strategy) in ["suma", "fedavg", "fedprox", "fedpseudo", "suma"].iter().enumerate() {
        let mut cfg = tiny_config(strategy);
        cfg.seed = i as u64;
        let path = write_config(dir.path(), &format!("c{i}.json"), &cfg.to_json_pretty());
        let run = dir.path().join(format!("run{i}"));
        assert_eq!(code(&sim(&["run", s(&path), "--out", s(&run)])), 0);
        let csv = dir.path().join(format!("setting{i}.csv"));
        std::fs::copy(run.join("metrics.csv"), &csv).unwrap();
        csvs.push(csv);
    }

    let curve = dir.path().join("curve.svg");
    assert_eq!(code(&sim(&["plot", "curve", s(&curve), s(&csvs[0])])), 0);
    let svg = std::fs::read_to_string(&curve).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert_eq!(svg.matches("<polyline").count(), 3);

    let mut args = vec!["plot", "bar"];
    let bar = dir.path().join("bar.svg");
    args.push(s(&bar));
    args.extend(csvs.iter().map(|p| s(p)));
    assert_eq!(code(&sim(&args)), 0);
    let first = std::fs::read(&bar).unwrap();
    assert_eq!(String::from_utf8_lossy(&first).matches("<g class=\"group\"").count(), 5);
    assert_eq!(code(&sim(&args)), 0);
    assert_eq!(first, std::fs::read(&bar).unwrap());

    let empty = write_config(dir.path(), "empty.csv", "");
    assert_ne!(code(&sim(&["plot", "curve", s(&dir.path().join("x.svg")), s(&empty)])), 0);
}
