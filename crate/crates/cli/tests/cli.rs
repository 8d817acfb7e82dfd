use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn parclust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parclust"))
        .args(args)
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn gen(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut args = vec!["gen", "--out", path.to_str().unwrap()];
    args.extend(extra);
    let out = parclust(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    path
}

fn four_blobs(dir: &Path) -> PathBuf {
    gen(
        dir,
        "four.csv",
        &[
            "--seed",
            "5",
            "--clusters",
            "4",
            "--per-cluster",
            "50",
            "--separation",
            "30",
        ],
    )
}

#[test]
fn gen_writes_data_and_labels_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let extra = [
        "--seed",
        "7",
        "--clusters",
        "4",
        "--per-cluster",
        "25",
        "--dim",
        "3",
    ];
    let a = gen(dir.path(), "a.csv", &extra);
    let b = gen(dir.path(), "b.csv", &extra);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 100);
    assert!(text.lines().all(|l| l.split(',').count() == 3));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let la = std::fs::read(dir.path().join("a.labels.csv")).unwrap();
    let lb = std::fs::read(dir.path().join("b.labels.csv")).unwrap();
    assert_eq!(la, lb);
}

#[test]
fn gen_into_missing_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nope").join("x.csv");
    let out = parclust(&["gen", "--out", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("x.csv"));
}

#[test]
fn one_node_pkm_equals_kmeans() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), "d.csv", &["--seed", "3"]);
    let data = data.to_str().unwrap();
    let a = json(&parclust(&[
        "run", "--algo", "pkm", "--nodes", "1", "--data", data, "--k", "3",
    ]));
    let b = json(&parclust(&[
        "run", "--algo", "kmeans", "--data", data, "--k", "3",
    ]));
    assert_eq!(a["labels"], b["labels"]);
    assert_eq!(a["j"], b["j"]);
}

#[test]
fn pddp_height_two_finds_four_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let data = four_blobs(dir.path());
    let v = json(&parclust(&[
        "run",
        "--algo",
        "pddp",
        "--nodes",
        "3",
        "--height",
        "2",
        "--data",
        data.to_str().unwrap(),
    ]));
    let mut labels: Vec<i64> = v["labels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| l.as_i64().unwrap())
        .collect();
    labels.sort_unstable();
    labels.dedup();
    assert_eq!(labels, vec![0, 1, 2, 3]);
}

#[test]
fn report_has_expected_fields() {
    let dir = tempfile::tempdir().unwrap();
    let data = four_blobs(dir.path());
    let v = json(&parclust(&[
        "run",
        "--algo",
        "pfcm",
        "--nodes",
        "2",
        "--k",
        "4",
        "--data",
        data.to_str().unwrap(),
    ]));
    for key in [
        "algo",
        "labels",
        "centroids",
        "j",
        "iterations",
        "timings_ms",
    ] {
        assert!(v.get(key).is_some(), "missing {key}: {v}");
    }
    assert_eq!(v["labels"].as_array().unwrap().len(), 200);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = four_blobs(dir.path());
    let data = data.to_str().unwrap();
    for args in [
        vec!["run", "--algo", "pkm", "--nodes", "0", "--data", data],
        vec!["run", "--algo", "nonsense", "--data", data],
        vec!["run", "--algo", "kmeans", "--nodes", "2", "--data", data],
        vec!["run", "--algo", "pkm", "--k", "0", "--data", data],
    ] {
        assert_eq!(parclust(&args).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn missing_data_file_is_a_runtime_error() {
    let out = parclust(&[
        "run",
        "--algo",
        "kmeans",
        "--data",
        "/definitely/not/here.csv",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_pkm_matches_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let data = four_blobs(dir.path());
    let v = json(&parclust(&[
        "bench",
        "--algo",
        "pkm",
        "--nodes",
        "1,2",
        "--k",
        "4",
        "--data",
        data.to_str().unwrap(),
    ]));
    assert_eq!(v["baseline"], "kmeans");
    let runs = v["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    for r in runs {
        assert_eq!(r["ari_vs_baseline"].as_f64(), Some(1.0));
        assert!(r["wall_ms"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn bench_requires_node_counts() {
    let dir = tempfile::tempdir().unwrap();
    let data = four_blobs(dir.path());
    let data = data.to_str().unwrap();
    assert!(!parclust(&["bench", "--algo", "pkm", "--data", data])
        .status
        .success());
    assert!(
        !parclust(&["bench", "--algo", "pkm", "--nodes", "", "--data", data])
            .status
            .success()
    );
}

#[test]
fn bench_ddbc_against_dbscan() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(
        dir.path(),
        "noisy.csv",
        &[
            "--seed",
            "4",
            "--per-cluster",
            "200",
            "--separation",
            "20",
            "--outliers",
            "20",
        ],
    );
    let v = json(&parclust(&[
        "bench",
        "--algo",
        "ddbc",
        "--nodes",
        "2,4",
        "--eps",
        "1",
        "--min-pts",
        "5",
        "--data",
        data.to_str().unwrap(),
    ]));
    assert_eq!(v["baseline"], "dbscan");
    for r in v["runs"].as_array().unwrap() {
        assert!(r["ari_vs_baseline"].as_f64().unwrap() >= 0.9, "{r}");
    }
}
