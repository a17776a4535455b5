use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fedgnids::experiment::{RunStatus, RunSummary};
use fedgnids::io::{read_json, read_pr_curve};
use tempfile::TempDir;

fn fedgnids(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedgnids"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = fedgnids(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// A small synthetic dataset plus a config pointing at it.
fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("spec.toml"),
        "nodes = 90\nblocks = 3\nsnapshots = 14\np_in = 0.05\nanomalies = 20\nseed = 5\n",
    )
    .unwrap();
    ok(&["synth", "--spec", "spec.toml", "--out", "data"], dir.path());
    fs::write(
        dir.path().join("exp.toml"),
        "seed = 2\noutput = \"runs/default\"\n\n[data]\ncsv = \"data/edges.csv\"\n\n\
         [model]\nd_h = 16\nd_z = 8\n\n[federation]\nclients = 3\nrounds = 8\n",
    )
    .unwrap();
    dir
}

fn summary(run: &Path) -> RunSummary {
    read_json(&run.join("metrics.json")).unwrap()
}

#[test]
fn synth_train_eval_pipeline() {
    let ws = workspace();
    let root = ws.path();
    for f in ["edges.csv", "blocks.csv", "id_map.csv", "spec.toml"] {
        assert!(root.join("data").join(f).is_file(), "{f}");
    }
    let malicious = fs::read_to_string(root.join("data/edges.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .filter(|l| l.ends_with(",1"))
        .count();
    assert_eq!(malicious, 20);

    ok(&["train", "--config", "exp.toml", "--scheme", "entente"], root);
    let run = root.join("runs/default");
    for f in ["config.toml", "history.json", "model.bin", "model.json", "weights.csv"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let printed = ok(&["eval", "--run", "runs/default"], root);
    assert!(printed.starts_with("entente: AP"), "{printed}");

    let s = summary(&run);
    assert_eq!(s.status, RunStatus::Completed);
    let m = s.metrics.unwrap();
    assert!((0.0..=1.0).contains(&m.ap) && (0.0..=1.0).contains(&m.auc));

    // the stored curve integrates back to the reported AP
    let curve = read_pr_curve(&run.join("pr_curve.csv")).unwrap();
    let mut ap = 0.0;
    let mut last_recall = 0.0;
    for p in &curve {
        ap += (p.recall - last_recall) * p.precision;
        last_recall = p.recall;
    }
    assert!((ap - m.ap).abs() < 1e-9, "{ap} vs {}", m.ap);
    assert_eq!(last_recall, 1.0);
}

#[test]
fn training_is_byte_identical_across_worker_counts() {
    let ws = workspace();
    let root = ws.path();
    let mut seen: Vec<(Vec<u8>, Vec<u8>)> = Vec::new();
    for (i, workers) in ["1", "3", "1"].iter().enumerate() {
        let out = format!("runs/w{i}");
        ok(
            &["train", "--config", "exp.toml", "--out", &out, "--workers", workers, "--seed", "9"],
            root,
        );
        let dir = root.join(&out);
        seen.push((
            fs::read(dir.join("weights.csv")).unwrap(),
            fs::read(dir.join("history.json")).unwrap(),
        ));
    }
    assert!(seen.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn seed_flag_changes_the_run() {
    let ws = workspace();
    let root = ws.path();
    ok(&["train", "--config", "exp.toml", "--out", "a", "--seed", "1"], root);
    ok(&["train", "--config", "exp.toml", "--out", "b", "--seed", "2"], root);
    let read = |d: &str| fs::read(root.join(d).join("weights.csv")).unwrap();
    assert_ne!(read("a"), read("b"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| fedgnids(args, dir.path()).status.code();
    assert_eq!(code(&["frobnicate"]), Some(2));
    assert_eq!(code(&["train", "--config", "x.toml", "--bogus"]), Some(2));
    assert_eq!(code(&["train", "--config", "x.toml", "--scheme", "median"]), Some(2));
    assert_eq!(code(&["train"]), Some(2));

    let out = fedgnids(&["train", "--config", "missing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: ") && err.contains("missing.toml"), "{err}");

    fs::write(dir.path().join("bad.toml"), "[data]\ncsv = \"nowhere.csv\"\n").unwrap();
    assert_eq!(code(&["train", "--config", "bad.toml"]), Some(1));
    assert_eq!(code(&["eval", "--run", "no-such-run"]), Some(1));
}

#[test]
fn attack_needs_clients() {
    let ws = workspace();
    let out = fedgnids(&["attack", "--config", "exp.toml", "--gamma", "5"], ws.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no malicious clients"));
    let out = fedgnids(&["attack", "--config", "exp.toml", "--clients", "4"], ws.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn attacked_run_records_attack_and_epm() {
    let ws = workspace();
    let root = ws.path();
    ok(
        &["attack", "--config", "exp.toml", "--out", "att", "--clients", "1", "--p", "1", "--gamma", "3"],
        root,
    );
    ok(&["eval", "--run", "att"], root);
    let s = summary(&root.join("att"));
    let attack = s.attack.expect("attack recorded");
    assert_eq!(attack.malicious_clients.into_iter().collect::<Vec<_>>(), vec![1]);
    assert_eq!(attack.gamma, 3.0);
    let m = s.metrics.unwrap();
    assert!(m.epm.is_some() && m.sr.is_some());

    // `train` on the same run directory drops the attack and stale artifacts
    ok(&["train", "--config", "exp.toml", "--out", "att"], root);
    assert!(!root.join("att/metrics.json").exists());
    let cfg = fs::read_to_string(root.join("att/config.toml")).unwrap();
    assert!(!cfg.contains("[attack]"), "{cfg}");
}

#[test]
fn divergence_is_reported_not_hidden() {
    let ws = workspace();
    let root = ws.path();
    let out = fedgnids(
        &[
            "attack", "--config", "exp.toml", "--out", "nan", "--scheme", "entente_ub", "--clients", "1,2",
            "--gamma", "1e30",
        ],
        root,
    );
    let run = root.join("nan");
    assert!(run.join("history.json").is_file());
    if out.status.success() {
        // weights stayed finite but scoring overflows
        ok(&["eval", "--run", "nan"], root);
    } else {
        assert_eq!(out.status.code(), Some(1));
        assert!(String::from_utf8_lossy(&out.stderr).contains("NaN"));
        assert!(!run.join("model.bin").exists());
        ok(&["eval", "--run", "nan"], root);
    }
    let s = summary(&run);
    assert_eq!(s.status, RunStatus::Nan);
    assert!(s.metrics.is_none());
    assert!(s.diagnosis.unwrap().contains("NaN"));
    let table = ok(&["report", "--runs", "nan"], root);
    assert!(table.contains("| entente_ub | clients=1,2 p=1 gamma=1000000000000000000000000000000 | 1 | NaN |"), "{table}");
}

#[test]
fn report_compares_schemes() {
    let ws = workspace();
    let root = ws.path();
    let schemes = ["fedavg", "fedavg_n", "fedprox", "entente_ub", "entente", "entente_dp"];
    let mut runs: Vec<PathBuf> = Vec::new();
    for s in schemes {
        ok(&["train", "--config", "exp.toml", "--scheme", s, "--out", s], root);
        ok(&["eval", "--run", s], root);
        runs.push(root.join(s));
    }
    let mut args = vec!["report", "--format", "csv", "--out", "table.csv", "--runs"];
    let names: Vec<String> = runs.iter().map(|p| p.display().to_string()).collect();
    args.extend(names.iter().map(String::as_str));
    ok(&args, root);

    let text = fs::read_to_string(root.join("table.csv")).unwrap();
    let mut rows: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for line in text.lines().skip(1) {
        let cells: Vec<String> = line.split(',').map(str::to_string).collect();
        rows.insert(cells[0].clone(), cells);
    }
    assert_eq!(rows.len(), schemes.len());
    for s in schemes {
        let row = &rows[s];
        let ap: f64 = row[4].parse().unwrap();
        let expected = summary(&root.join(s)).metrics.unwrap().ap * 100.0;
        assert!((ap - expected).abs() <= 0.005 + 1e-9, "{s}: {ap} vs {expected}");
    }
    let md = ok(&["report", "--runs", "fedavg", "entente"], root);
    assert_eq!(md.lines().count(), 4);
}

#[test]
fn partition_file_covers_every_node_once() {
    let ws = workspace();
    let root = ws.path();
    ok(&["partition", "--config", "exp.toml", "--out", "out/part.csv"], root);
    let text = fs::read_to_string(root.join("out/part.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("node_id,client_id"));
    let mut seen = BTreeMap::new();
    for l in lines {
        let (node, client) = l.split_once(',').unwrap();
        let k: usize = client.parse().unwrap();
        assert!((1..=3).contains(&k));
        assert!(seen.insert(node.to_string(), k).is_none(), "{node} twice");
    }
    let ids = fs::read_to_string(root.join("data/id_map.csv")).unwrap();
    assert_eq!(seen.len(), ids.lines().count() - 1);

    // the file can drive training directly
    let cfg = fs::read_to_string(root.join("exp.toml")).unwrap();
    fs::write(
        root.join("fixed.toml"),
        format!("{cfg}\n[partition]\nfile = \"out/part.csv\"\n"),
    )
    .unwrap();
    ok(&["train", "--config", "fixed.toml", "--out", "fixed"], root);
}
