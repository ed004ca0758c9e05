use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_seqlayout");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Relationship types with fixed geometry (boxes in 20 px units on 800x800).
const TYPES: [(&str, &str, &str, [u32; 4], [u32; 4]); 4] = [
    ("person", "ride", "horse", [10, 5, 6, 12], [8, 14, 12, 10]),
    ("person", "near", "car", [2, 20, 5, 14], [12, 24, 16, 10]),
    ("tree", "near", "car", [30, 2, 8, 30], [20, 25, 14, 9]),
    ("sky", "above", "tree", [0, 0, 40, 10], [25, 4, 10, 28]),
];

fn sample(id: &str, types: &[usize]) -> Value {
    let mut objects = vec![];
    let mut relationships = vec![];
    for (r, &t) in types.iter().enumerate() {
        let (sc, p, oc, sb, ob) = TYPES[t];
        let (sid, oid) = (2 * r, 2 * r + 1);
        for (nid, class, b) in [(sid, sc, sb), (oid, oc, ob)] {
            objects.push(json!({"id": nid, "class": class, "box": b.map(|v| v * 20)}));
        }
        relationships.push(json!({"subject": sid, "predicate": p, "object": oid}));
    }
    json!({"id": id, "width": 800, "height": 800, "objects": objects, "relationships": relationships})
}

fn corpus(dir: &Path, name: &str, samples: &[(&str, &[usize])]) -> PathBuf {
    let doc = json!({"samples": samples.iter().map(|(id, t)| sample(id, t)).collect::<Vec<_>>()});
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    path
}

fn standard(dir: &Path) -> PathBuf {
    corpus(
        dir,
        "corpus.json",
        &[("a", &[0, 1]), ("b", &[2]), ("c", &[3, 0, 2]), ("d", &[1, 1, 3])],
    )
}

#[test]
fn ingest_writes_one_file_per_split() {
    let dir = TempDir::new().unwrap();
    let c = standard(dir.path());
    let cfg = dir.path().join("cfg.txt");
    fs::write(&cfg, "min_object_class_count = 1\nmin_relationship_class_count = 1\nmin_objects = 2\n").unwrap();
    for (name, ids) in [("train", "a\nb\n"), ("val", "c\n"), ("test", "d\n")] {
        fs::write(dir.path().join(format!("{name}.txt")), ids).unwrap();
    }
    let out_dir = dir.path().join("splits");
    let split = |n: &str| format!("{n}={}", dir.path().join(format!("{n}.txt")).display());
    let out = ok(&[
        "ingest", "--config", s(&cfg), "--corpus", s(&c), "--out-dir", s(&out_dir),
        "--split", &split("train"), "--split", &split("val"), "--split", &split("test"),
    ]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("train: 2 of 2 samples, 6 objects, 3 relationships"), "{stdout}");
    for name in ["train", "val", "test"] {
        let text = fs::read_to_string(out_dir.join(format!("{name}.json"))).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert!(!v["samples"].as_array().unwrap().is_empty());
    }
}

#[test]
fn ingest_missing_manifest_fails() {
    let dir = TempDir::new().unwrap();
    let c = standard(dir.path());
    let out = run(&[
        "ingest", "--corpus", s(&c), "--out-dir", s(dir.path()),
        "--split", &format!("train={}", dir.path().join("nope.txt").display()),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.txt"));
}

#[test]
fn encode_modes_and_imgar() {
    let dir = TempDir::new().unwrap();
    let c = corpus(dir.path(), "one.json", &[("only", &[0, 2])]);
    let rel = dir.path().join("rel");
    let abs = dir.path().join("abs");
    let img = dir.path().join("img");
    ok(&["encode", "--corpus", s(&c), "--out", s(&rel)]);
    ok(&["encode", "--corpus", s(&c), "--out", s(&abs), "--mode", "absolute"]);
    ok(&["encode", "--corpus", s(&c), "--out", s(&img), "--imgar"]);

    for ext in ["sf", "nodes", "bacs", "ids"] {
        assert_eq!(lines(&rel.with_extension(ext)).len(), 1);
    }
    assert_eq!(lines(&rel.with_extension("sf"))[0], "person ride horse tree near car");
    assert_eq!(lines(&rel.with_extension("nodes"))[0], "0 1;2 3");

    let r = lines(&rel.with_extension("bacs"))[0].clone();
    let a = lines(&abs.with_extension("bacs"))[0].clone();
    let (r, a): (Vec<&str>, Vec<&str>) = (r.split(' ').collect(), a.split(' ').collect());
    assert_eq!(r.len(), 20);
    for (i, (x, y)) in r.iter().zip(&a).enumerate() {
        if matches!(i % 10, 6 | 7) {
            assert!(x.starts_with('i') && !y.starts_with('i'), "{x} {y}");
        } else {
            assert_eq!(x, y);
        }
    }
    let i = lines(&img.with_extension("bacs"))[0].clone();
    let i: Vec<&str> = i.split(' ').collect();
    assert_eq!(i.len(), 21);
    assert!(i[0].starts_with("imgar_"));
    assert_eq!(&i[1..], &r[..]);
}

#[test]
fn augment_counts_and_determinism() {
    let dir = TempDir::new().unwrap();
    let c = corpus(dir.path(), "c.json", &[("two", &[0, 1]), ("nine", &[0, 1, 2, 3, 0, 1, 2, 3, 0])]);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["augment", "--corpus", s(&c), "--out", s(&a), "--seed", "7"]);
    ok(&["augment", "--corpus", s(&c), "--out", s(&b), "--seed", "7", "--jobs", "3"]);
    let ids = lines(&a.with_extension("ids"));
    assert_eq!(ids.iter().filter(|i| *i == "two").count(), 4);
    assert_eq!(ids.iter().filter(|i| *i == "nine").count(), 50);
    for ext in ["sf", "nodes", "bacs", "ids"] {
        assert_eq!(fs::read(a.with_extension(ext)).unwrap(), fs::read(b.with_extension(ext)).unwrap());
        assert_eq!(lines(&a.with_extension(ext)).len(), 54);
    }
}

#[test]
fn decode_round_trips_and_reports_misalignment() {
    let dir = TempDir::new().unwrap();
    let c = standard(dir.path());
    let p = dir.path().join("gt");
    ok(&["encode", "--corpus", s(&c), "--out", s(&p)]);
    let out = ok(&[
        "decode", "--bacs", s(&p.with_extension("bacs")), "--nodes", s(&p.with_extension("nodes")),
        "--sf", s(&p.with_extension("sf")),
    ]);
    let decoded: Vec<Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(decoded.len(), 4);
    assert_eq!(decoded[1]["boxes"]["0"]["class"], "tree");
    assert_eq!(decoded[1]["boxes"]["0"]["box"], json!({"x": 30, "y": 2, "w": 8, "h": 30}));

    let mut bacs = lines(&p.with_extension("bacs"));
    let truncated: Vec<&str> = bacs[1].split(' ').collect();
    bacs[1] = truncated[..9].join(" ");
    let bad = dir.path().join("bad.bacs");
    fs::write(&bad, bacs.join("\n") + "\n").unwrap();
    let out_path = dir.path().join("layouts.jsonl");
    let out = run(&["decode", "--bacs", s(&bad), "--nodes", s(&p.with_extension("nodes")), "--out", s(&out_path)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2:"), "{err}");
    assert!(err.contains("1 misaligned"), "{err}");
    let written = lines(&out_path);
    assert_eq!(written[1], "null");
    assert_ne!(written[0], "null");
}

fn reports(path: &Path) -> Vec<Value> {
    serde_json::from_str::<Value>(&fs::read_to_string(path).unwrap())
        .unwrap()
        .as_array()
        .unwrap()
        .clone()
}

#[test]
fn evaluate_ground_truth_scores_one() {
    let dir = TempDir::new().unwrap();
    let c = standard(dir.path());
    let p = dir.path().join("gt");
    ok(&["encode", "--corpus", s(&c), "--out", s(&p)]);
    let report = dir.path().join("report.json");
    ok(&[
        "evaluate", "--pred", s(&p.with_extension("bacs")), "--reference", s(&c),
        "--ids", s(&p.with_extension("ids")), "--out", s(&report),
    ]);
    let r = reports(&report);
    let ts: Vec<f64> = r.iter().map(|x| x["t_iou"].as_f64().unwrap()).collect();
    assert_eq!(ts, [0.0, 0.25, 0.5, 0.75]);
    for x in &r {
        assert_eq!(x["mean_sleu"].as_f64().unwrap(), 1.0);
        assert_eq!(x["max_order"], 3);
        assert_eq!(x["samples"].as_array().unwrap().len(), 4);
        assert_eq!(x["samples"][0]["chosen_reference"], 0);
    }
    assert_eq!(r[0]["samples"][1]["p"], json!([1.0]));
}

#[test]
fn evaluate_decoded_layouts_and_misaligned_zero() {
    let dir = TempDir::new().unwrap();
    let c = standard(dir.path());
    let p = dir.path().join("gt");
    ok(&["encode", "--corpus", s(&c), "--out", s(&p)]);
    let mut bacs = lines(&p.with_extension("bacs"));
    bacs[2] = bacs[2].replacen("c_person", "xp_3", 1);
    let bad = dir.path().join("bad.bacs");
    fs::write(&bad, bacs.join("\n") + "\n").unwrap();
    let layouts = dir.path().join("l.jsonl");
    run(&["decode", "--bacs", s(&bad), "--nodes", s(&p.with_extension("nodes")), "--out", s(&layouts)]);
    let report = dir.path().join("r.json");
    ok(&["evaluate", "--pred", s(&layouts), "--reference", s(&c), "--t-iou", "0.5", "--out", s(&report)]);
    let r = reports(&report);
    assert_eq!(r.len(), 1);
    assert_eq!(r[0]["misaligned"], 1);
    assert_eq!(r[0]["samples"][2]["aligned"], false);
    assert_eq!(r[0]["samples"][2]["sleu"], 0.0);
    assert_eq!(r[0]["mean_sleu"].as_f64().unwrap(), 0.75);
}

#[test]
fn evaluate_rejects_id_mismatch() {
    let dir = TempDir::new().unwrap();
    let c = standard(dir.path());
    let p = dir.path().join("gt");
    ok(&["encode", "--corpus", s(&c), "--out", s(&p)]);
    let ids = dir.path().join("wrong.ids");
    fs::write(&ids, "a\nb\nd\nc\n").unwrap();
    let out = run(&["evaluate", "--pred", s(&p.with_extension("bacs")), "--reference", s(&c), "--ids", s(&ids)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn baseline_train_predict_evaluate() {
    let dir = TempDir::new().unwrap();
    let c = standard(dir.path());
    let p = dir.path().join("gt");
    ok(&["encode", "--corpus", s(&c), "--out", s(&p), "--imgar"]);
    let t1 = dir.path().join("t1.json");
    let t2 = dir.path().join("t2.json");
    for t in [&t1, &t2] {
        ok(&["baseline", "train", "--sf", s(&p.with_extension("sf")), "--bacs", s(&p.with_extension("bacs")), "--out", s(t), "--imgar"]);
    }
    assert_eq!(fs::read(&t1).unwrap(), fs::read(&t2).unwrap());
    let pred = dir.path().join("pred.bacs");
    ok(&["baseline", "predict", "--table", s(&t1), "--sf", s(&p.with_extension("sf")), "--out", s(&pred), "--imgar"]);
    let report = dir.path().join("r.json");
    ok(&["evaluate", "--pred", s(&pred), "--reference", s(&c), "--imgar", "--out", s(&report)]);
    for x in reports(&report) {
        assert_eq!(x["mean_sleu"].as_f64().unwrap(), 1.0, "{x}");
    }

    // absolute-mode predictions restore the same layouts
    let abs = dir.path().join("abs.bacs");
    ok(&["baseline", "predict", "--table", s(&t1), "--sf", s(&p.with_extension("sf")), "--out", s(&abs), "--imgar", "--mode", "absolute"]);
    ok(&["evaluate", "--pred", s(&abs), "--reference", s(&c), "--imgar", "--mode", "absolute", "--out", s(&report)]);
    for x in reports(&report) {
        assert_eq!(x["mean_sleu"].as_f64().unwrap(), 1.0, "{x}");
    }
}

#[test]
fn baseline_predict_without_training_fails() {
    let dir = TempDir::new().unwrap();
    let sf = dir.path().join("x.sf");
    fs::write(&sf, "person ride horse\n").unwrap();
    let pred = dir.path().join("p.bacs");
    let out = run(&["baseline", "predict", "--table", s(&dir.path().join("missing.json")), "--sf", s(&sf), "--out", s(&pred)]);
    assert!(!out.status.success());

    let empty = dir.path().join("empty.json");
    let (esf, ebacs) = (dir.path().join("e.sf"), dir.path().join("e.bacs"));
    fs::write(&esf, "").unwrap();
    fs::write(&ebacs, "").unwrap();
    ok(&["baseline", "train", "--sf", s(&esf), "--bacs", s(&ebacs), "--out", s(&empty)]);
    let out = run(&["baseline", "predict", "--table", s(&empty), "--sf", s(&sf), "--out", s(&pred)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("untrained"));
}

#[test]
fn bad_config_is_reported() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"grid_max": 1}"#).unwrap();
    let c = standard(dir.path());
    let out = run(&["encode", "--config", s(&cfg), "--corpus", s(&c), "--out", s(&dir.path().join("x"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid_max"));
}
