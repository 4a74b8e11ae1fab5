use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use handsup::datasets::Manifest;
use handsup::pipeline::ErrorManifest;
use handsup::scenegen::GenerationConfig;
use handsup::triage::CategoryStore;

fn handsup(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_handsup"))
        .args(args)
        .env_remove("HANDSUP_DATA_ROOT")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = handsup(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_config(dir: &Path, n: usize) -> PathBuf {
    let mut cfg = GenerationConfig::desk_pseudo_real();
    cfg.num_sequences = n;
    let path = dir.join("small.cfg");
    cfg.write(&path).unwrap();
    path
}

fn tree_bytes(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 2);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["generate", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["generate", "--config", s(&cfg), "--out", s(&b)]);
    let (ta, tb) = (tree_bytes(&a), tree_bytes(&b));
    assert_eq!(ta.len(), 2 * 30 + 2);
    assert_eq!(ta, tb);
}

#[test]
fn missing_checkpoint_exits_with_io_class() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.ckpt");
    let m = dir.path().join("m.tsv");
    let out = handsup(&["evaluate", "--checkpoint", s(&missing), "--manifest", s(&m)]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error[Io]:"), "{err}");
    assert!(err.contains("nope.ckpt"));
}

#[test]
fn bad_config_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "num_sequences = many\n").unwrap();
    let out = handsup(&["generate", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error[ParseError]:"));
    assert_eq!(handsup(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn pipeline_subcommands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d, 8);
    let data = d.join("data");
    ok(&["generate", "--config", s(&cfg), "--out", s(&data)]);
    let manifest = data.join("manifest.tsv");

    let relabeled = data.join("relabeled.tsv");
    let line = ok(&["label", "--manifest", s(&manifest), "--threshold", "0.03", "--out", s(&relabeled)]);
    assert!(line.starts_with("frames 240 "));
    assert_eq!(Manifest::read(&relabeled).unwrap(), Manifest::read(&manifest).unwrap());

    ok(&["split", "--manifest", s(&manifest), "--train", "0.5", "--val", "0.25", "--test", "0.25", "--seed", "3"]);
    let parts: Vec<Manifest> = ["train", "val", "test"]
        .iter()
        .map(|n| Manifest::read(&data.join(format!("{n}.tsv"))).unwrap())
        .collect();
    assert_eq!(parts.iter().map(Manifest::len).sum::<usize>(), 240);

    let f = parts[0].histogram().fractions();
    let target = format!("{},{},{},{}", f[0], f[1], f[2], f[3]);
    let balanced = data.join("balanced.tsv");
    ok(&["balance", "--manifest", s(&data.join("train.tsv")), "--target", &target, "--out", s(&balanced)]);
    assert!(Manifest::read(&balanced).unwrap().len() <= parts[0].len());

    let ckpt = d.join("model.ckpt");
    ok(&[
        "train", "--train", s(&data.join("train.tsv")), "--val", s(&data.join("val.tsv")), "--batches", "20", "--out", s(&ckpt),
    ]);
    assert!(d.join("model.history.txt").exists());
    let tuned = d.join("tuned.ckpt");
    ok(&[
        "finetune", "--init", s(&ckpt), "--synth", s(&data.join("train.tsv")), "--real", s(&data.join("val.tsv")), "--batches", "10",
        "--out", s(&tuned),
    ]);
    let report = d.join("report.txt");
    let text = ok(&["evaluate", "--checkpoint", s(&tuned), "--manifest", s(&data.join("test.tsv")), "--out", s(&report)]);
    assert!(text.contains("auc_left"));
    assert!(text.starts_with(&format!("config_hash {}", parts[2].config_hash)));
    assert!(report.with_extension("json").exists());

    let errors = d.join("errors/errors.tsv");
    ok(&["export-errors", "--checkpoint", s(&tuned), "--manifest", s(&data.join("test.tsv")), "--out", s(&errors)]);
    let errs = ErrorManifest::read(&errors).unwrap();
    assert!(errs.errors.iter().all(|e| d.join("errors").join(&e.crop_path).exists()));
}

#[test]
fn iterate_without_serving_uses_the_store() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d, 8);
    let data = d.join("data");
    ok(&["generate", "--config", s(&cfg), "--out", s(&data)]);
    ok(&["split", "--manifest", s(&data.join("manifest.tsv")), "--train", "0.5", "--val", "0.25", "--test", "0.25"]);
    let ckpt = d.join("model.ckpt");
    let (train, val, test) = (data.join("train.tsv"), data.join("val.tsv"), data.join("test.tsv"));
    ok(&["train", "--train", s(&train), "--val", s(&val), "--batches", "5", "--out", s(&ckpt)]);

    let work = d.join("work");
    // No review yet: the plan has nothing to act on.
    let common = [
        "iterate", "--checkpoint", s(&ckpt), "--synth-config", s(&cfg), "--synth", s(&train), "--real", s(&val), "--review",
        s(&val), "--test", s(&test), "--work", s(&work), "--no-serve", "--batches", "5",
    ];
    let out = handsup(&common);
    assert_eq!(out.status.code(), Some(6));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error[NoCategorizedErrors]"));

    let errs = ErrorManifest::read(&work.join("errors/errors.tsv")).unwrap();
    let mut store = CategoryStore::open(&work.join("errors/store.jsonl")).unwrap();
    store.assign(errs.errors[0].frame_id(), handsup::pipeline::ErrorCategory::BothOff, "").unwrap();
    drop(store);
    let text = ok(&common);
    assert!(text.contains("frames_added 450"), "{text}");
    assert!(text.contains("both_off_recall"));
    let added = Manifest::read(&work.join("generated/manifest.tsv")).unwrap();
    assert_eq!(added.len(), 450);
    assert!(work.join("iterate_report.json").exists());
}
