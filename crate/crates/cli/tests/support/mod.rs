//! CLI helpers shared by the integration and acceptance targets.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const FAST: &str = "hidden = 16,8\nmax_epochs = 8\nbatch_size = 32\npatience = 3\nlr_max = 0.005\ndropout = 0.1\n";

pub fn capcomp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capcomp"))
        .args(args)
        .output()
        .expect("spawn capcomp")
}

pub fn ok(args: &[&str]) -> String {
    let out = capcomp(args);
    assert!(
        out.status.success(),
        "capcomp {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub struct Workdir {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workdir {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        std::fs::write(root.join("fast.cfg"), FAST).unwrap();
        Workdir { _dir: dir, root }
    }
    pub fn p(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

/// Runs the whole pipeline inside `w` and returns the files it produced.
pub fn pipeline(w: &Workdir) -> Vec<PathBuf> {
    let (data, multi) = (w.p("synth.jsonl"), w.p("multi.jsonl"));
    let cfg = w.p("fast.cfg");
    ok(&["synth", "--seed", "3", "--images", "200", "--out", s(&data)]);
    ok(&[
        "synth",
        "--seed",
        "3",
        "--multi-caption",
        "--images",
        "40",
        "--out",
        s(&multi),
    ]);
    ok(&[
        "gen-pairs",
        "--data",
        s(&data),
        "--n",
        "5",
        "--seed",
        "1",
        "--out",
        s(&w.p("pairs.jsonl")),
    ]);
    ok(&[
        "train-reg",
        "--data",
        s(&data),
        "--config",
        s(&cfg),
        "--seed",
        "4",
        "--checkpoint",
        s(&w.p("reg.ckpt")),
        "--out",
        s(&w.p("reg.json")),
    ]);
    ok(&[
        "train-pair",
        "--data",
        s(&data),
        "--config",
        s(&cfg),
        "--seed",
        "4",
        "--pairs",
        s(&w.p("pairs.jsonl")),
        "--checkpoint",
        s(&w.p("pair.ckpt")),
        "--out",
        s(&w.p("pair.json")),
    ]);
    ok(&[
        "eval",
        "--data",
        s(&data),
        "--checkpoint",
        s(&w.p("pair.ckpt")),
        "--out",
        s(&w.p("eval.json")),
    ]);
    ok(&[
        "sweep-n",
        "--data",
        s(&data),
        "--config",
        s(&cfg),
        "--n-values",
        "1,3",
        "--seeds",
        "0,1",
        "--out",
        s(&w.p("sweep.json")),
    ]);
    ok(&[
        "same-image",
        "--data",
        s(&multi),
        "--config",
        s(&cfg),
        "--runs",
        "2",
        "--out",
        s(&w.p("same.json")),
    ]);
    [
        "synth.jsonl",
        "multi.jsonl",
        "pairs.jsonl",
        "reg.ckpt",
        "reg.json",
        "pair.ckpt",
        "pair.json",
        "eval.json",
        "sweep.json",
        "same.json",
    ]
    .iter()
    .map(|n| w.p(n))
    .collect()
}
