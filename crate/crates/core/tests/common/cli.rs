//! Runs every CLI subcommand in a scratch directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

/// Invokes `bin` with `args` inside `dir`; panics with stderr on failure.
pub fn run(bin: &str, dir: &Path, args: &[&str]) {
    let out = Command::new(bin).args(args).current_dir(dir).output().expect("spawn cli");
    assert!(
        out.status.success(),
        "{} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Small settings so the whole pipeline stays under a few seconds.
pub fn pipeline(bin: &str, dir: &Path) {
    let steps: &[&[&str]] = &[
        &["generate", "--preset", "desk", "--seed", "2", "--n-220", "3", "--road-nodes", "100", "--out", "g.json"],
        &["attack", "--graph", "g.json", "--nodes", "40,5,0", "--out", "manual.csv"],
        &["embed", "--graph", "g.json", "--d", "8", "--epochs", "20", "--lr", "0.01", "--out", "emb.bin"],
        &["embed", "--graph", "g.json", "--d", "8", "--random", "--seed", "3", "--out", "rand.bin"],
        &[
            "train", "--graph", "g.json", "--emb", "emb.bin", "--budget", "5", "--episodes", "15", "--batch-size", "8",
            "--buffer-size", "500", "--target-sync", "10", "--out", "qnet.bin", "--log", "train.csv",
        ],
        &["baseline", "--kind", "de", "--graph", "g.json", "--budget", "5", "--out", "de.csv"],
        &["baseline", "--kind", "ci", "--graph", "g.json", "--budget", "5", "--radius", "2", "--out", "ci.csv"],
        &["baseline", "--kind", "random", "--graph", "g.json", "--budget", "5", "--seed", "9", "--out", "random.csv"],
        &[
            "baseline", "--kind", "gdm", "--graph", "g.json", "--emb", "emb.bin", "--budget", "5", "--sample-count", "60",
            "--out", "gdm.csv",
        ],
        &[
            "transfer", "--graph", "g.json", "--emb", "emb.bin", "--qnet", "qnet.bin", "--budget", "5", "--retrain-epochs",
            "10", "--mask-out", "mask.json", "--out", "transfer.csv",
        ],
    ];
    for args in steps {
        run(bin, dir, args);
    }
    let plan = r#"{
  "graph": {"file": "g.json"},
  "methods": ["de", "ci", "random", "agent"],
  "budget": 4,
  "seeds": [1, 2],
  "embed": {"d": 8, "epochs": 10},
  "agent": {"episodes": 10, "batch_size": 8, "buffer_size": 200}
}"#;
    fs::write(dir.join("plan.json"), plan).unwrap();
    run(bin, dir, &["report", "--plan", "plan.json", "--out", "results"]);
}

/// Relative path to file contents for everything under `root`.
pub fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Files whose bytes differ (or exist on one side only) between two snapshots.
pub fn differing(a: &BTreeMap<PathBuf, Vec<u8>>, b: &BTreeMap<PathBuf, Vec<u8>>) -> Vec<PathBuf> {
    a.keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .cloned()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect()
}
