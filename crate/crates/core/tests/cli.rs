mod common;

use std::process::Command;

use common::cli::{differing, pipeline, run, snapshot};

const BIN: &str = env!("CARGO_BIN_EXE_infravuln");

#[test]
fn repeated_invocations_write_identical_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(BIN, a.path());
    pipeline(BIN, b.path());
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert!(sa.len() > 15, "only {} files written", sa.len());
    assert_eq!(differing(&sa, &sb), Vec::<std::path::PathBuf>::new());
}

#[test]
fn different_seeds_change_the_output() {
    let dir = tempfile::tempdir().unwrap();
    for (seed, out) in [("1", "a.csv"), ("2", "b.csv")] {
        run(BIN, dir.path(), &["generate", "--out", "g.json"]);
        run(
            BIN,
            dir.path(),
            &["baseline", "--kind", "random", "--graph", "g.json", "--seed", seed, "--out", out],
        );
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn failures_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    run(BIN, dir.path(), &["generate", "--out", "g.json"]);
    let cases: &[(&[&str], &str)] = &[
        (&["attack", "--graph", "g.json", "--nodes", "999999", "--out", "x.csv"], "out of range"),
        (&["baseline", "--kind", "gdm", "--graph", "g.json", "--out", "x.csv"], "embed"),
        (&["train", "--graph", "g.json", "--emb", "none.bin", "--out", "q.bin"], "none.bin"),
        (&["report", "--plan", "missing.json"], "missing.json"),
        (&["attack", "--graph", "nope.json", "--nodes", "1", "--out", "x.csv"], "generate"),
    ];
    for (args, needle) in cases {
        let out = Command::new(BIN).args(*args).current_dir(dir.path()).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{args:?}: {err}");
    }
}
