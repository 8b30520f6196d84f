//! End-to-end tests of the binary: pipelines over real temp dirs, exit
//! codes, and rerun determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_imrm"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

struct TempDir(PathBuf);

impl TempDir {
    fn new(tag: &str) -> TempDir {
        let dir = std::env::temp_dir().join(format!(
            "imrm-cli-{}-{}-{}",
            tag,
            std::process::id(),
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .unwrap()
                .as_nanos()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        TempDir(dir)
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.0.join(rel)
    }

    fn arg(&self, rel: &str) -> String {
        self.path(rel).display().to_string()
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {}", path.display(), e))
}

#[test]
fn help_covers_the_surface() {
    let top = run(&["--help"]);
    assert!(top.status.success());
    let text = stdout(&top);
    for sub in ["synth", "fit", "eval", "stats"] {
        assert!(text.contains(sub), "top help lists {sub}");
    }
    let fit = run(&["fit", "--help"]);
    assert!(fit.status.success());
    let text = stdout(&fit);
    for flag in [
        "--input", "--model", "--out", "--seed", "--holdout", "--splits", "--config", "--resume",
        "--iters", "--alpha", "--k-init", "--burn-frac", "--thin", "--max-k", "--step-size",
    ] {
        assert!(text.contains(flag), "fit help lists {flag}");
    }
}

#[test]
fn unknown_flags_and_bad_values_exit_2() {
    let out = run(&["fit", "--input", "x", "--out", "y", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["synth", "--family", "??", "--k", "3", "--size", "5", "--out", "z"]);
    assert_eq!(out.status.code(), Some(2));

    // presets reject density flags they cannot honor
    let tmp = TempDir::new("density");
    let out = run(&[
        "synth", "--family", "rm", "--k", "2", "--size", "4", "--rho-c", "0.5",
        "--out", &tmp.arg("d"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("rho-c"));
}

#[test]
fn missing_input_exits_3() {
    let out = run(&["stats", "--input", "/nonexistent/edges.tsv"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn stats_emits_parseable_json() {
    let tmp = TempDir::new("stats");
    let out = run(&[
        "synth", "--family", "hw", "--k", "2", "--size", "10", "--seed", "3",
        "--out", &tmp.arg("d"),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));

    let out = run(&["stats", "--input", &tmp.arg("d/edges.tsv")]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["n"], 20);
    for key in ["m", "r", "c", "L", "density"] {
        assert!(v.get(key).is_some(), "stats reports {key}");
    }
}

fn fit_args<'a>(edges: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        "fit", "--input", edges, "--model", "imhw,irm", "--holdout", "0.1", "--splits", "2",
        "--iters", "80", "--k-init", "6", "--thin", "5", "--out", out,
    ]
}

#[test]
fn pipeline_runs_and_reruns_byte_identically() {
    let tmp = TempDir::new("pipeline");
    let out = run(&[
        "synth", "--family", "mhw", "--k", "3", "--size", "12", "--seed", "5",
        "--out", &tmp.arg("data"),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(read(&tmp.path("data/truth.csv")).starts_with("vertex,features"));

    let edges = tmp.arg("data/edges.tsv");
    let fit1 = run(&fit_args(&edges, &tmp.arg("runs1")));
    assert!(fit1.status.success(), "{}", stderr(&fit1));
    let fit2 = run(&fit_args(&edges, &tmp.arg("runs2")));
    assert!(fit2.status.success(), "{}", stderr(&fit2));

    for dir in ["imhw-split1", "imhw-split2", "irm-split1", "irm-split2"] {
        // wall-clock times differ run to run; everything else may not
        let strip = |text: String| -> Vec<String> {
            text.lines()
                .skip(1)
                .map(|l| l.rsplit_once(',').expect("ms column").0.to_string())
                .collect()
        };
        let t1 = strip(read(&tmp.path(&format!("runs1/{dir}/trace.csv"))));
        let t2 = strip(read(&tmp.path(&format!("runs2/{dir}/trace.csv"))));
        assert_eq!(t1, t2, "{dir}: trace differs beyond the ms column");
        for file in ["snapshots.jsonl", "heldout.csv", "meta.json"] {
            assert_eq!(
                read(&tmp.path(&format!("runs1/{dir}/{file}"))),
                read(&tmp.path(&format!("runs2/{dir}/{file}"))),
                "{dir}/{file} differs between identical runs"
            );
        }
    }

    let eval = run(&[
        "eval", "--fit", &tmp.arg("runs1"), "--input", &edges, "--baselines", "all",
    ]);
    assert!(eval.status.success(), "{}", stderr(&eval));
    let rows: Vec<serde_json::Value> = stdout(&eval)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    // 2 models x 2 splits plus 4 baselines x 2 splits
    assert_eq!(rows.len(), 12);
    for row in &rows {
        let a = row["auc"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&a));
        assert!(row["pll"].as_f64().unwrap() <= 0.0);
    }
    for name in ["comn", "degpr", "jacc", "shp"] {
        assert_eq!(rows.iter().filter(|r| r["model"] == *name).count(), 2);
    }
    assert_eq!(
        read(&tmp.path("runs1/summary.jsonl")).lines().count(),
        12,
        "summary file mirrors stdout"
    );
    assert!(tmp.path("runs1/imhw-split1/scores.csv").is_file());
    assert!(tmp.path("runs1/baseline-jacc-split2.csv").is_file());

    // protocol flags: matching values pass, mismatches and missing splits refuse
    let pinned = run(&[
        "eval", "--fit", &tmp.arg("runs1"), "--input", &edges,
        "--holdout", "0.1", "--splits", "2",
    ]);
    assert!(pinned.status.success(), "{}", stderr(&pinned));
    assert_eq!(stdout(&pinned).lines().count(), 4);
    let wrong_frac = run(&[
        "eval", "--fit", &tmp.arg("runs1"), "--input", &edges, "--holdout", "0.2",
    ]);
    assert_eq!(wrong_frac.status.code(), Some(2));
    assert!(stderr(&wrong_frac).contains("holdout"));
    let missing_split = run(&[
        "eval", "--fit", &tmp.arg("runs1"), "--input", &edges, "--splits", "3",
    ]);
    assert_eq!(missing_split.status.code(), Some(2));
    assert!(stderr(&missing_split).contains("split seed 3"));
    let narrowed = run(&[
        "eval", "--fit", &tmp.arg("runs1"), "--input", &edges, "--splits", "1",
    ]);
    assert!(narrowed.status.success(), "{}", stderr(&narrowed));
    assert!(stdout(&narrowed)
        .lines()
        .all(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["split_seed"] == 1));
}

#[test]
fn eval_refuses_a_mismatched_graph() {
    let tmp = TempDir::new("mismatch");
    for (seed, dir) in [("5", "a"), ("6", "b")] {
        let out = run(&[
            "synth", "--family", "hw", "--k", "2", "--size", "12", "--seed", seed,
            "--out", &tmp.arg(dir),
        ]);
        assert!(out.status.success());
    }
    let fit = run(&[
        "fit", "--input", &tmp.arg("a/edges.tsv"), "--model", "irm", "--holdout", "0.1",
        "--iters", "40", "--out", &tmp.arg("runs"),
    ]);
    assert!(fit.status.success(), "{}", stderr(&fit));

    let eval = run(&["eval", "--fit", &tmp.arg("runs"), "--input", &tmp.arg("b/edges.tsv")]);
    assert_eq!(eval.status.code(), Some(2), "{}", stderr(&eval));
    assert!(stderr(&eval).contains("held-out dyads"));

    let eval = run(&["eval", "--fit", &tmp.arg("runs"), "--input", &tmp.arg("a/edges.tsv")]);
    assert!(eval.status.success(), "{}", stderr(&eval));
}

#[test]
fn config_file_layers_under_flags() {
    let tmp = TempDir::new("config");
    let out = run(&[
        "synth", "--family", "hw", "--k", "2", "--size", "10", "--seed", "1",
        "--out", &tmp.arg("d"),
    ]);
    assert!(out.status.success());
    let edges = tmp.arg("d/edges.tsv");

    std::fs::write(tmp.path("good.conf"), "iterations = 30\nk_init = 4\nthin = 3\n").unwrap();
    let fit = run(&[
        "fit", "--input", &edges, "--model", "ihw", "--config", &tmp.arg("good.conf"),
        "--thin", "2", "--out", &tmp.arg("runs"),
    ]);
    assert!(fit.status.success(), "{}", stderr(&fit));
    let meta: serde_json::Value =
        serde_json::from_str(&read(&tmp.path("runs/ihw-split0/meta.json"))).unwrap();
    assert_eq!(meta["hyper"]["iterations"], 30, "file key applies");
    assert_eq!(meta["hyper"]["thin"], 2, "flag beats file");

    std::fs::write(tmp.path("bad.conf"), "iterations = 30\niterms = 9\n").unwrap();
    let fit = run(&[
        "fit", "--input", &edges, "--model", "ihw", "--config", &tmp.arg("bad.conf"),
        "--out", &tmp.arg("runs2"),
    ]);
    assert_eq!(fit.status.code(), Some(2));
    assert!(stderr(&fit).contains("iterms"), "{}", stderr(&fit));
}

#[test]
fn resume_extends_a_run_and_rejects_stale_targets() {
    let tmp = TempDir::new("resume");
    let out = run(&[
        "synth", "--family", "hw", "--k", "2", "--size", "10", "--seed", "2",
        "--out", &tmp.arg("d"),
    ]);
    assert!(out.status.success());
    let edges = tmp.arg("d/edges.tsv");

    let fit = run(&[
        "fit", "--input", &edges, "--model", "irm", "--iters", "60", "--thin", "4",
        "--out", &tmp.arg("runs"),
    ]);
    assert!(fit.status.success(), "{}", stderr(&fit));
    let run_dir = tmp.arg("runs/irm-split0");
    let before = read(&tmp.path("runs/irm-split0/trace.csv")).lines().count();

    // a target at or below the recorded progress is a usage error
    let stale = run(&["fit", "--resume", &run_dir, "--input", &edges, "--iters", "60"]);
    assert_eq!(stale.status.code(), Some(2), "{}", stderr(&stale));

    let resumed = run(&["fit", "--resume", &run_dir, "--input", &edges, "--iters", "100"]);
    assert!(resumed.status.success(), "{}", stderr(&resumed));
    let trace = read(&tmp.path("runs/irm-split0/trace.csv"));
    assert!(trace.lines().count() > before);
    assert!(trace.trim_end().lines().last().unwrap().starts_with("100,"));
    let meta: serde_json::Value =
        serde_json::from_str(&read(&tmp.path("runs/irm-split0/meta.json"))).unwrap();
    assert_eq!(meta["hyper"]["iterations"], 100, "meta tracks the new target");
}
