//! Command line front end: generate synthetic benchmark graphs, fit the
//! six models, score held-out dyads, and print network statistics.
//!
//! Exit codes: 0 success, 2 usage error, 3 unreadable or unwritable
//! files, 4 numerical failure inside a run.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use config::{resolve_hyper, Fail, FileConfig, HyperArgs};
use imrm::eval::{
    auc, baseline_scores, posterior_predict, predictive_loglik, Baseline, EvalError, SummaryRow,
};
use imrm::graph::{holdout_split, load_edge_list, network_stats, Graph, GraphError, HeldoutSet};
use imrm::latent::Hyper;
use imrm::samplers::{resume_chain, run_chain, FitResult, Model, TraceRecord};
use imrm::snapshot::Snapshot;
use imrm::synth::{gen_multi, gen_single, BlockParams};

#[derive(Parser)]
#[command(name = "imrm", version, about = "Latent feature and block models for undirected networks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a planted-structure benchmark graph
    Synth(SynthArgs),
    /// Run MCMC chains and record traces and snapshots
    Fit(FitArgs),
    /// Score held-out dyads from recorded snapshots
    Eval(EvalArgs),
    /// Print summary statistics of a graph as JSON
    Stats(StatsArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Family {
    /// single-membership, one within- and one between-class density
    Hw,
    /// single-membership, per-class within densities
    Db,
    /// single-membership, full density matrix
    Rm,
    /// multiple-membership variant of hw
    Mhw,
    /// multiple-membership variant of db
    Mdb,
    /// multiple-membership variant of rm
    Mrm,
}

#[derive(Args)]
struct SynthArgs {
    /// Block structure family
    #[arg(long, value_enum)]
    family: Family,
    /// Number of planted classes
    #[arg(long)]
    k: usize,
    /// Vertices per class
    #[arg(long)]
    size: usize,
    /// Generator seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Within-class link density (hw/mhw only, default 0.9)
    #[arg(long)]
    rho_c: Option<f64>,
    /// Between-class link density (hw/db families, default 0.05)
    #[arg(long)]
    rho_0: Option<f64>,
    /// Output directory for edges.tsv and truth.csv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Edge list file
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated models (imhw, imdb, imrm, ihw, idb, irm) or "all"
    #[arg(long, default_value = "imrm")]
    model: String,
    /// Output directory, one subdirectory per (model, split)
    #[arg(long, required_unless_present = "resume")]
    out: Option<PathBuf>,
    /// Base seed; chains use seed + 1000 * model_index + split_seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of links (matched with non-links) to hold out
    #[arg(long, default_value_t = 0.0)]
    holdout: f64,
    /// Number of holdout splits (split seeds 1..=splits)
    #[arg(long, default_value_t = 1)]
    splits: u64,
    /// Key = value config file; flags take precedence over it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Continue a recorded run up to --iters total iterations
    #[arg(long, conflicts_with_all = ["model", "out", "holdout", "splits", "seed"])]
    resume: Option<PathBuf>,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Fit output directory to scan for runs
    #[arg(long)]
    fit: PathBuf,
    /// Edge list the fit was produced from
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated heuristic baselines (comn, degpr, jacc, shp) or "all"
    #[arg(long)]
    baselines: Option<String>,
    /// Require this holdout fraction in every run evaluated
    #[arg(long)]
    holdout: Option<f64>,
    /// Evaluate split seeds 1..=N, requiring each to be present
    #[arg(long)]
    splits: Option<u64>,
}

#[derive(Args)]
struct StatsArgs {
    /// Edge list file
    #[arg(long)]
    input: PathBuf,
}

/// Everything eval needs to rebuild and verify the training split.
#[derive(Serialize, Deserialize)]
struct RunMeta {
    model: String,
    split_seed: u64,
    holdout: f64,
    chain_seed: u64,
    input: String,
    hyper: Hyper,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Synth(a) => cmd_synth(&a),
        Cmd::Fit(a) => cmd_fit(&a),
        Cmd::Eval(a) => cmd_eval(&a),
        Cmd::Stats(a) => cmd_stats(&a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.code());
    }
}

fn load_graph(path: &Path) -> Result<Graph, Fail> {
    let text = std::fs::read_to_string(path).map_err(|e| Fail::io(path, e))?;
    let loaded = load_edge_list(&text).map_err(|e| Fail::io(path, e))?;
    if loaded.self_loops_dropped > 0 || loaded.duplicates_dropped > 0 {
        eprintln!(
            "note: dropped {} self-loops and {} duplicate links from {}",
            loaded.self_loops_dropped,
            loaded.duplicates_dropped,
            path.display()
        );
    }
    Ok(loaded.graph)
}

fn write_file(path: &Path, contents: &str) -> Result<(), Fail> {
    std::fs::write(path, contents).map_err(|e| Fail::io(path, e))
}

fn cmd_synth(a: &SynthArgs) -> Result<(), Fail> {
    let fixed_density = |flag: Option<f64>, name: &str| match flag {
        Some(_) => Err(Fail::Usage(format!(
            "--{} does not apply to family {:?}; its densities are preset",
            name, a.family
        ))),
        None => Ok(()),
    };
    let hw = BlockParams::Hw {
        rho_c: a.rho_c.unwrap_or(0.9),
        rho_0: a.rho_0.unwrap_or(0.05),
    };
    let (params, multi) = match a.family {
        Family::Hw => (hw, false),
        Family::Mhw => (hw, true),
        Family::Db | Family::Mdb => {
            fixed_density(a.rho_c, "rho-c")?;
            (
                BlockParams::db_default(a.k, a.rho_0.unwrap_or(0.05)),
                matches!(a.family, Family::Mdb),
            )
        }
        Family::Rm | Family::Mrm => {
            fixed_density(a.rho_c, "rho-c")?;
            fixed_density(a.rho_0, "rho-0")?;
            (BlockParams::rm_default(a.k), matches!(a.family, Family::Mrm))
        }
    };
    let gen = if multi { gen_multi } else { gen_single };
    let (g, truth) =
        gen(&params, a.k, a.size, a.seed).map_err(|e| Fail::Usage(e.to_string()))?;

    std::fs::create_dir_all(&a.out).map_err(|e| Fail::io(&a.out, e))?;
    let mut edges = format!("N {}\n", g.n());
    for &(i, j) in g.links() {
        let _ = writeln!(edges, "{} {}", i, j);
    }
    write_file(&a.out.join("edges.tsv"), &edges)?;
    write_file(&a.out.join("truth.csv"), &truth.to_csv())?;
    println!(
        "wrote {}: {} vertices, {} links, {} planted features",
        a.out.display(),
        g.n(),
        g.n_links(),
        truth.rho.len().isqrt()
    );
    Ok(())
}

fn parse_models(spec: &str) -> Result<Vec<(usize, Model)>, Fail> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(Model::ALL.into_iter().enumerate().collect());
    }
    let mut out = Vec::new();
    for tok in spec.split(',') {
        let m = Model::from_str(tok.trim()).map_err(Fail::Usage)?;
        let idx = Model::ALL.iter().position(|&x| x == m).unwrap();
        if out.iter().any(|&(_, x)| x == m) {
            return Err(Fail::Usage(format!("model {} listed twice", m)));
        }
        out.push((idx, m));
    }
    Ok(out)
}

fn trace_csv(records: &[TraceRecord], with_header: bool) -> String {
    let mut out = String::new();
    if with_header {
        out.push_str(TraceRecord::CSV_HEADER);
        out.push('\n');
    }
    for r in records {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

fn snapshots_jsonl(fit: &FitResult) -> String {
    let mut out = String::new();
    for s in &fit.snapshots {
        out.push_str(&s.to_json());
        out.push('\n');
    }
    out
}

fn check_finite(fit: &FitResult, what: &str) -> Result<(), Fail> {
    match fit.trace.iter().find(|r| !r.logjoint.is_finite()) {
        Some(r) => Err(Fail::Numeric(format!(
            "{}: non-finite log joint at iteration {}",
            what, r.iter
        ))),
        None => Ok(()),
    }
}

fn split_graph(g: &Graph, holdout: f64, split_seed: u64) -> Result<(Graph, Option<HeldoutSet>), Fail> {
    if holdout == 0.0 {
        return Ok((g.clone(), None));
    }
    let (train, held) = holdout_split(g, holdout, split_seed).map_err(|e| match e {
        GraphError::Parse { .. } | GraphError::OutOfRange { .. } => Fail::Io(e.to_string()),
        other => Fail::Usage(other.to_string()),
    })?;
    Ok((train, Some(held)))
}

fn cmd_fit(a: &FitArgs) -> Result<(), Fail> {
    if let Some(dir) = &a.resume {
        return cmd_resume(a, dir);
    }
    let file = match &a.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let g = load_graph(&a.input)?;
    let h = resolve_hyper(g.n(), &file, &a.hyper)?;
    let base_seed: u64 = match file.get("seed")? {
        Some(v) if a.seed == 0 => v,
        _ => a.seed,
    };
    let holdout: f64 = match file.get("holdout")? {
        Some(v) if a.holdout == 0.0 => v,
        _ => a.holdout,
    };
    if !(0.0..1.0).contains(&holdout) {
        return Err(Fail::Usage(format!("holdout fraction {} outside [0, 1)", holdout)));
    }
    if holdout == 0.0 && a.splits != 1 {
        return Err(Fail::Usage("--splits needs a nonzero --holdout".into()));
    }
    let models = parse_models(&a.model)?;
    let out = a.out.as_ref().expect("clap enforces --out without --resume");
    std::fs::create_dir_all(out).map_err(|e| Fail::io(out, e))?;

    let split_seeds: Vec<u64> = if holdout == 0.0 { vec![0] } else { (1..=a.splits).collect() };
    let mut jobs = Vec::new();
    for &split_seed in &split_seeds {
        let (train, held) = split_graph(&g, holdout, split_seed)?;
        for &(idx, model) in &models {
            jobs.push((model, idx, split_seed, train.clone(), held.clone()));
        }
    }

    let lines: Vec<String> = jobs
        .par_iter()
        .map(|(model, idx, split_seed, train, held)| -> Result<String, Fail> {
            let chain_seed = base_seed + 1_000 * *idx as u64 + split_seed;
            let fit = run_chain(train, *model, &h, chain_seed)
                .map_err(|e| Fail::Usage(e.to_string()))?;
            check_finite(&fit, &format!("{} split {}", model, split_seed))?;

            let dir = out.join(format!("{}-split{}", model.name().to_lowercase(), split_seed));
            std::fs::create_dir_all(&dir).map_err(|e| Fail::io(&dir, e))?;
            write_file(&dir.join("trace.csv"), &trace_csv(&fit.trace, true))?;
            write_file(&dir.join("snapshots.jsonl"), &snapshots_jsonl(&fit))?;
            if let Some(held) = held {
                write_file(&dir.join("heldout.csv"), &held.to_csv())?;
            }
            let meta = RunMeta {
                model: model.name().to_string(),
                split_seed: *split_seed,
                holdout,
                chain_seed,
                input: a.input.display().to_string(),
                hyper: h.clone(),
            };
            let json = serde_json::to_string_pretty(&meta).expect("meta serialises");
            write_file(&dir.join("meta.json"), &format!("{}\n", json))?;

            let last = fit.trace.last().expect("at least one iteration");
            Ok(format!(
                "{} split {}: {} iterations, {} snapshots, K {}, logjoint {:.3}",
                model, split_seed, last.iter, fit.snapshots.len(), last.k, last.logjoint
            ))
        })
        .collect::<Result<_, _>>()?;
    for line in lines {
        println!("{line}");
    }
    Ok(())
}

fn cmd_resume(a: &FitArgs, dir: &Path) -> Result<(), Fail> {
    let meta_path = dir.join("meta.json");
    let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| Fail::io(&meta_path, e))?;
    let meta: RunMeta =
        serde_json::from_str(&meta_text).map_err(|e| Fail::io(&meta_path, e))?;

    let g = load_graph(&a.input)?;
    let (train, _) = split_graph(&g, meta.holdout, meta.split_seed)?;

    let file = match &a.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let mut h = resolve_hyper(train.n(), &file, &a.hyper)?;
    // flags not given fall back to the recorded run, not the defaults
    let recorded = meta.hyper.clone();
    if a.hyper.iterations.is_none() && file.get::<usize>("iterations")?.is_none() {
        h.iterations = recorded.iterations;
    }
    if a.hyper.burn_frac.is_none() && file.get::<f64>("burn_frac")?.is_none() {
        h.burn_frac = recorded.burn_frac;
    }
    if a.hyper.thin.is_none() && file.get::<usize>("thin")?.is_none() {
        h.thin = recorded.thin;
    }
    if a.hyper.alpha.is_none() && file.get::<f64>("alpha")?.is_none() {
        h.alpha = recorded.alpha;
    }

    let snap_path = dir.join("snapshots.jsonl");
    let snaps = std::fs::read_to_string(&snap_path).map_err(|e| Fail::io(&snap_path, e))?;
    let last_line = snaps
        .lines()
        .rev()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| Fail::Usage(format!(
            "{}: no snapshots recorded; rerun with more iterations instead",
            snap_path.display()
        )))?;
    let snap = Snapshot::from_json(last_line).map_err(|e| Fail::io(&snap_path, e))?;
    if h.iterations <= recorded.iterations {
        return Err(Fail::Usage(format!(
            "--iters {} adds nothing beyond the {} iterations already recorded",
            h.iterations, recorded.iterations
        )));
    }

    let mut fit = resume_chain(&train, &h, &snap).map_err(|e| Fail::Usage(e.to_string()))?;
    check_finite(&fit, &format!("resume of {}", dir.display()))?;
    // the stretch from the snapshot to the old target is a replay of
    // iterations the files already hold
    fit.trace.retain(|r| r.iter > recorded.iterations);
    fit.snapshots.retain(|s| s.iter > recorded.iterations);

    let append = |path: PathBuf, text: String| -> Result<(), Fail> {
        use std::io::Write as _;
        let mut f = std::fs::OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(|e| Fail::io(&path, e))?;
        f.write_all(text.as_bytes()).map_err(|e| Fail::io(&path, e))
    };
    append(dir.join("trace.csv"), trace_csv(&fit.trace, false))?;
    append(dir.join("snapshots.jsonl"), snapshots_jsonl(&fit))?;
    let meta = RunMeta { hyper: h.clone(), ..meta };
    let json = serde_json::to_string_pretty(&meta).expect("meta serialises");
    write_file(&meta_path, &format!("{}\n", json))?;

    let last = fit.trace.last().expect("resume adds iterations");
    println!(
        "{} split {}: resumed {} -> {} iterations, +{} snapshots, K {}, logjoint {:.3}",
        meta.model, meta.split_seed, snap.iter, last.iter, fit.snapshots.len(), last.k, last.logjoint
    );
    Ok(())
}

fn parse_baselines(spec: &str) -> Result<Vec<Baseline>, Fail> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(Baseline::ALL.to_vec());
    }
    spec.split(',')
        .map(|tok| Baseline::from_str(tok.trim()).map_err(Fail::Usage))
        .collect()
}

fn eval_fail(e: EvalError) -> Fail {
    match e {
        EvalError::Parse { .. } | EvalError::Snapshot(_) => Fail::Io(e.to_string()),
        EvalError::NoSnapshots | EvalError::OneClass => Fail::Usage(e.to_string()),
    }
}

fn cmd_eval(a: &EvalArgs) -> Result<(), Fail> {
    let g = load_graph(&a.input)?;
    let baselines = match &a.baselines {
        Some(spec) => parse_baselines(spec)?,
        None => Vec::new(),
    };

    let mut run_dirs: Vec<PathBuf> = std::fs::read_dir(&a.fit)
        .map_err(|e| Fail::io(&a.fit, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.join("meta.json").is_file())
        .collect();
    run_dirs.sort();
    if run_dirs.is_empty() {
        return Err(Fail::Usage(format!(
            "{}: no run directories with meta.json",
            a.fit.display()
        )));
    }

    let mut runs: Vec<(PathBuf, RunMeta)> = Vec::new();
    for dir in run_dirs {
        let meta_path = dir.join("meta.json");
        let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| Fail::io(&meta_path, e))?;
        let meta: RunMeta =
            serde_json::from_str(&meta_text).map_err(|e| Fail::io(&meta_path, e))?;
        runs.push((dir, meta));
    }
    if let Some(want) = a.holdout {
        if !(want > 0.0 && want < 1.0) {
            return Err(Fail::Usage(format!("--holdout {want} must lie in (0, 1)")));
        }
        for (dir, meta) in &runs {
            if meta.holdout != want {
                return Err(Fail::Usage(format!(
                    "{}: fit used holdout {} but --holdout {} was requested",
                    dir.display(),
                    meta.holdout,
                    want
                )));
            }
        }
    }
    if let Some(want) = a.splits {
        if want == 0 {
            return Err(Fail::Usage("--splits must be at least 1".into()));
        }
        runs.retain(|(_, meta)| meta.split_seed <= want);
        for s in 1..=want {
            if !runs.iter().any(|(_, meta)| meta.split_seed == s) {
                return Err(Fail::Usage(format!(
                    "--splits {want} requested but no run with split seed {s} under {}",
                    a.fit.display()
                )));
            }
        }
    }

    let mut rows: Vec<SummaryRow> = Vec::new();
    let mut splits: Vec<(u64, f64)> = Vec::new();
    for (dir, meta) in &runs {
        if meta.holdout == 0.0 {
            return Err(Fail::Usage(format!(
                "{}: fit ran without --holdout, nothing to score",
                dir.display()
            )));
        }

        let (_, held) = split_graph(&g, meta.holdout, meta.split_seed)?;
        let held = held.expect("nonzero holdout yields a set");
        let held_path = dir.join("heldout.csv");
        let held_text = std::fs::read_to_string(&held_path).map_err(|e| Fail::io(&held_path, e))?;
        let recorded = HeldoutSet::from_csv(&held_text).map_err(|e| Fail::io(&held_path, e))?;
        if recorded != held {
            return Err(Fail::Usage(format!(
                "{}: held-out dyads recorded at fit time do not match --input with split seed {}; \
                 evaluate against the same graph and split the fit used",
                dir.display(),
                meta.split_seed
            )));
        }

        let snap_path = dir.join("snapshots.jsonl");
        let snap_text = std::fs::read_to_string(&snap_path).map_err(|e| Fail::io(&snap_path, e))?;
        let snaps: Vec<Snapshot> = snap_text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(Snapshot::from_json)
            .collect::<Result<_, _>>()
            .map_err(|e| Fail::io(&snap_path, e))?;
        let table = posterior_predict(&snaps, &held).map_err(eval_fail)?;
        write_file(&dir.join("scores.csv"), &table.to_csv())?;
        rows.push(SummaryRow {
            model: meta.model.clone(),
            split_seed: meta.split_seed,
            auc: auc(&table).map_err(eval_fail)?,
            pll: predictive_loglik(&table),
        });
        if !splits.iter().any(|&(s, _)| s == meta.split_seed) {
            splits.push((meta.split_seed, meta.holdout));
        }
    }

    splits.sort_unstable_by_key(|&(s, _)| s);
    for &(split_seed, holdout) in &splits {
        let (train, held) = split_graph(&g, holdout, split_seed)?;
        let held = held.expect("nonzero holdout yields a set");
        for &kind in &baselines {
            let table = baseline_scores(&train, kind, &held);
            let name = format!("baseline-{}-split{}.csv", kind.name(), split_seed);
            write_file(&a.fit.join(name), &table.to_csv())?;
            rows.push(SummaryRow {
                model: kind.name().to_string(),
                split_seed,
                auc: auc(&table).map_err(eval_fail)?,
                pll: predictive_loglik(&table),
            });
        }
    }

    let mut summary = String::new();
    for row in &rows {
        let line = row.to_json();
        println!("{line}");
        summary.push_str(&line);
        summary.push('\n');
    }
    write_file(&a.fit.join("summary.jsonl"), &summary)?;
    Ok(())
}

fn cmd_stats(a: &StatsArgs) -> Result<(), Fail> {
    let g = load_graph(&a.input)?;
    println!("{}", network_stats(&g).to_json());
    Ok(())
}
