//! Link-prediction evaluation: heuristic baseline scorers, posterior
//! predictive aggregation over snapshots, rank-based AUC, predictive
//! log likelihood, and normalized mutual information for partition
//! recovery.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, HeldoutSet};
use crate::snapshot::{Snapshot, SnapshotScorer};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty snapshot list")]
    NoSnapshots,
    #[error("{0}")]
    Snapshot(#[from] crate::snapshot::SnapshotError),
    #[error("AUC needs at least one positive and one negative labeled row")]
    OneClass,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// The four training-graph-only heuristics scored alongside the models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    /// Common neighbors.
    ComN,
    /// Degree product.
    DegPr,
    /// Jaccard coefficient of the neighbor sets.
    Jacc,
    /// Reciprocal shortest-path length.
    ShP,
}

impl Baseline {
    pub const ALL: [Baseline; 4] = [Baseline::ComN, Baseline::DegPr, Baseline::Jacc, Baseline::ShP];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::ComN => "comn",
            Baseline::DegPr => "degpr",
            Baseline::Jacc => "jacc",
            Baseline::ShP => "shp",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = String;

    fn from_str(s: &str) -> Result<Baseline, String> {
        match s.to_ascii_lowercase().as_str() {
            "comn" => Ok(Baseline::ComN),
            "degpr" => Ok(Baseline::DegPr),
            "jacc" => Ok(Baseline::Jacc),
            "shp" => Ok(Baseline::ShP),
            other => Err(format!(
                "unknown baseline '{}' (expected comn, degpr, jacc, shp)",
                other
            )),
        }
    }
}

fn common_neighbors(g: &Graph, i: usize, j: usize) -> usize {
    // adjacency lists are sorted by neighbor id
    let (a, b) = (g.neighbors(i), g.neighbors(j));
    let (mut x, mut y, mut count) = (0usize, 0usize, 0usize);
    while x < a.len() && y < b.len() {
        match a[x].0.cmp(&b[y].0) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                x += 1;
                y += 1;
            }
        }
    }
    count
}

fn shortest_path(g: &Graph, i: usize, j: usize) -> Option<usize> {
    if i == j {
        return Some(0);
    }
    let mut dist = vec![usize::MAX; g.n()];
    dist[i] = 0;
    let mut queue = VecDeque::from([i]);
    while let Some(v) = queue.pop_front() {
        for &(u, _) in g.neighbors(v) {
            let u = u as usize;
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                if u == j {
                    return Some(dist[u]);
                }
                queue.push_back(u);
            }
        }
    }
    None
}

/// Score a candidate dyad from the training graph alone.
pub fn baseline_score(g: &Graph, kind: Baseline, i: usize, j: usize) -> f64 {
    match kind {
        Baseline::ComN => common_neighbors(g, i, j) as f64,
        Baseline::DegPr => (g.degree(i) * g.degree(j)) as f64,
        Baseline::Jacc => {
            let inter = common_neighbors(g, i, j);
            let union = g.degree(i) + g.degree(j) - inter;
            if union == 0 {
                0.0
            } else {
                inter as f64 / union as f64
            }
        }
        Baseline::ShP => match shortest_path(g, i, j) {
            Some(d) if d > 0 => 1.0 / d as f64,
            _ => 0.0,
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub i: u32,
    pub j: u32,
    pub score: f64,
    pub label: Option<bool>,
}

/// One score per held-out dyad, in the hold-out set's order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,score,label\n");
        for r in &self.rows {
            let label = match r.label {
                Some(true) => "1",
                Some(false) => "0",
                None => "unknown",
            };
            out.push_str(&format!("{},{},{},{}\n", r.i, r.j, r.score, label));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<ScoreTable, EvalError> {
        let mut rows = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if idx == 0 || line.trim().is_empty() {
                continue;
            }
            let err = |msg: &str| EvalError::Parse {
                line: idx + 1,
                msg: msg.to_string(),
            };
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 4 {
                return Err(err("expected i,j,score,label"));
            }
            let i = parts[0].parse().map_err(|_| err("bad vertex id"))?;
            let j = parts[1].parse().map_err(|_| err("bad vertex id"))?;
            let score: f64 = parts[2].parse().map_err(|_| err("bad score"))?;
            let label = match parts[3].trim() {
                "1" => Some(true),
                "0" => Some(false),
                "unknown" => None,
                _ => return Err(err("label must be 1, 0, or unknown")),
            };
            rows.push(ScoreRow { i, j, score, label });
        }
        Ok(ScoreTable { rows })
    }
}

/// Score every held-out dyad with one heuristic.
pub fn baseline_scores(g: &Graph, kind: Baseline, heldout: &HeldoutSet) -> ScoreTable {
    let rows = heldout
        .dyads
        .iter()
        .map(|&(i, j, y)| ScoreRow {
            i,
            j,
            score: baseline_score(g, kind, i as usize, j as usize),
            label: Some(y),
        })
        .collect();
    ScoreTable { rows }
}

/// Average the per-snapshot link probabilities over the held-out dyads.
pub fn posterior_predict(
    snapshots: &[Snapshot],
    heldout: &HeldoutSet,
) -> Result<ScoreTable, EvalError> {
    if snapshots.is_empty() {
        return Err(EvalError::NoSnapshots);
    }
    let scorers: Vec<SnapshotScorer> = snapshots
        .iter()
        .map(SnapshotScorer::new)
        .collect::<Result<_, _>>()?;
    let m = scorers.len() as f64;
    let rows = heldout
        .dyads
        .iter()
        .map(|&(i, j, y)| {
            let total: f64 = scorers.iter().map(|s| s.score(i as usize, j as usize)).sum();
            ScoreRow {
                i,
                j,
                score: total / m,
                label: Some(y),
            }
        })
        .collect();
    Ok(ScoreTable { rows })
}

/// Rank-based (Mann-Whitney) AUC with average ranks for ties. Rows
/// without a label are ignored.
pub fn auc(table: &ScoreTable) -> Result<f64, EvalError> {
    let mut scored: Vec<(f64, bool)> = table
        .rows
        .iter()
        .filter_map(|r| r.label.map(|y| (r.score, y)))
        .collect();
    let n_pos = scored.iter().filter(|&&(_, y)| y).count();
    let n_neg = scored.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::OneClass);
    }
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("scores must be comparable"));
    let mut rank_pos = 0.0;
    let mut start = 0;
    while start < scored.len() {
        let mut end = start + 1;
        while end < scored.len() && scored[end].0 == scored[start].0 {
            end += 1;
        }
        // ranks are 1-based; tied scores all get the mean rank of the run
        let mean_rank = (start + 1 + end) as f64 / 2.0;
        for &(_, y) in &scored[start..end] {
            if y {
                rank_pos += mean_rank;
            }
        }
        start = end;
    }
    let n_pos = n_pos as f64;
    Ok((rank_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg as f64))
}

/// Predictive log likelihood sum_d y log s + (1-y) log(1-s), with the
/// probability assigned to the observed outcome floored at 1e-9 so
/// confident misses stay finite. Unlabeled rows are ignored.
pub fn predictive_loglik(table: &ScoreTable) -> f64 {
    let mut total = 0.0;
    for r in &table.rows {
        if let Some(y) = r.label {
            let p_obs = if y { r.score } else { 1.0 - r.score };
            total += p_obs.max(1e-9).ln();
        }
    }
    total
}

fn entropy(counts: &[usize], n: usize) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            p * (n as f64 / c as f64).ln()
        })
        .sum()
}

/// Normalized mutual information between two labelings of the same
/// vertices, with arithmetic-mean normalization. Two constant
/// labelings agree perfectly and score 1.
pub fn nmi(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same vertices");
    let n = a.len();
    let ka = a.iter().max().map_or(0, |&m| m + 1);
    let kb = b.iter().max().map_or(0, |&m| m + 1);
    let mut joint = vec![0usize; ka * kb];
    let mut ca = vec![0usize; ka];
    let mut cb = vec![0usize; kb];
    for (&x, &y) in a.iter().zip(b) {
        joint[x * kb + y] += 1;
        ca[x] += 1;
        cb[y] += 1;
    }
    let (ha, hb) = (entropy(&ca, n), entropy(&cb, n));
    if ha == 0.0 && hb == 0.0 {
        return 1.0;
    }
    // integer products keep the log arguments exact, so comparing a
    // labeling with itself lands on 1 precisely
    let mut mi = 0.0;
    for x in 0..ka {
        for y in 0..kb {
            let c = joint[x * kb + y];
            if c > 0 {
                let p = c as f64 / n as f64;
                mi += p * ((c * n) as f64 / (ca[x] * cb[y]) as f64).ln();
            }
        }
    }
    (mi / ((ha + hb) / 2.0)).clamp(0.0, 1.0)
}

/// One line of the model-comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub split_seed: u64,
    pub auc: f64,
    pub pll: f64,
}

impl SummaryRow {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("summary rows serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::{
        log_ibp_prior, ChainState, FeatureMatrix, Hyper, LinkDensity, Tying,
    };
    use crate::math::{logit, logsumexp};
    use crate::samplers::{gibbs_sweep, split_merge_step};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table(rows: &[(f64, Option<bool>)]) -> ScoreTable {
        ScoreTable {
            rows: rows
                .iter()
                .enumerate()
                .map(|(idx, &(score, label))| ScoreRow {
                    i: idx as u32,
                    j: idx as u32 + 100,
                    score,
                    label,
                })
                .collect(),
        }
    }

    #[test]
    fn baselines_on_a_path() {
        // edges 0-1, 0-2: candidate (1,2) shares the hub
        let g = Graph::new(4, &[(0, 1), (0, 2)], &[]).unwrap();
        assert_eq!(baseline_score(&g, Baseline::ComN, 1, 2), 1.0);
        assert_eq!(baseline_score(&g, Baseline::Jacc, 1, 2), 1.0);
        assert_eq!(baseline_score(&g, Baseline::DegPr, 1, 2), 1.0);
        assert_eq!(baseline_score(&g, Baseline::ShP, 1, 2), 0.5);
        // vertex 3 is isolated
        for kind in [Baseline::ComN, Baseline::Jacc, Baseline::DegPr, Baseline::ShP] {
            assert_eq!(baseline_score(&g, kind, 1, 3), 0.0);
        }
        // symmetry
        for kind in Baseline::ALL {
            assert_eq!(
                baseline_score(&g, kind, 1, 2),
                baseline_score(&g, kind, 2, 1)
            );
        }
    }

    #[test]
    fn auc_matches_hand_computed_examples() {
        let perfect = table(&[(0.9, Some(true)), (0.1, Some(false))]);
        assert_eq!(auc(&perfect).unwrap(), 1.0);

        let flat = table(&[
            (0.3, Some(true)),
            (0.3, Some(false)),
            (0.3, Some(true)),
            (0.3, Some(false)),
        ]);
        assert_eq!(auc(&flat).unwrap(), 0.5);

        // pair counting: tie 0.5 + win 1 + loss 0 + win 1 over 4 pairs
        let mixed = table(&[
            (0.8, Some(true)),
            (0.8, Some(false)),
            (0.3, Some(true)),
            (0.1, Some(false)),
        ]);
        assert_eq!(auc(&mixed).unwrap(), 0.625);

        let one_class = table(&[(0.9, Some(true)), (0.4, Some(true))]);
        assert!(auc(&one_class).is_err());
    }

    #[test]
    fn auc_ignores_unlabeled_and_survives_monotone_transforms() {
        let mut t = table(&[
            (0.8, Some(true)),
            (0.8, Some(false)),
            (0.3, Some(true)),
            (0.1, Some(false)),
            (0.99, None),
        ]);
        let base = auc(&t).unwrap();
        assert_eq!(base, 0.625);
        for r in &mut t.rows {
            r.score = (5.0 * r.score - 2.0).exp();
        }
        assert_eq!(auc(&t).unwrap(), base);
    }

    #[test]
    fn predictive_loglik_pins_the_clamp() {
        let even = table(&[(0.5, Some(true)), (0.5, Some(false))]);
        assert_eq!(predictive_loglik(&even), 2.0 * 0.5f64.ln());

        // confidently wrong on both dyads: the observed-outcome
        // probability is clamped to 1e-9 each time
        let wrong = table(&[(0.0, Some(true)), (1.0, Some(false))]);
        let pll = predictive_loglik(&wrong);
        assert_eq!(pll, 2.0 * 1e-9f64.ln());
        assert!((pll + 18.0 * std::f64::consts::LN_10).abs() < 1e-9);

        // matches the direct formula away from the clamp
        let t = table(&[(0.7, Some(true)), (0.2, Some(false)), (0.9, None)]);
        let direct = 0.7f64.ln() + 0.8f64.ln();
        assert!((predictive_loglik(&t) - direct).abs() < 1e-15);
    }

    #[test]
    fn score_table_csv_round_trips() {
        let t = table(&[(0.25, Some(true)), (0.125, Some(false)), (0.75, None)]);
        let csv = t.to_csv();
        assert!(csv.starts_with("i,j,score,label\n"));
        assert!(csv.contains("unknown"));
        let back = ScoreTable::from_csv(&csv).unwrap();
        assert_eq!(back, t);
        assert!(ScoreTable::from_csv("i,j,score,label\n0,1,0.5,maybe\n").is_err());
    }

    #[test]
    fn nmi_matches_conventions() {
        let a = [0, 0, 1, 1, 2, 2];
        assert_eq!(nmi(&a, &a), 1.0);
        // label permutation
        let b = [2, 2, 0, 0, 1, 1];
        assert_eq!(nmi(&a, &b), 1.0);
        // all-singletons vs one class: zero mutual information
        let singles = [0, 1, 2, 3, 4, 5];
        let lump = [0, 0, 0, 0, 0, 0];
        assert_eq!(nmi(&singles, &lump), 0.0);
        // two constant labelings carry no information but agree
        assert_eq!(nmi(&lump, &lump), 1.0);
        // symmetry on a partial overlap
        let c = [0, 0, 1, 1, 1, 2];
        let ab = nmi(&a, &c);
        assert!(ab > 0.0 && ab < 1.0);
        assert_eq!(ab, nmi(&c, &a));
    }

    #[test]
    fn posterior_predict_averages_snapshot_scores() {
        // two hand-built one-feature snapshots with different shared
        // densities; the table must hold the arithmetic mean
        let g = Graph::new(3, &[(0, 1)], &[(0, 2)]).unwrap();
        let rng = ChaCha8Rng::seed_from_u64(0);
        let make = |p: f64| {
            let rows = vec![vec![0], vec![0], vec![0]];
            let z = FeatureMatrix::from_rows(3, 1, &rows);
            let mut rho = LinkDensity::flat(Tying::Shared, 1);
            rho.set_free(&[logit(p), logit(0.5)]);
            let s = ChainState::from_parts(&g, z, rho);
            Snapshot::from_feature_state("imhw", 1, &s, 0.1, &rng)
        };
        let heldout = HeldoutSet {
            dyads: vec![(0, 2, true)],
        };
        let t = posterior_predict(&[make(0.2), make(0.4)], &heldout).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!((t.rows[0].score - 0.3).abs() < 1e-12);
        assert!(posterior_predict(&[], &heldout).is_err());
    }

    #[test]
    fn predictive_matches_exhaustive_enumeration_on_a_tiny_graph() {
        // four vertices, two links, one missing dyad, shared densities
        // held fixed, at most two columns: the posterior predictive for
        // the missing dyad is exactly enumerable.
        let g = Graph::new(4, &[(0, 1), (2, 3)], &[(0, 2)]).unwrap();
        let alpha = 0.8;
        let h = Hyper {
            alpha,
            max_k: Some(2),
            t_scans: 2,
            k_init: 1,
            ..Hyper::defaults(4)
        };
        let eta = [logit(0.75), logit(0.1)];

        let build = |cols: &[u32]| -> ChainState {
            let mut rows: Vec<Vec<u32>> = vec![Vec::new(); 4];
            for (c, &mask) in cols.iter().enumerate() {
                for v in 0..4 {
                    if mask & (1 << v) != 0 {
                        rows[v].push(c as u32);
                    }
                }
            }
            let z = FeatureMatrix::from_rows(4, cols.len(), &rows);
            let mut rho = LinkDensity::flat(Tying::Shared, cols.len());
            if !cols.is_empty() {
                rho.set_free(&eta);
            }
            ChainState::from_parts(&g, z, rho)
        };
        let predict = |s: &ChainState| -> f64 {
            let mut w = 0.0;
            for &a in s.z.row(0) {
                for &b in s.z.row(2) {
                    w += s.rho.lq(a as usize, b as usize);
                }
            }
            -f64::exp_m1(w)
        };

        // enumerate canonical states with K <= 2 and accumulate the
        // posterior-weighted score for dyad (0, 2)
        let mut weights = Vec::new();
        let mut scores = Vec::new();
        let mut add = |cols: Vec<u32>| {
            let s = build(&cols);
            weights.push(s.log_likelihood() + log_ibp_prior(&s.z, alpha));
            scores.push(predict(&s));
        };
        add(Vec::new());
        for a in 1u32..16 {
            add(vec![a]);
        }
        for a in 1u32..16 {
            for b in a..16 {
                add(vec![a, b]);
            }
        }
        let norm = logsumexp(&weights);
        let exact: f64 = weights
            .iter()
            .zip(&scores)
            .map(|(&w, &s)| (w - norm).exp() * s)
            .sum();

        // MCMC with the same fixed densities, snapshotting by hand
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut s = build(&[0b0011]);
        let mut snaps = Vec::new();
        let iters = 60_000;
        for t in 0..iters {
            split_merge_step(&mut s, &g, &h, &mut rng);
            gibbs_sweep(&mut s, &g, &h, &mut rng);
            if t >= 2_000 && t % 5 == 0 {
                snaps.push(Snapshot::from_feature_state("imhw", t, &s, 0.1, &rng));
            }
        }
        let heldout = HeldoutSet {
            dyads: vec![(0, 2, false)],
        };
        let t = posterior_predict(&snaps, &heldout).unwrap();
        assert!(
            (t.rows[0].score - exact).abs() < 0.01,
            "mc {} vs exact {}",
            t.rows[0].score,
            exact
        );
    }
}
