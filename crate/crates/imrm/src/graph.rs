//! Undirected graphs over vertices 0..n with three dyad states:
//! link, observed non-link, and held-out (missing).
//!
//! Links and missing dyads are stored as canonical `(i, j)` pairs with
//! `i < j`. Everything not listed is an observed non-link. Missing dyads
//! are excluded from the likelihood and from every graph statistic.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("vertex {v} out of range for n = {n}")]
    OutOfRange { v: usize, n: usize },
    #[error("self-loop ({v}, {v}) is not allowed here")]
    SelfLoop { v: usize },
    #[error("dyad ({i}, {j}) is both a link and missing")]
    Overlap { i: u32, j: u32 },
    #[error("hold-out needs {requested} dyads but only {available} are available")]
    TooFewDyads { requested: usize, available: usize },
    #[error("hold-out fraction {0} leaves no positive dyads")]
    EmptyHoldout(f64),
    #[error("hold-out applied to a graph that already has missing dyads")]
    AlreadySplit,
}

fn canonical(i: u32, j: u32) -> (u32, u32) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

fn key(n: usize, i: u32, j: u32) -> u64 {
    let (a, b) = canonical(i, j);
    a as u64 * n as u64 + b as u64
}

/// Immutable undirected graph with adjacency for links and missing dyads.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    links: Vec<(u32, u32)>,
    missing: Vec<(u32, u32)>,
    /// Per vertex: (neighbour, index into `links`), sorted by neighbour.
    adj: Vec<Vec<(u32, u32)>>,
    missing_adj: Vec<Vec<u32>>,
    link_set: HashSet<u64>,
    missing_set: HashSet<u64>,
}

impl Graph {
    /// Build a graph from dyad lists. Pairs are canonicalised and
    /// deduplicated; self-loops and link/missing overlaps are errors.
    pub fn new(
        n: usize,
        links: &[(u32, u32)],
        missing: &[(u32, u32)],
    ) -> Result<Graph, GraphError> {
        let dedup = |pairs: &[(u32, u32)]| -> Result<Vec<(u32, u32)>, GraphError> {
            let mut out: Vec<(u32, u32)> = Vec::with_capacity(pairs.len());
            for &(i, j) in pairs {
                if i == j {
                    return Err(GraphError::SelfLoop { v: i as usize });
                }
                for v in [i, j] {
                    if v as usize >= n {
                        return Err(GraphError::OutOfRange { v: v as usize, n });
                    }
                }
                out.push(canonical(i, j));
            }
            out.sort_unstable();
            out.dedup();
            Ok(out)
        };
        let links = dedup(links)?;
        let missing = dedup(missing)?;

        let link_set: HashSet<u64> = links.iter().map(|&(i, j)| key(n, i, j)).collect();
        let missing_set: HashSet<u64> = missing.iter().map(|&(i, j)| key(n, i, j)).collect();
        if let Some(&(i, j)) = missing.iter().find(|&&(i, j)| link_set.contains(&key(n, i, j))) {
            return Err(GraphError::Overlap { i, j });
        }

        let mut adj = vec![Vec::new(); n];
        for (e, &(i, j)) in links.iter().enumerate() {
            adj[i as usize].push((j, e as u32));
            adj[j as usize].push((i, e as u32));
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        let mut missing_adj = vec![Vec::new(); n];
        for &(i, j) in &missing {
            missing_adj[i as usize].push(j);
            missing_adj[j as usize].push(i);
        }
        for a in &mut missing_adj {
            a.sort_unstable();
        }

        Ok(Graph {
            n,
            links,
            missing,
            adj,
            missing_adj,
            link_set,
            missing_set,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[(u32, u32)] {
        &self.links
    }

    pub fn missing(&self) -> &[(u32, u32)] {
        &self.missing
    }

    /// Link neighbours of `i` with the index of the joining link.
    pub fn neighbors(&self, i: usize) -> &[(u32, u32)] {
        &self.adj[i]
    }

    /// Vertices tied to `i` by a held-out dyad.
    pub fn missing_partners(&self, i: usize) -> &[u32] {
        &self.missing_adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn has_link(&self, i: u32, j: u32) -> bool {
        i != j && self.link_set.contains(&key(self.n, i, j))
    }

    pub fn is_missing(&self, i: u32, j: u32) -> bool {
        i != j && self.missing_set.contains(&key(self.n, i, j))
    }

    pub fn density(&self) -> f64 {
        let pairs = self.n as f64 * (self.n as f64 - 1.0) / 2.0;
        if pairs == 0.0 {
            0.0
        } else {
            self.links.len() as f64 / pairs
        }
    }
}

/// Result of parsing an edge-list file.
#[derive(Debug)]
pub struct LoadedEdgeList {
    pub graph: Graph,
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

/// Parse a whitespace-separated edge list.
///
/// Lines starting with `#` and blank lines are skipped. An optional first
/// data line `N <count>` declares the vertex count; otherwise it is one
/// plus the largest index seen. Duplicate dyads (in either orientation)
/// are dropped and counted, as are self-loops.
pub fn load_edge_list(text: &str) -> Result<LoadedEdgeList, GraphError> {
    let mut declared_n: Option<usize> = None;
    let mut saw_data = false;
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    let mut self_loops = 0usize;
    let mut max_idx: u32 = 0;
    let mut any_vertex = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if !saw_data && toks.len() == 2 && toks[0] == "N" {
            let n: usize = toks[1].parse().map_err(|_| GraphError::Parse {
                line: lineno + 1,
                msg: format!("bad vertex count {:?}", toks[1]),
            })?;
            declared_n = Some(n);
            saw_data = true;
            continue;
        }
        saw_data = true;
        if toks.len() != 2 {
            return Err(GraphError::Parse {
                line: lineno + 1,
                msg: format!("expected two vertex indices, got {:?}", line),
            });
        }
        let mut ends = [0u32; 2];
        for (slot, tok) in ends.iter_mut().zip(&toks) {
            *slot = tok.parse().map_err(|_| GraphError::Parse {
                line: lineno + 1,
                msg: format!("bad vertex index {:?}", tok),
            })?;
        }
        let (i, j) = (ends[0], ends[1]);
        any_vertex = true;
        max_idx = max_idx.max(i).max(j);
        if i == j {
            self_loops += 1;
            continue;
        }
        pairs.push(canonical(i, j));
    }

    let n = match declared_n {
        Some(n) => {
            if any_vertex && max_idx as usize >= n {
                return Err(GraphError::OutOfRange {
                    v: max_idx as usize,
                    n,
                });
            }
            n
        }
        None => {
            if any_vertex {
                max_idx as usize + 1
            } else {
                0
            }
        }
    };

    pairs.sort_unstable();
    let before = pairs.len();
    pairs.dedup();
    let duplicates = before - pairs.len();
    let graph = Graph::new(n, &pairs, &[])?;
    Ok(LoadedEdgeList {
        graph,
        self_loops_dropped: self_loops,
        duplicates_dropped: duplicates,
    })
}

/// A labelled set of held-out dyads.
#[derive(Debug, Clone, PartialEq)]
pub struct HeldoutSet {
    pub dyads: Vec<(u32, u32, bool)>,
}

impl HeldoutSet {
    pub fn len(&self) -> usize {
        self.dyads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dyads.is_empty()
    }

    pub fn n_positive(&self) -> usize {
        self.dyads.iter().filter(|d| d.2).count()
    }

    /// CSV rows `i,j,label` with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,label\n");
        for &(i, j, y) in &self.dyads {
            let _ = writeln!(out, "{},{},{}", i, j, y as u8);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<HeldoutSet, GraphError> {
        let mut dyads = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line == "i,j,label" {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            let err = |msg: String| GraphError::Parse {
                line: lineno + 1,
                msg,
            };
            if parts.len() != 3 {
                return Err(err(format!("expected i,j,label got {:?}", line)));
            }
            let i: u32 = parts[0]
                .parse()
                .map_err(|_| err(format!("bad index {:?}", parts[0])))?;
            let j: u32 = parts[1]
                .parse()
                .map_err(|_| err(format!("bad index {:?}", parts[1])))?;
            let y = match parts[2] {
                "0" => false,
                "1" => true,
                other => return Err(err(format!("bad label {:?}", other))),
            };
            dyads.push((i, j, y));
        }
        Ok(HeldoutSet { dyads })
    }
}

/// Remove `floor(fraction * |links|)` random links and an equal number of
/// random observed non-links from `g`, marking all of them missing in the
/// returned training graph. Deterministic in `seed`.
pub fn holdout_split(g: &Graph, fraction: f64, seed: u64) -> Result<(Graph, HeldoutSet), GraphError> {
    if !g.missing.is_empty() {
        return Err(GraphError::AlreadySplit);
    }
    let h = (fraction * g.n_links() as f64).floor() as usize;
    if h == 0 {
        return Err(GraphError::EmptyHoldout(fraction));
    }
    let total_pairs = g.n * (g.n - 1) / 2;
    let nonlinks = total_pairs - g.n_links();
    if nonlinks < h {
        return Err(GraphError::TooFewDyads {
            requested: h,
            available: nonlinks,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, g.n_links(), h);
    let mut held_idx: Vec<usize> = chosen.into_iter().collect();
    held_idx.sort_unstable();
    let held: HashSet<usize> = held_idx.iter().cloned().collect();

    let mut positives: Vec<(u32, u32)> = held_idx.iter().map(|&e| g.links[e]).collect();
    positives.sort_unstable();

    let mut negatives: Vec<(u32, u32)> = Vec::with_capacity(h);
    let mut taken: HashSet<u64> = HashSet::with_capacity(h);
    while negatives.len() < h {
        let i = rng.random_range(0..g.n) as u32;
        let j = rng.random_range(0..g.n) as u32;
        if i == j || g.has_link(i, j) {
            continue;
        }
        let k = key(g.n, i, j);
        if taken.insert(k) {
            negatives.push(canonical(i, j));
        }
    }
    negatives.sort_unstable();

    let train_links: Vec<(u32, u32)> = g
        .links
        .iter()
        .enumerate()
        .filter(|(e, _)| !held.contains(e))
        .map(|(_, &p)| p)
        .collect();
    let mut missing: Vec<(u32, u32)> = positives.iter().chain(&negatives).cloned().collect();
    missing.sort_unstable();

    let train = Graph::new(g.n, &train_links, &missing)?;
    let mut dyads: Vec<(u32, u32, bool)> = positives.iter().map(|&(i, j)| (i, j, true)).collect();
    dyads.extend(negatives.iter().map(|&(i, j)| (i, j, false)));
    Ok((train, HeldoutSet { dyads }))
}

/// Summary statistics of the link structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkStats {
    pub n: usize,
    pub m: usize,
    /// Degree assortativity: Pearson correlation of end-point degrees.
    pub r: f64,
    /// Mean local clustering over vertices of degree >= 2.
    pub c: f64,
    /// Mean shortest-path length over connected pairs.
    #[serde(rename = "L")]
    pub l: f64,
    pub density: f64,
}

impl NetworkStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("stats serialise")
    }
}

/// Compute `NetworkStats` from links only (missing dyads are ignored).
pub fn network_stats(g: &Graph) -> NetworkStats {
    let n = g.n;
    let m = g.n_links();
    let deg: Vec<f64> = (0..n).map(|i| g.degree(i) as f64).collect();

    // Assortativity over the 2m ordered link end-points.
    let r = if m == 0 {
        0.0
    } else {
        let mut sx = 0.0;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for &(i, j) in g.links() {
            let (di, dj) = (deg[i as usize], deg[j as usize]);
            sx += di + dj;
            sxx += di * di + dj * dj;
            sxy += 2.0 * di * dj;
        }
        let pts = 2.0 * m as f64;
        let mean = sx / pts;
        let var = sxx / pts - mean * mean;
        let cov = sxy / pts - mean * mean;
        if var <= 1e-12 {
            0.0
        } else {
            cov / var
        }
    };

    // Watts-Strogatz clustering, averaged over vertices with degree >= 2.
    let mut csum = 0.0;
    let mut eligible = 0usize;
    for v in 0..n {
        let nbrs = g.neighbors(v);
        let d = nbrs.len();
        if d < 2 {
            continue;
        }
        let mut tri = 0usize;
        for a in 0..d {
            for b in (a + 1)..d {
                if g.has_link(nbrs[a].0, nbrs[b].0) {
                    tri += 1;
                }
            }
        }
        csum += 2.0 * tri as f64 / (d * (d - 1)) as f64;
        eligible += 1;
    }
    let c = if eligible == 0 { 0.0 } else { csum / eligible as f64 };

    // Mean BFS distance over connected pairs.
    let mut dist_sum = 0u64;
    let mut pair_count = 0u64;
    let mut dist = vec![u32::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    for s in 0..n {
        dist.iter_mut().for_each(|d| *d = u32::MAX);
        dist[s] = 0;
        queue.clear();
        queue.push_back(s as u32);
        while let Some(v) = queue.pop_front() {
            let dv = dist[v as usize];
            for &(w, _) in g.neighbors(v as usize) {
                if dist[w as usize] == u32::MAX {
                    dist[w as usize] = dv + 1;
                    queue.push_back(w);
                }
            }
        }
        for t in (s + 1)..n {
            if dist[t] != u32::MAX {
                dist_sum += dist[t] as u64;
                pair_count += 1;
            }
        }
    }
    let l = if pair_count == 0 {
        0.0
    } else {
        dist_sum as f64 / pair_count as f64
    };

    NetworkStats {
        n,
        m,
        r,
        c,
        l,
        density: g.density(),
    }
}
