//! Collapsed sampler for the single-membership models. Link densities
//! are integrated out against their Beta priors, so the chain moves a
//! partition whose sufficient statistics are per-block link counts and
//! observed-dyad counts. The same tying modes apply as in the feature
//! models: every block pair separate, per-block diagonal with one
//! between density, or one within and one between density overall.

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::graph::Graph;
use crate::latent::{Hyper, ParamRole, Tying};
use crate::math::{ln_beta_fn, logsumexp};

/// A partition of the vertices with block-level dyad counts. `n_plus`
/// and `n_obs` are symmetric K x K tables of link and observed-dyad
/// counts; diagonal cells count unordered within-block dyads once.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    assign: Vec<usize>,
    sizes: Vec<usize>,
    n_plus: Vec<u64>,
    n_obs: Vec<u64>,
}

/// Aggregated diagonal and off-diagonal counts, computed once per
/// vertex move so the tied modes stay O(1) per candidate block.
#[derive(Debug, Clone, Copy)]
pub struct BlockTotals {
    pub diag_plus: u64,
    pub diag_obs: u64,
    pub off_plus: u64,
    pub off_obs: u64,
}

const DETACHED: usize = usize::MAX;

impl Partition {
    /// Build from complete group labels (0-based, no empty groups).
    pub fn from_assignments(g: &Graph, labels: &[usize]) -> Partition {
        assert_eq!(labels.len(), g.n());
        let k = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0usize; k];
        for &c in labels {
            sizes[c] += 1;
        }
        assert!(!sizes.contains(&0), "group labels must be contiguous");
        let mut n_obs = vec![0u64; k * k];
        for x in 0..k {
            for y in x..k {
                let pairs = if x == y {
                    (sizes[x] * (sizes[x] - 1) / 2) as u64
                } else {
                    (sizes[x] * sizes[y]) as u64
                };
                n_obs[x * k + y] = pairs;
                n_obs[y * k + x] = pairs;
            }
        }
        for &(i, j) in g.missing() {
            let (a, b) = (labels[i as usize], labels[j as usize]);
            n_obs[a * k + b] -= 1;
            if a != b {
                n_obs[b * k + a] -= 1;
            }
        }
        let mut n_plus = vec![0u64; k * k];
        for &(i, j) in g.links() {
            let (a, b) = (labels[i as usize], labels[j as usize]);
            n_plus[a * k + b] += 1;
            if a != b {
                n_plus[b * k + a] += 1;
            }
        }
        Partition {
            assign: labels.to_vec(),
            sizes,
            n_plus,
            n_obs,
        }
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assign
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn group_of(&self, v: usize) -> usize {
        self.assign[v]
    }

    pub fn is_assigned(&self, v: usize) -> bool {
        self.assign[v] != DETACHED
    }

    /// v's links and observed dyads towards each block, counting only
    /// currently assigned vertices. v itself must be detached.
    fn bucket(&self, g: &Graph, v: usize) -> (Vec<u64>, Vec<u64>) {
        let k = self.k();
        let mut links_by = vec![0u64; k];
        let mut miss_by = vec![0u64; k];
        for &(u, _) in g.neighbors(v) {
            let c = self.assign[u as usize];
            if c != DETACHED {
                links_by[c] += 1;
            }
        }
        for &u in g.missing_partners(v) {
            let c = self.assign[u as usize];
            if c != DETACHED {
                miss_by[c] += 1;
            }
        }
        let obs_by = (0..k)
            .map(|c| self.sizes[c] as u64 - miss_by[c])
            .collect();
        (links_by, obs_by)
    }

    fn apply_counts(&mut self, c: usize, links_by: &[u64], obs_by: &[u64], add: bool) {
        let k = self.k();
        for cp in 0..k {
            let (dl, dobs) = (links_by[cp], obs_by[cp]);
            if dl == 0 && dobs == 0 {
                continue;
            }
            if add {
                self.n_plus[c * k + cp] += dl;
                self.n_obs[c * k + cp] += dobs;
                if cp != c {
                    self.n_plus[cp * k + c] += dl;
                    self.n_obs[cp * k + c] += dobs;
                }
            } else {
                self.n_plus[c * k + cp] -= dl;
                self.n_obs[c * k + cp] -= dobs;
                if cp != c {
                    self.n_plus[cp * k + c] -= dl;
                    self.n_obs[cp * k + c] -= dobs;
                }
            }
        }
    }

    fn resize_tables(&mut self, keep: &[usize], new_k: usize) {
        let old_k = self.k();
        let mut n_plus = vec![0u64; new_k * new_k];
        let mut n_obs = vec![0u64; new_k * new_k];
        for (nx, &ox) in keep.iter().enumerate() {
            for (ny, &oy) in keep.iter().enumerate() {
                n_plus[nx * new_k + ny] = self.n_plus[ox * old_k + oy];
                n_obs[nx * new_k + ny] = self.n_obs[ox * old_k + oy];
            }
        }
        self.n_plus = n_plus;
        self.n_obs = n_obs;
    }

    /// Remove vertex v from its block, dropping the block if it dies
    /// (labels above it shift down by one).
    pub fn detach(&mut self, g: &Graph, v: usize) {
        let c = self.assign[v];
        debug_assert_ne!(c, DETACHED);
        self.assign[v] = DETACHED;
        self.sizes[c] -= 1;
        let (links_by, obs_by) = self.bucket(g, v);
        self.apply_counts(c, &links_by, &obs_by, false);
        if self.sizes[c] == 0 {
            let keep: Vec<usize> = (0..self.k()).filter(|&x| x != c).collect();
            self.resize_tables(&keep, keep.len());
            self.sizes.remove(c);
            for a in self.assign.iter_mut() {
                if *a != DETACHED && *a > c {
                    *a -= 1;
                }
            }
        }
    }

    /// Place a detached vertex into block c; c == k() opens a new block.
    pub fn insert(&mut self, g: &Graph, v: usize, c: usize) {
        debug_assert_eq!(self.assign[v], DETACHED);
        if c == self.k() {
            let keep: Vec<usize> = (0..self.k()).collect();
            self.resize_tables(&keep, c + 1);
            self.sizes.push(0);
        }
        let (links_by, obs_by) = self.bucket(g, v);
        self.apply_counts(c, &links_by, &obs_by, true);
        self.sizes[c] += 1;
        self.assign[v] = c;
    }

    pub fn totals(&self) -> BlockTotals {
        let k = self.k();
        let mut t = BlockTotals {
            diag_plus: 0,
            diag_obs: 0,
            off_plus: 0,
            off_obs: 0,
        };
        for x in 0..k {
            t.diag_plus += self.n_plus[x * k + x];
            t.diag_obs += self.n_obs[x * k + x];
            for y in (x + 1)..k {
                t.off_plus += self.n_plus[x * k + y];
                t.off_obs += self.n_obs[x * k + y];
            }
        }
        t
    }

    /// Log marginal likelihood of the observed dyads with the block
    /// densities integrated out, cells pooled according to the tying.
    pub fn log_marginal(&self, tying: Tying, h: &Hyper) -> f64 {
        let k = self.k();
        let (aw, bw) = h.pseudo_counts(ParamRole::Within);
        let (ab, bb) = h.pseudo_counts(ParamRole::Between);
        let cell = |a: f64, b: f64, np: u64, no: u64| {
            ln_beta_fn(a + np as f64, b + (no - np) as f64) - ln_beta_fn(a, b)
        };
        match tying {
            Tying::Full => {
                let mut lp = 0.0;
                for x in 0..k {
                    for y in x..k {
                        let (a, b) = if x == y { (aw, bw) } else { (ab, bb) };
                        lp += cell(a, b, self.n_plus[x * k + y], self.n_obs[x * k + y]);
                    }
                }
                lp
            }
            Tying::PerClass => {
                let mut lp = 0.0;
                for x in 0..k {
                    lp += cell(aw, bw, self.n_plus[x * k + x], self.n_obs[x * k + x]);
                }
                let t = self.totals();
                lp + cell(ab, bb, t.off_plus, t.off_obs)
            }
            Tying::Shared => {
                let t = self.totals();
                cell(aw, bw, t.diag_plus, t.diag_obs) + cell(ab, bb, t.off_plus, t.off_obs)
            }
        }
    }

    /// Change in log marginal from inserting a detached vertex with the
    /// given buckets into block c (c == k() for a new block). `t` must
    /// be the totals of the current, detached state.
    pub fn delta_marginal(
        &self,
        tying: Tying,
        h: &Hyper,
        links_by: &[u64],
        obs_by: &[u64],
        c: usize,
        t: &BlockTotals,
    ) -> f64 {
        let k = self.k();
        let (aw, bw) = h.pseudo_counts(ParamRole::Within);
        let (ab, bb) = h.pseudo_counts(ParamRole::Between);
        let cell = |a: f64, b: f64, np: u64, no: u64| {
            ln_beta_fn(a + np as f64, b + (no - np) as f64) - ln_beta_fn(a, b)
        };
        let diag = |a: f64, b: f64, np: u64, no: u64, dl: u64, dobs: u64| {
            cell(a, b, np + dl, no + dobs) - cell(a, b, np, no)
        };
        let (dl_diag, do_diag) = if c < k { (links_by[c], obs_by[c]) } else { (0, 0) };
        let tot_l: u64 = links_by.iter().sum();
        let tot_o: u64 = obs_by.iter().sum();
        match tying {
            Tying::Full => {
                let mut d = 0.0;
                for cp in 0..k {
                    let (dl, dobs) = (links_by[cp], obs_by[cp]);
                    if dl == 0 && dobs == 0 {
                        continue;
                    }
                    let (np, no) = if c < k {
                        (self.n_plus[c * k + cp], self.n_obs[c * k + cp])
                    } else {
                        (0, 0)
                    };
                    let (a, b) = if cp == c { (aw, bw) } else { (ab, bb) };
                    d += diag(a, b, np, no, dl, dobs);
                }
                d
            }
            Tying::PerClass => {
                let (np_d, no_d) = if c < k {
                    (self.n_plus[c * k + c], self.n_obs[c * k + c])
                } else {
                    (0, 0)
                };
                diag(aw, bw, np_d, no_d, dl_diag, do_diag)
                    + diag(ab, bb, t.off_plus, t.off_obs, tot_l - dl_diag, tot_o - do_diag)
            }
            Tying::Shared => {
                diag(aw, bw, t.diag_plus, t.diag_obs, dl_diag, do_diag)
                    + diag(ab, bb, t.off_plus, t.off_obs, tot_l - dl_diag, tot_o - do_diag)
            }
        }
    }

    pub fn log_crp(&self, alpha: f64) -> f64 {
        let n = self.assign.len();
        let mut lp = self.k() as f64 * alpha.ln() + ln_gamma(alpha) - ln_gamma(alpha + n as f64);
        for &s in &self.sizes {
            lp += ln_gamma(s as f64);
        }
        lp
    }

    pub fn log_joint(&self, tying: Tying, h: &Hyper) -> f64 {
        self.log_marginal(tying, h) + self.log_crp(h.alpha)
    }

    /// Posterior mean block densities as a full K x K matrix, pooled
    /// consistently with the tying.
    pub fn posterior_densities(&self, tying: Tying, h: &Hyper) -> Vec<f64> {
        let k = self.k();
        let (aw, bw) = h.pseudo_counts(ParamRole::Within);
        let (ab, bb) = h.pseudo_counts(ParamRole::Between);
        let est = |a: f64, b: f64, np: u64, no: u64| (a + np as f64) / (a + b + no as f64);
        let mut out = vec![0.0; k * k];
        let t = self.totals();
        for x in 0..k {
            for y in 0..k {
                out[x * k + y] = match tying {
                    Tying::Full => {
                        if x == y {
                            est(aw, bw, self.n_plus[x * k + x], self.n_obs[x * k + x])
                        } else {
                            est(ab, bb, self.n_plus[x * k + y], self.n_obs[x * k + y])
                        }
                    }
                    Tying::PerClass => {
                        if x == y {
                            est(aw, bw, self.n_plus[x * k + x], self.n_obs[x * k + x])
                        } else {
                            est(ab, bb, t.off_plus, t.off_obs)
                        }
                    }
                    Tying::Shared => {
                        if x == y {
                            est(aw, bw, t.diag_plus, t.diag_obs)
                        } else {
                            est(ab, bb, t.off_plus, t.off_obs)
                        }
                    }
                };
            }
        }
        out
    }
}

/// One collapsed Gibbs sweep: each vertex is detached and reseated by
/// its exact conditional over existing blocks plus a fresh one.
pub fn irm_sweep<R: Rng>(p: &mut Partition, g: &Graph, tying: Tying, h: &Hyper, rng: &mut R) {
    for v in 0..g.n() {
        p.detach(g, v);
        let (links_by, obs_by) = p.bucket(g, v);
        let t = p.totals();
        let k = p.k();
        let capped = h.max_k.is_some_and(|cap| k >= cap);
        let mut lw = Vec::with_capacity(k + 1);
        for c in 0..k {
            lw.push(
                (p.sizes[c] as f64).ln() + p.delta_marginal(tying, h, &links_by, &obs_by, c, &t),
            );
        }
        if !capped {
            lw.push(h.alpha.ln() + p.delta_marginal(tying, h, &links_by, &obs_by, k, &t));
        }
        let norm = logsumexp(&lw);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = lw.len() - 1;
        for (c, &w) in lw.iter().enumerate() {
            acc += (w - norm).exp();
            if u < acc {
                pick = c;
                break;
            }
        }
        p.insert(g, v, pick);
    }
}

/// Restricted reallocation of candidate j between blocks a and b.
/// With `forced` the vertex is sent to that block and the move is only
/// priced. Returns the log probability of the realized choice.
fn irm_allocate<R: Rng>(
    p: &mut Partition,
    g: &Graph,
    tying: Tying,
    h: &Hyper,
    j: usize,
    a: usize,
    b: usize,
    forced: Option<usize>,
    rng: &mut R,
) -> f64 {
    if p.is_assigned(j) {
        p.detach(g, j);
    }
    let (links_by, obs_by) = p.bucket(g, j);
    let t = p.totals();
    let lw = [
        (p.sizes[a] as f64).ln() + p.delta_marginal(tying, h, &links_by, &obs_by, a, &t),
        (p.sizes[b] as f64).ln() + p.delta_marginal(tying, h, &links_by, &obs_by, b, &t),
    ];
    let norm = logsumexp(&lw);
    let pick = match forced {
        Some(c) => usize::from(c == b),
        None => {
            let u: f64 = rng.random();
            usize::from(u >= (lw[0] - norm).exp())
        }
    };
    p.insert(g, j, [a, b][pick]);
    lw[pick] - norm
}

/// One conjugate split-merge attempt over blocks, anchored at two
/// uniformly drawn vertices. Launch states come from a sequential
/// allocation pass plus `t_scans` restricted scans; only the last pass
/// is priced, and merges price the reverse split by replaying the
/// construction with the final pass forced onto the original blocks.
pub fn irm_split_merge<R: Rng>(
    p: &mut Partition,
    g: &Graph,
    tying: Tying,
    h: &Hyper,
    rng: &mut R,
) -> bool {
    let n = g.n();
    let v1 = rng.random_range(0..n);
    let v2 = rng.random_range(0..n);
    if v1 == v2 {
        return false;
    }
    let c1 = p.group_of(v1);
    let c2 = p.group_of(v2);
    if c1 == c2 {
        if let Some(cap) = h.max_k {
            if p.k() + 1 > cap {
                return false;
            }
        }
        let snap = p.clone();
        let lj0 = p.log_joint(tying, h);
        let cands: Vec<usize> = (0..n)
            .filter(|&v| p.group_of(v) == c1 && v != v1 && v != v2)
            .collect();
        for &j in &cands {
            p.detach(g, j);
        }
        p.detach(g, v2);
        let b = p.k();
        p.insert(g, v2, b);
        let mut lq = 0.0;
        for pass in 0..=h.t_scans {
            let mut lp = 0.0;
            for &j in &cands {
                lp += irm_allocate(p, g, tying, h, j, c1, b, None, rng);
            }
            if pass == h.t_scans {
                lq = lp;
            }
        }
        // the reverse merge has no randomness beyond its anchor draw,
        // which cancels against ours
        let ln_a = p.log_joint(tying, h) - lj0 - lq;
        if ln_a >= 0.0 || rng.random::<f64>() < ln_a.exp() {
            true
        } else {
            *p = snap;
            false
        }
    } else {
        let snap0 = p.clone();
        let lj0 = p.log_joint(tying, h);
        let members2: Vec<usize> = (0..n).filter(|&v| p.group_of(v) == c2).collect();
        let mut target = c1;
        for &j in &members2 {
            let before = p.k();
            p.detach(g, j);
            if p.k() < before && c2 < target {
                target -= 1;
            }
            p.insert(g, j, target);
        }
        let ljm = p.log_joint(tying, h);
        let snap_m = p.clone();

        // ghost reverse split, forced back onto the original blocks
        let cands: Vec<usize> = (0..n)
            .filter(|&v| p.group_of(v) == target && v != v1 && v != v2)
            .collect();
        for &j in &cands {
            p.detach(g, j);
        }
        p.detach(g, v2);
        let b = p.k();
        p.insert(g, v2, b);
        let mut lq = 0.0;
        for pass in 0..=h.t_scans {
            let mut lp = 0.0;
            for &j in &cands {
                let f = if pass == h.t_scans {
                    Some(if snap0.group_of(j) == c2 { b } else { target })
                } else {
                    None
                };
                lp += irm_allocate(p, g, tying, h, j, target, b, f, rng);
            }
            if pass == h.t_scans {
                lq = lp;
            }
        }
        let ln_a = ljm - lj0 + lq;
        let acc = ln_a >= 0.0 || rng.random::<f64>() < ln_a.exp();
        *p = if acc { snap_m } else { snap0 };
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_instance(seed: u64, n: usize) -> (Graph, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut links = Vec::new();
        let mut missing = Vec::new();
        for i in 0..n as u32 {
            for j in (i + 1)..n as u32 {
                let u: f64 = rng.random();
                if u < 0.35 {
                    links.push((i, j));
                } else if u < 0.45 {
                    missing.push((i, j));
                }
            }
        }
        let g = Graph::new(n, &links, &missing).unwrap();
        let k = 1 + rng.random_range(0..3);
        let mut labels: Vec<usize> = (0..n).map(|v| if v < k { v } else { rng.random_range(0..k) }).collect();
        // vertex order must not leak group structure
        for v in 0..n {
            let w = rng.random_range(0..n);
            labels.swap(v, w);
        }
        let k = labels.iter().copied().max().unwrap() + 1;
        let seen: std::collections::HashSet<usize> = labels.iter().copied().collect();
        assert_eq!(seen.len(), k);
        (g, labels)
    }

    #[test]
    fn tables_match_rebuild_after_random_ops() {
        for seed in 0..8 {
            let (g, labels) = random_instance(seed, 12);
            let mut p = Partition::from_assignments(&g, &labels);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            for _ in 0..200 {
                let v = rng.random_range(0..12);
                p.detach(&g, v);
                let c = rng.random_range(0..=p.k());
                p.insert(&g, v, c);
                let rebuilt = Partition::from_assignments(&g, p.assignments());
                assert_eq!(p, rebuilt);
            }
        }
    }

    #[test]
    fn marginal_matches_bruteforce() {
        let h = Hyper {
            a_within: 3.0,
            b_within: 2.0,
            a_between: 1.0,
            b_between: 4.0,
            ..Hyper::defaults(8)
        };
        for seed in 0..12 {
            let (g, labels) = random_instance(seed + 40, 8);
            let p = Partition::from_assignments(&g, &labels);
            let k = p.k();
            for tying in [Tying::Full, Tying::PerClass, Tying::Shared] {
                // recount every observed dyad directly and pool by hand
                let group = |x: usize, y: usize| -> usize {
                    match tying {
                        Tying::Full => {
                            let (lo, hi) = (x.min(y), x.max(y));
                            lo * k + hi
                        }
                        Tying::PerClass => {
                            if x == y {
                                x
                            } else {
                                k
                            }
                        }
                        Tying::Shared => usize::from(x != y),
                    }
                };
                let cells = match tying {
                    Tying::Full => k * k,
                    Tying::PerClass => k + 1,
                    Tying::Shared => 2,
                };
                let mut np = vec![0u64; cells];
                let mut no = vec![0u64; cells];
                let within = |x: usize, y: usize| x == y;
                for i in 0..8u32 {
                    for j in (i + 1)..8u32 {
                        if g.is_missing(i, j) {
                            continue;
                        }
                        let c = group(labels[i as usize], labels[j as usize]);
                        no[c] += 1;
                        if g.has_link(i, j) {
                            np[c] += 1;
                        }
                    }
                }
                let mut want = 0.0;
                let mut seen = std::collections::HashSet::new();
                for x in 0..k {
                    for y in 0..k {
                        let c = group(x, y);
                        if !seen.insert(c) {
                            continue;
                        }
                        let (a, b) = if within(x, y) {
                            h.pseudo_counts(ParamRole::Within)
                        } else {
                            h.pseudo_counts(ParamRole::Between)
                        };
                        want += crate::math::ln_beta_fn(a + np[c] as f64, b + (no[c] - np[c]) as f64)
                            - crate::math::ln_beta_fn(a, b);
                    }
                }
                let got = p.log_marginal(tying, &h);
                assert!(
                    (got - want).abs() < 1e-9,
                    "tying {:?}: {} vs {}",
                    tying,
                    got,
                    want
                );
            }
        }
    }

    #[test]
    fn delta_matches_direct_difference() {
        let h = Hyper::defaults(10);
        for seed in 0..6 {
            let (g, labels) = random_instance(seed + 80, 10);
            for tying in [Tying::Full, Tying::PerClass, Tying::Shared] {
                let mut p = Partition::from_assignments(&g, &labels);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for _ in 0..20 {
                    let v = rng.random_range(0..10);
                    p.detach(&g, v);
                    let base = p.log_marginal(tying, &h);
                    let (links_by, obs_by) = p.bucket(&g, v);
                    let t = p.totals();
                    let k = p.k();
                    for c in 0..=k {
                        let d = p.delta_marginal(tying, &h, &links_by, &obs_by, c, &t);
                        let mut q = p.clone();
                        q.insert(&g, v, c);
                        let direct = q.log_marginal(tying, &h) - base;
                        assert!(
                            (d - direct).abs() < 1e-9,
                            "tying {:?} c {}: {} vs {}",
                            tying,
                            c,
                            d,
                            direct
                        );
                    }
                    let c = rng.random_range(0..=k);
                    p.insert(&g, v, c);
                }
            }
        }
    }

    #[test]
    fn prior_only_chain_hits_crp_group_count() {
        // all dyads missing: the marginal is constant, so sweeps plus
        // split-merge must sample the CRP, whose E[K] is known exactly.
        let n = 8;
        let all: Vec<(u32, u32)> = (0..n as u32)
            .flat_map(|i| ((i + 1)..n as u32).map(move |j| (i, j)))
            .collect();
        let g = Graph::new(n, &[], &all).unwrap();
        let alpha = 1.3;
        let h = Hyper {
            alpha,
            t_scans: 1,
            ..Hyper::defaults(n)
        };
        let mut p = Partition::from_assignments(&g, &vec![0; n]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut total = 0usize;
        let (burn, iters) = (500, 9000);
        for t in 0..iters {
            irm_split_merge(&mut p, &g, Tying::Full, &h, &mut rng);
            irm_sweep(&mut p, &g, Tying::Full, &h, &mut rng);
            if t >= burn {
                total += p.k();
            }
        }
        let mean = total as f64 / (iters - burn) as f64;
        let expect: f64 = (0..n).map(|i| alpha / (alpha + i as f64)).sum();
        assert!(
            (mean - expect).abs() < 0.12,
            "mean K {} vs CRP expectation {}",
            mean,
            expect
        );
    }

    #[test]
    fn two_block_graph_is_recovered() {
        let n = 24;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let truth: Vec<usize> = (0..n).map(|v| v % 2).collect();
        let mut links = Vec::new();
        for i in 0..n as u32 {
            for j in (i + 1)..n as u32 {
                let p_link = if truth[i as usize] == truth[j as usize] {
                    0.85
                } else {
                    0.05
                };
                if rng.random::<f64>() < p_link {
                    links.push((i, j));
                }
            }
        }
        let g = Graph::new(n, &links, &[]).unwrap();
        let h = Hyper::defaults(n);
        let mut p = Partition::from_assignments(&g, &vec![0; n]);
        for t in 0..150 {
            irm_split_merge(&mut p, &g, Tying::Full, &h, &mut rng);
            irm_sweep(&mut p, &g, Tying::Full, &h, &mut rng);
            let _ = t;
        }
        // pairwise agreement with the planted halves
        let mut agree = 0usize;
        let mut pairs = 0usize;
        for i in 0..n {
            for j in (i + 1)..n {
                let same_t = truth[i] == truth[j];
                let same_p = p.group_of(i) == p.group_of(j);
                agree += usize::from(same_t == same_p);
                pairs += 1;
            }
        }
        assert!(
            agree as f64 / pairs as f64 > 0.9,
            "pair agreement {}/{}",
            agree,
            pairs
        );
        // density estimates should track the planted rates
        let k = p.k();
        let est = p.posterior_densities(Tying::Full, &h);
        let mut best_diag: f64 = 0.0;
        for x in 0..k {
            best_diag = best_diag.max(est[x * k + x]);
        }
        assert!(best_diag > 0.7, "within-density estimate {}", best_diag);
    }
}
