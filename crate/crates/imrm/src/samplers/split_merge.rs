//! Split-merge moves over feature columns, adapted to multiple
//! membership: a split may place a shared member in either half or in
//! both. Two nonzero entries of Z are drawn uniformly with replacement;
//! hitting the same column proposes a split anchored at the two
//! vertices, different columns propose a merge. Launch states are built
//! by a sequential allocation pass plus `t_scans` restricted scans, and
//! only the final pass contributes to the proposal density. Merges
//! price the reverse split by replaying the same construction with the
//! last pass forced onto the original configuration.

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::graph::Graph;
use crate::latent::{log_ibp_prior, ChainState, FeatureMatrix, Hyper, LinkDensity, Tying, R_CLAMP};
use crate::math::{beta_ln_pdf, logit, logsumexp, sigmoid};

/// Moment-matched Beta proposal for one split parameter: the mean
/// follows the reference density rho_bar, the scale the squared size of
/// the column being split.
fn eq10(rho_bar: f64, m: f64) -> (f64, f64) {
    let b = ((1.0 - rho_bar) * m * m - 1.0 + rho_bar).max(1.0);
    let a = (rho_bar / (1.0 - rho_bar) * b).max(1.0);
    (a, b)
}

/// Beta parameters for everything a split of column k draws, in push
/// layout order. Interactions copy the split column's own interaction,
/// the new cross term takes its mean interaction, the diagonal its own
/// diagonal. Tied modes draw fewer values (none in shared mode).
fn param_schedule(rho: &LinkDensity, k: usize, m: usize) -> Vec<(f64, f64)> {
    let kk = rho.k();
    let mf = m as f64;
    match rho.tying() {
        Tying::Full => {
            let mut out = Vec::with_capacity(kk + 1);
            for l in 0..kk {
                let rho_bar = if l == k {
                    if kk == 1 {
                        rho.rho(k, k)
                    } else {
                        let sum: f64 =
                            (0..kk).filter(|&j| j != k).map(|j| rho.rho(k, j)).sum();
                        sum / (kk - 1) as f64
                    }
                } else {
                    rho.rho(k, l)
                };
                out.push(eq10(rho_bar, mf));
            }
            out.push(eq10(rho.rho(k, k), mf));
            out
        }
        Tying::PerClass => vec![eq10(rho.rho(k, k), mf)],
        Tying::Shared => Vec::new(),
    }
}

/// Allocation options for a split candidate: original column only,
/// new column only, or both.
const OPTIONS: [(bool, bool); 3] = [(true, false), (false, true), (true, true)];

fn place(s: &mut ChainState, g: &Graph, j: usize, k: usize, kstar: usize, target: (bool, bool)) {
    if s.z.has(j, k) != target.0 {
        s.toggle(g, j, k);
    }
    if s.z.has(j, kstar) != target.1 {
        s.toggle(g, j, kstar);
    }
}

/// Extended likelihood scores of the three placements of candidate j,
/// relative to the (1,0) placement. Leaves j at (0,1).
fn score_options(s: &mut ChainState, g: &Graph, j: usize, k: usize, kstar: usize) -> [(f64, usize); 3] {
    place(s, g, j, k, kstar, (true, false));
    let zl10 = s.stats.zero_links;
    let d1 = s.toggle(g, j, kstar);
    let zl11 = s.stats.zero_links;
    let d2 = s.toggle(g, j, k);
    let zl01 = s.stats.zero_links;
    [
        (0.0, zl10),
        (d1.d_finite + d2.d_finite, zl01),
        (d1.d_finite, zl11),
    ]
}

/// One allocation decision for candidate j: sample a placement, or with
/// `forced` send j to that placement and price it. Returns the log
/// probability of the realized placement; None when a forced target has
/// zero proposal probability.
fn allocate_candidate<R: Rng>(
    s: &mut ChainState,
    g: &Graph,
    n: usize,
    j: usize,
    k: usize,
    kstar: usize,
    forced: Option<(bool, bool)>,
    rng: &mut R,
) -> Option<f64> {
    // column counts excluding j itself, stable across the scoring dance
    let mk = s.z.m(k) - usize::from(s.z.has(j, k));
    let mks = s.z.m(kstar) - usize::from(s.z.has(j, kstar));
    let lw = [
        (mk as f64).ln() + ((n - mks) as f64).ln(),
        ((n - mk) as f64).ln() + (mks as f64).ln(),
        (mk as f64).ln() + (mks as f64).ln(),
    ];
    let scores = score_options(s, g, j, k, kstar);
    let min_zl = scores.iter().map(|sc| sc.1).min().unwrap();
    let mut w = [f64::NEG_INFINITY; 3];
    for o in 0..3 {
        if scores[o].1 == min_zl {
            w[o] = lw[o] + scores[o].0;
        }
    }
    let norm = logsumexp(&w);
    let pick = match forced {
        Some(t) => {
            let o = OPTIONS.iter().position(|&x| x == t).unwrap();
            if scores[o].1 != min_zl {
                return None;
            }
            o
        }
        None => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = 2;
            for o in 0..3 {
                acc += (w[o] - norm).exp();
                if u < acc {
                    pick = o;
                    break;
                }
            }
            pick
        }
    };
    place(s, g, j, k, kstar, OPTIONS[pick]);
    Some(w[pick] - norm)
}

/// One pass over the candidates. `forced` supplies the original
/// configuration for a ghost pass.
fn allocation_pass<R: Rng>(
    s: &mut ChainState,
    g: &Graph,
    cands: &[u32],
    k: usize,
    kstar: usize,
    forced: Option<(&FeatureMatrix, usize, usize)>,
    rng: &mut R,
) -> Option<f64> {
    let n = g.n();
    let mut lp = 0.0;
    for &j in cands {
        let f = forced.map(|(z0, k1, k2)| (z0.has(j as usize, k1), z0.has(j as usize, k2)));
        lp += allocate_candidate(s, g, n, j as usize, k, kstar, f, rng)?;
    }
    Some(lp)
}

fn accept<R: Rng>(zl_from: usize, zl_to: usize, ln_a: f64, rng: &mut R) -> bool {
    let p = match (zl_to > 0, zl_from > 0) {
        (true, false) => 0.0,
        (false, true) => 1.0,
        _ => {
            if ln_a >= 0.0 {
                1.0
            } else {
                ln_a.exp()
            }
        }
    };
    rng.random::<f64>() < p
}

/// Map an index over the nonzero entries of Z (column-major) to its
/// (column, vertex) pair.
fn nonzero_entry(z: &FeatureMatrix, idx: usize) -> (usize, u32) {
    let mut rem = idx;
    for k in 0..z.k() {
        let m = z.m(k);
        if rem < m {
            return (k, z.members(k)[rem]);
        }
        rem -= m;
    }
    unreachable!("index beyond the nonzero entries")
}

/// One split-merge attempt. Returns whether it was accepted.
pub fn split_merge_step<R: Rng>(s: &mut ChainState, g: &Graph, h: &Hyper, rng: &mut R) -> bool {
    let t = s.z.total_ones();
    if t == 0 {
        return false;
    }
    let e1 = rng.random_range(0..t);
    let e2 = rng.random_range(0..t);
    let (k1, i1) = nonzero_entry(&s.z, e1);
    let (k2, i2) = nonzero_entry(&s.z, e2);
    if k1 == k2 {
        attempt_split(s, g, h, k1, i1 as usize, i2 as usize, rng)
    } else {
        attempt_merge(s, g, h, k1, i1 as usize, k2, i2 as usize, rng)
    }
}

/// Split column k, keeping anchor i1 there and moving anchor i2 to a
/// fresh column (a repeated anchor is pinned to both halves).
pub(crate) fn attempt_split<R: Rng>(
    s: &mut ChainState,
    g: &Graph,
    h: &Hyper,
    k: usize,
    i1: usize,
    i2: usize,
    rng: &mut R,
) -> bool {
    if i1 == i2 && s.z.m(k) == 1 {
        // nothing to split; the matching merge of two duplicate
        // singletons is rejected on its side as well
        return false;
    }
    if let Some(cap) = h.max_k {
        if s.k() + 1 > cap {
            return false;
        }
    }
    let snap = s.clone();
    let t0 = s.z.total_ones() as f64;
    let (fin0, zl0) = s.log_lik_parts();
    let lj0 = fin0 + log_ibp_prior(&s.z, h.alpha) + s.log_rho_prior(h);

    let sched = param_schedule(&s.rho, k, s.z.m(k));
    let mut vals = Vec::with_capacity(sched.len());
    let mut lq_rho = 0.0;
    for &(a, b) in &sched {
        let rho: f64 = Beta::new(a, b).expect("valid proposal").sample(rng);
        let r = logit(rho);
        if !r.is_finite() || r.abs() > R_CLAMP {
            return false;
        }
        lq_rho += beta_ln_pdf(rho, a, b);
        vals.push(r);
    }

    // launch: push the new column, pin the anchors, detach everyone else
    let cands: Vec<u32> = s
        .z
        .members(k)
        .iter()
        .copied()
        .filter(|&v| v as usize != i1 && v as usize != i2)
        .collect();
    s.push_class(&vals);
    let kstar = s.k() - 1;
    for &j in &cands {
        s.toggle(g, j as usize, k);
    }
    if i1 != i2 {
        s.toggle(g, i2, k);
    }
    s.toggle(g, i2, kstar);

    let mut lq_alloc = 0.0;
    for pass in 0..=h.t_scans {
        let lp = allocation_pass(s, g, &cands, k, kstar, None, rng)
            .expect("sampled pass always succeeds");
        if pass == h.t_scans {
            lq_alloc = lp;
        }
    }

    let t1 = s.z.total_ones() as f64;
    let (fin1, zl1) = s.log_lik_parts();
    let lj1 = fin1 + log_ibp_prior(&s.z, h.alpha) + s.log_rho_prior(h);

    // reverse move: a merge, whose only randomness is its anchor draw
    let ln_a = (lj1 - lj0) - 2.0 * t1.ln() + 2.0 * t0.ln() - lq_rho - lq_alloc;
    if accept(zl0, zl1, ln_a, rng) {
        true
    } else {
        *s = snap;
        false
    }
}

/// Merge column k2 into k1 (anchors i1 in k1, i2 in k2).
pub(crate) fn attempt_merge<R: Rng>(
    s: &mut ChainState,
    g: &Graph,
    h: &Hyper,
    k1: usize,
    i1: usize,
    k2: usize,
    i2: usize,
    rng: &mut R,
) -> bool {
    // the reverse split pins i1 to the surviving column only and i2 to
    // the split-off one, so anchors straddling both columns make the
    // original state unreachable
    if i1 != i2 && (s.z.has(i1, k2) || s.z.has(i2, k1)) {
        return false;
    }
    // mirror of the degenerate split that is never proposed
    if i1 == i2 && s.z.m(k1) == 1 && s.z.m(k2) == 1 {
        return false;
    }
    let snap0 = s.clone();
    let t0 = s.z.total_ones() as f64;
    let (fin0, zl0) = s.log_lik_parts();
    let lj0 = fin0 + log_ibp_prior(&s.z, h.alpha) + s.log_rho_prior(h);

    // the merge map itself: union into k1, drop k2 and its parameters
    let k2_members: Vec<u32> = s.z.members(k2).to_vec();
    for &j in &k2_members {
        if !s.z.has(j as usize, k1) {
            s.toggle(g, j as usize, k1);
        }
        s.toggle(g, j as usize, k2);
    }
    let k2_vals = s.remove_class(k2);
    let km = k1 - usize::from(k2 < k1);

    let tm = s.z.total_ones() as f64;
    let (finm, zlm) = s.log_lik_parts();
    let ljm = finm + log_ibp_prior(&s.z, h.alpha) + s.log_rho_prior(h);
    let snap_m = s.clone();

    // ghost reverse split: replay the split construction from the
    // merged state with the final pass forced onto the original
    // configuration, pricing the parameters at their old values
    let sched = param_schedule(&s.rho, km, s.z.m(km));
    debug_assert_eq!(sched.len(), k2_vals.len());
    let mut lq_rho = 0.0;
    for (f, &(a, b)) in sched.iter().enumerate() {
        lq_rho += beta_ln_pdf(sigmoid(k2_vals[f]), a, b);
    }

    let cands: Vec<u32> = s
        .z
        .members(km)
        .iter()
        .copied()
        .filter(|&v| v as usize != i1 && v as usize != i2)
        .collect();
    s.push_class(&k2_vals);
    let kstar = s.k() - 1;
    for &j in &cands {
        s.toggle(g, j as usize, km);
    }
    if i1 != i2 {
        s.toggle(g, i2, km);
    }
    s.toggle(g, i2, kstar);

    let mut lq_alloc = 0.0;
    for pass in 0..=h.t_scans {
        let forced = if pass == h.t_scans {
            Some((&snap0.z, k1, k2))
        } else {
            None
        };
        match allocation_pass(s, g, &cands, km, kstar, forced, rng) {
            Some(lp) => {
                if pass == h.t_scans {
                    lq_alloc = lp;
                }
            }
            None => {
                *s = snap0;
                return false;
            }
        }
    }
    debug_assert_eq!(s.z.members(km), snap0.z.members(k1));
    debug_assert_eq!(s.z.members(kstar), snap0.z.members(k2));

    let ln_a = (ljm - lj0) - 2.0 * tm.ln() + lq_rho + lq_alloc + 2.0 * t0.ln();
    if accept(zl0, zlm, ln_a, rng) {
        *s = snap_m;
        true
    } else {
        *s = snap0;
        false
    }
}
