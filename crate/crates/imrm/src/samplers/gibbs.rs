//! Per-vertex Gibbs updates. For each vertex we first resample its
//! entries in every feature owned by somebody else, then swap its
//! singleton features for a Poisson(alpha/N) number of fresh ones in a
//! single Metropolis-Hastings move with prior-drawn parameters.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::graph::Graph;
use crate::latent::{draw_prior_r, ChainState, Hyper, LinkDensity, ParamRole, Tying};
use crate::math::sigmoid;

/// Draw r-space parameters for a class about to be pushed, in push
/// layout order. The first class also instantiates shared values.
pub(crate) fn draw_new_class_vals<R: Rng>(rho: &LinkDensity, h: &Hyper, rng: &mut R) -> Vec<f64> {
    match rho.tying() {
        Tying::Full => {
            let mut v: Vec<f64> = (0..rho.k())
                .map(|_| draw_prior_r(ParamRole::Between, h, rng))
                .collect();
            v.push(draw_prior_r(ParamRole::Within, h, rng));
            v
        }
        Tying::PerClass => {
            let mut v = vec![draw_prior_r(ParamRole::Within, h, rng)];
            if rho.k() == 0 {
                v.push(draw_prior_r(ParamRole::Between, h, rng));
            }
            v
        }
        Tying::Shared => {
            if rho.k() == 0 {
                vec![
                    draw_prior_r(ParamRole::Within, h, rng),
                    draw_prior_r(ParamRole::Between, h, rng),
                ]
            } else {
                Vec::new()
            }
        }
    }
}

/// Toggle (i, k) and report the pieces of the on/off decision: the log
/// prior odds (column count plus identical-column correction), the
/// finite likelihood difference, and the unexplained-link counts of the
/// on and off states. Leaves the state toggled; callers revert.
fn flip_terms(s: &mut ChainState, g: &Graph, i: usize, k: usize) -> (f64, f64, usize, usize) {
    let was_on = s.z.has(i, k);
    let n = g.n();
    let m_minus = s.z.m(k) - usize::from(was_on);
    debug_assert!(m_minus > 0);

    // membership patterns of column k without and with vertex i; the
    // matching counts over the other columns give the change of the
    // identical-column multiplicities.
    let mut without: Vec<u32> = s.z.members(k).to_vec();
    if was_on {
        let pos = without.binary_search(&(i as u32)).unwrap();
        without.remove(pos);
    }
    let mut with = without.clone();
    let pos = with.partition_point(|&v| v < i as u32);
    with.insert(pos, i as u32);
    let c_off = s.z.count_matching_excluding(k, &without);
    let c_on = s.z.count_matching_excluding(k, &with);

    let prior = (m_minus as f64).ln() - ((n - m_minus) as f64).ln()
        + ((c_off + 1) as f64).ln()
        - ((c_on + 1) as f64).ln();

    let zl_cur = s.stats.zero_links;
    let d = s.toggle(g, i, k);
    let zl_new = s.stats.zero_links;
    if was_on {
        (prior, -d.d_finite, zl_cur, zl_new)
    } else {
        (prior, d.d_finite, zl_new, zl_cur)
    }
}

/// Log odds of z_ik = 1 over z_ik = 0 with everything else held fixed,
/// under likelihood times feature prior (the density prior cancels).
/// Infinite when one side is impossible.
pub fn conditional_log_odds(s: &mut ChainState, g: &Graph, i: usize, k: usize) -> f64 {
    let m_minus = s.z.m(k) - usize::from(s.z.has(i, k));
    if m_minus == 0 {
        // the off state leaves column k empty: zero prior mass
        return f64::INFINITY;
    }
    let (prior, fin, zl_on, zl_off) = flip_terms(s, g, i, k);
    s.toggle(g, i, k);
    match (zl_on > 0, zl_off > 0) {
        (true, true) => f64::NAN,
        (true, false) => f64::NEG_INFINITY,
        (false, true) => f64::INFINITY,
        (false, false) => prior + fin,
    }
}

fn resample_entry<R: Rng>(s: &mut ChainState, g: &Graph, i: usize, k: usize, rng: &mut R) {
    let was_on = s.z.has(i, k);
    let (prior, fin, zl_on, zl_off) = flip_terms(s, g, i, k);
    let p_on = match (zl_on > 0, zl_off > 0) {
        // both sides impossible: keep the current value
        (true, true) => f64::from(u8::from(was_on)),
        (true, false) => 0.0,
        (false, true) => 1.0,
        (false, false) => sigmoid(prior + fin),
    };
    let u: f64 = rng.random();
    let want_on = u < p_on;
    if want_on != s.z.has(i, k) {
        s.toggle(g, i, k);
    }
}

/// Resample vertex i's entries in every column someone else also owns.
/// Singleton columns of i are left to `feature_mh_vertex`.
pub fn gibbs_vertex_flips<R: Rng>(s: &mut ChainState, g: &Graph, i: usize, rng: &mut R) {
    for k in 0..s.k() {
        let m_minus = s.z.m(k) - usize::from(s.z.has(i, k));
        if m_minus > 0 {
            resample_entry(s, g, i, k, rng);
        }
    }
}

/// Metropolis-Hastings move swapping vertex i's singleton features for
/// Poisson(alpha/N) fresh classes with prior-drawn parameters. Proposing
/// from the prior cancels it against the proposal density, so the
/// acceptance probability is exactly min(1, exp(delta log-likelihood)).
/// Returns whether the proposal was accepted.
pub fn feature_mh_vertex<R: Rng>(
    s: &mut ChainState,
    g: &Graph,
    h: &Hyper,
    i: usize,
    rng: &mut R,
) -> bool {
    let lambda = h.alpha / g.n() as f64;
    let kstar = Poisson::new(lambda).expect("positive rate").sample(rng) as usize;

    let singles: Vec<usize> = (0..s.k())
        .filter(|&k| s.z.m(k) == 1 && s.z.has(i, k))
        .collect();

    if let Some(cap) = h.max_k {
        if s.k() - singles.len() + kstar > cap {
            return false;
        }
    }

    enum Step {
        Removed(usize, Vec<f64>),
        Pushed,
    }

    let zl_before = s.stats.zero_links;
    let mut d_fin = 0.0;
    let mut log: Vec<Step> = Vec::new();
    for &k in singles.iter().rev() {
        d_fin += s.toggle(g, i, k).d_finite;
        let vals = s.remove_class(k);
        log.push(Step::Removed(k, vals));
    }
    for _ in 0..kstar {
        let vals = draw_new_class_vals(&s.rho, h, rng);
        s.push_class(&vals);
        d_fin += s.toggle(g, i, s.k() - 1).d_finite;
        log.push(Step::Pushed);
    }
    let zl_after = s.stats.zero_links;

    let accept_p = match (zl_after > 0, zl_before > 0) {
        (true, false) => 0.0,
        (false, true) => 1.0,
        _ => {
            if d_fin >= 0.0 {
                1.0
            } else {
                d_fin.exp()
            }
        }
    };
    if rng.random::<f64>() < accept_p {
        return true;
    }
    for step in log.iter().rev() {
        match step {
            Step::Pushed => {
                let last = s.k() - 1;
                s.toggle(g, i, last);
                s.remove_class(last);
            }
            Step::Removed(k, vals) => {
                s.insert_class(*k, vals);
                s.toggle(g, i, *k);
            }
        }
    }
    false
}

/// One full sweep in fixed vertex order. Returns the number of accepted
/// singleton moves.
pub fn gibbs_sweep<R: Rng>(s: &mut ChainState, g: &Graph, h: &Hyper, rng: &mut R) -> usize {
    let mut accepted = 0;
    for i in 0..g.n() {
        gibbs_vertex_flips(s, g, i, rng);
        accepted += usize::from(feature_mh_vertex(s, g, h, i, rng));
    }
    prune_empty_columns(s);
    accepted
}

/// Drop empty columns (defensive; the kernels never leave any behind).
pub fn prune_empty_columns(s: &mut ChainState) {
    for k in (0..s.k()).rev() {
        if s.z.m(k) == 0 {
            s.remove_class(k);
        }
    }
}
