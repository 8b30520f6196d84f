//! Chain state for the multiple-membership models: feature matrix,
//! link density, and incrementally maintained sufficient statistics.
//!
//! The log likelihood over observed dyads is
//!
//!   sum_{links} log(1 - e^{w_ij})  +  1/2 sum_{kl} lq_kl (m_k m_l - D_kl - C_kl)
//!
//! with w_ij = z_i' P z_j, D_kl = sum_i z_ik z_il, and C_kl the sum of
//! z_ik z_jl over both orderings of every link and missing dyad. The
//! second term is exactly the sum of w over observed non-links, so the
//! cost is linear in links and missing dyads, never O(N^2).
//!
//! A link with w = 0 (its endpoints share no interacting features) has
//! likelihood zero. Rather than propagating -inf through incremental
//! updates, the stats carry a count of such links next to the finite
//! part; the likelihood is -inf exactly when the count is positive.

use rand::Rng;

use crate::graph::Graph;
use crate::latent::{FeatureMatrix, Hyper, LinkDensity, Tying};
use crate::math::{harmonic, ln_factorial, log1mexp};

/// Change in the extended log-likelihood representation from one toggle.
///
/// `d_finite` is the change of the finite part (non-link sum plus the
/// log-likelihood of links with w < 0); `d_zero_links` the change in the
/// number of unexplained links. The plain delta is +/- infinity when
/// `d_zero_links` crosses zero.
#[derive(Debug, Clone, Copy)]
pub struct ToggleDelta {
    pub d_finite: f64,
    pub d_zero_links: isize,
}

impl ToggleDelta {
    /// Change in log likelihood, evaluated for a move starting from a
    /// state with `zero_before` unexplained links.
    pub fn log_lik_delta(&self, zero_before: usize) -> f64 {
        let zero_after = (zero_before as isize + self.d_zero_links) as usize;
        match (zero_before > 0, zero_after > 0) {
            (false, false) => self.d_finite,
            (false, true) => f64::NEG_INFINITY,
            (true, false) => f64::INFINITY,
            // both states impossible; the finite part is still exact
            // bookkeeping and lets callers compose further toggles.
            (true, true) => self.d_finite,
        }
    }
}

/// Cached sufficient statistics, kept exactly in sync with (Z, rho).
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStats {
    /// Column counts m_k (mirrors the feature matrix).
    pub m: Vec<u32>,
    /// C_kl: ordered-pair sums of z_ik z_jl over links and missing dyads.
    pub c: Vec<u64>,
    /// D_kl = sum_i z_ik z_il.
    pub d: Vec<u64>,
    /// w_ij per stored link.
    pub link_w: Vec<f64>,
    /// log(1 - e^{w}) per link with w < 0; 0.0 placeholder where w = 0.
    pub link_f: Vec<f64>,
    /// Running sum of link_f (canonicalized once per sweep by drivers).
    pub link_f_sum: f64,
    /// Number of links with w = 0.
    pub zero_links: usize,
}

impl SuffStats {
    fn empty(k: usize, n_links: usize) -> SuffStats {
        SuffStats {
            m: vec![0; k],
            c: vec![0; k * k],
            d: vec![0; k * k],
            link_w: vec![0.0; n_links],
            link_f: vec![0.0; n_links],
            link_f_sum: 0.0,
            zero_links: n_links,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainState {
    pub z: FeatureMatrix,
    pub rho: LinkDensity,
    pub stats: SuffStats,
}

/// Noisy-or link probability 1 - exp(z_i' P z_j) for two feature rows.
pub fn link_probability(row_i: &[u32], row_j: &[u32], rho: &LinkDensity) -> f64 {
    let mut w = 0.0;
    for &a in row_i {
        for &b in row_j {
            w += rho.lq(a as usize, b as usize);
        }
    }
    -w.exp_m1()
}

/// Log of the full IBP probability of Z, normalizing constant included:
///
///   K log(alpha) - alpha H_N
///     + sum_k [ log G(m_k) + log G(N - m_k + 1) - log G(N + 1) ]
///     - sum_h log(K_h!)
///
/// where the K_h are the sizes of the groups of identical columns.
/// Undefined (-inf) if any column is empty.
pub fn log_ibp_prior(z: &FeatureMatrix, alpha: f64) -> f64 {
    let n = z.n();
    let mut lp = z.k() as f64 * alpha.ln() - alpha * harmonic(n);
    for k in 0..z.k() {
        let mk = z.m(k);
        if mk == 0 {
            return f64::NEG_INFINITY;
        }
        lp += ln_factorial(mk - 1) + ln_factorial(n - mk) - ln_factorial(n);
    }
    for g in z.column_group_sizes() {
        lp -= ln_factorial(g);
    }
    lp
}

impl ChainState {
    /// All-empty state (K = 0).
    pub fn empty(g: &Graph, tying: Tying) -> ChainState {
        ChainState {
            z: FeatureMatrix::empty(g.n()),
            rho: LinkDensity::flat(tying, 0),
            stats: SuffStats::empty(0, g.n_links()),
        }
    }

    /// Build a state from explicit Z and rho, recomputing all caches.
    pub fn from_parts(g: &Graph, z: FeatureMatrix, rho: LinkDensity) -> ChainState {
        assert_eq!(z.k(), rho.k());
        assert_eq!(z.n(), g.n());
        let mut s = ChainState {
            stats: SuffStats::empty(z.k(), g.n_links()),
            z,
            rho,
        };
        s.recompute_stats(g);
        s
    }

    /// Random initialization: every vertex gets one uniform feature among
    /// `k_init`, empty columns are pruned, rho is drawn from its prior.
    pub fn init_random<R: Rng>(g: &Graph, tying: Tying, h: &Hyper, rng: &mut R) -> ChainState {
        let mut z = FeatureMatrix::empty(g.n());
        for _ in 0..h.k_init {
            z.push_column();
        }
        for i in 0..g.n() {
            let k = rng.random_range(0..h.k_init);
            z.set(i, k);
        }
        for k in (0..z.k()).rev() {
            if z.m(k) == 0 {
                z.remove_column(k);
            }
        }
        let rho = LinkDensity::sample_prior(tying, z.k(), h, rng);
        ChainState::from_parts(g, z, rho)
    }

    pub fn k(&self) -> usize {
        self.z.k()
    }

    /// Rebuild every cached statistic from scratch.
    pub fn recompute_stats(&mut self, g: &Graph) {
        let k = self.z.k();
        let kk = k * k;
        let mut st = SuffStats::empty(k, g.n_links());
        for c in 0..k {
            st.m[c] = self.z.m(c) as u32;
        }
        for i in 0..g.n() {
            let row = self.z.row(i);
            for &a in row {
                for &b in row {
                    st.d[a as usize * k + b as usize] += 1;
                }
            }
        }
        let add_ordered_pair = |c: &mut Vec<u64>, i: usize, j: usize, z: &FeatureMatrix| {
            for &a in z.row(i) {
                for &b in z.row(j) {
                    c[a as usize * k + b as usize] += 1;
                    c[b as usize * k + a as usize] += 1;
                }
            }
        };
        for &(i, j) in g.links() {
            add_ordered_pair(&mut st.c, i as usize, j as usize, &self.z);
        }
        for &(i, j) in g.missing() {
            add_ordered_pair(&mut st.c, i as usize, j as usize, &self.z);
        }
        debug_assert!(st.c.len() == kk && st.d.len() == kk);
        st.zero_links = 0;
        st.link_f_sum = 0.0;
        for (e, &(i, j)) in g.links().iter().enumerate() {
            let w = self.canonical_w(i as usize, j as usize);
            st.link_w[e] = w;
            if w < 0.0 {
                st.link_f[e] = log1mexp(w);
                st.link_f_sum += st.link_f[e];
            } else {
                st.link_f[e] = 0.0;
                st.zero_links += 1;
            }
        }
        self.stats = st;
    }

    /// Dyad weight w_ij summed in canonical (sorted row) order, so the
    /// value is a pure function of the current state.
    fn canonical_w(&self, i: usize, j: usize) -> f64 {
        let k = self.z.k();
        let mut w = 0.0;
        for &a in self.z.row(i) {
            for &b in self.z.row(j) {
                w += self.rho.lq_dense()[a as usize * k + b as usize];
            }
        }
        w
    }

    /// Exact sum of w over observed non-links, O(K^2) from the caches.
    pub fn nonlink_sum(&self) -> f64 {
        let k = self.z.k();
        let lq = self.rho.lq_dense();
        let mut s = 0.0;
        for a in 0..k {
            for b in 0..k {
                let pairs = self.stats.m[a] as f64 * self.stats.m[b] as f64
                    - self.stats.d[a * k + b] as f64
                    - self.stats.c[a * k + b] as f64;
                s += lq[a * k + b] * pairs;
            }
        }
        0.5 * s
    }

    /// Finite part of the log likelihood plus the unexplained-link count.
    pub fn log_lik_parts(&self) -> (f64, usize) {
        (self.stats.link_f_sum + self.nonlink_sum(), self.stats.zero_links)
    }

    pub fn log_likelihood(&self) -> f64 {
        let (finite, zeros) = self.log_lik_parts();
        if zeros > 0 {
            f64::NEG_INFINITY
        } else {
            finite
        }
    }

    pub fn log_rho_prior(&self, h: &Hyper) -> f64 {
        self.rho.log_prior(h)
    }

    pub fn log_joint(&self, h: &Hyper) -> f64 {
        self.log_likelihood() + log_ibp_prior(&self.z, h.alpha) + self.log_rho_prior(h)
    }

    /// Flip z_ik and update every cache, touching only dyads incident to
    /// vertex i. Returns the change in the extended likelihood.
    pub fn toggle(&mut self, g: &Graph, i: usize, k: usize) -> ToggleDelta {
        if self.z.has(i, k) {
            self.toggle_off(g, i, k)
        } else {
            self.toggle_on(g, i, k)
        }
    }

    /// Change of the non-link sum if z_ik flipped on, evaluated in a
    /// state where z_ik = 0. The flip adds w-contributions lq[k][b] for
    /// every observed non-link partner of i with feature b:
    ///   sum_b lq[k][b] (m_b - z_ib) - sum_{j in links+missing} sum_{b in row_j} lq[k][b]
    fn nonlink_delta_on(&self, g: &Graph, i: usize, k: usize) -> f64 {
        let kdim = self.z.k();
        let lq = self.rho.lq_dense();
        let lqk = &lq[k * kdim..(k + 1) * kdim];
        let mut d = 0.0;
        for b in 0..kdim {
            d += lqk[b] * self.stats.m[b] as f64;
        }
        for &b in self.z.row(i) {
            d -= lqk[b as usize];
        }
        let mut excl = 0.0;
        for &(j, _) in g.neighbors(i) {
            for &b in self.z.row(j as usize) {
                excl += lqk[b as usize];
            }
        }
        for &j in g.missing_partners(i) {
            for &b in self.z.row(j as usize) {
                excl += lqk[b as usize];
            }
        }
        d - excl
    }

    fn update_counts(&mut self, i: usize, k: usize, g: &Graph, sign: i64) {
        let kdim = self.z.k();
        self.stats.m[k] = (self.stats.m[k] as i64 + sign) as u32;
        // D: row i currently includes k (call sites arrange this).
        for &b in self.z.row(i) {
            let b = b as usize;
            if b == k {
                continue;
            }
            self.stats.d[k * kdim + b] = (self.stats.d[k * kdim + b] as i64 + sign) as u64;
            self.stats.d[b * kdim + k] = (self.stats.d[b * kdim + k] as i64 + sign) as u64;
        }
        self.stats.d[k * kdim + k] = (self.stats.d[k * kdim + k] as i64 + sign) as u64;
        // C over both orderings of every link and missing dyad at i.
        let bump = |c: &mut Vec<u64>, j: usize, z: &FeatureMatrix| {
            for &b in z.row(j) {
                let b = b as usize;
                c[k * kdim + b] = (c[k * kdim + b] as i64 + sign) as u64;
                c[b * kdim + k] = (c[b * kdim + k] as i64 + sign) as u64;
            }
        };
        for &(j, _) in g.neighbors(i) {
            bump(&mut self.stats.c, j as usize, &self.z);
        }
        for &j in g.missing_partners(i) {
            bump(&mut self.stats.c, j as usize, &self.z);
        }
    }

    /// Recompute w and f for every link incident to i, accumulating the
    /// finite-part and zero-count deltas.
    fn refresh_incident_links(&mut self, g: &Graph, i: usize) -> (f64, isize) {
        let mut d_fin = 0.0;
        let mut d_zero = 0isize;
        for &(j, e) in g.neighbors(i) {
            let e = e as usize;
            let (lo, hi) = if (i as u32) < j { (i, j as usize) } else { (j as usize, i) };
            let w_old = self.stats.link_w[e];
            let f_old = self.stats.link_f[e];
            let was_zero = w_old == 0.0;
            let w_new = self.canonical_w(lo, hi);
            let is_zero = w_new == 0.0;
            let f_new = if is_zero { 0.0 } else { log1mexp(w_new) };
            self.stats.link_w[e] = w_new;
            self.stats.link_f[e] = f_new;
            let term = (if is_zero { 0.0 } else { f_new }) - (if was_zero { 0.0 } else { f_old });
            d_fin += term;
            self.stats.link_f_sum += term;
            d_zero += is_zero as isize - was_zero as isize;
        }
        self.stats.zero_links = (self.stats.zero_links as isize + d_zero) as usize;
        (d_fin, d_zero)
    }

    fn toggle_on(&mut self, g: &Graph, i: usize, k: usize) -> ToggleDelta {
        let d_nl = self.nonlink_delta_on(g, i, k);
        self.z.set(i, k);
        self.update_counts(i, k, g, 1);
        let (d_link, d_zero) = self.refresh_incident_links(g, i);
        ToggleDelta {
            d_finite: d_nl + d_link,
            d_zero_links: d_zero,
        }
    }

    fn toggle_off(&mut self, g: &Graph, i: usize, k: usize) -> ToggleDelta {
        self.update_counts(i, k, g, -1);
        self.z.unset(i, k);
        // Evaluated after removal, this is bitwise the negation of the
        // matching toggle_on delta.
        let d_nl = -self.nonlink_delta_on(g, i, k);
        let (d_link, d_zero) = self.refresh_incident_links(g, i);
        ToggleDelta {
            d_finite: d_nl + d_link,
            d_zero_links: d_zero,
        }
    }

    /// Append an empty class with the given r-space parameters.
    pub fn push_class(&mut self, vals: &[f64]) {
        let k = self.z.k();
        self.z.push_column();
        self.rho.push_class(vals);
        self.stats.m.push(0);
        let kk = k + 1;
        let grow = |old: &Vec<u64>| {
            let mut new = vec![0u64; kk * kk];
            for a in 0..k {
                new[a * kk..a * kk + k].copy_from_slice(&old[a * k..(a + 1) * k]);
            }
            new
        };
        self.stats.c = grow(&self.stats.c);
        self.stats.d = grow(&self.stats.d);
        // lq changed shape but no w can involve the empty class yet.
    }

    /// Remove class k (must be empty), returning its parameters.
    pub fn remove_class(&mut self, k: usize) -> Vec<f64> {
        assert_eq!(self.z.m(k), 0, "removed class must be empty");
        let kdim = self.z.k();
        self.z.remove_column(k);
        let vals = self.rho.extract_class(k);
        self.stats.m.remove(k);
        let shrink = |old: &Vec<u64>| {
            let mut new = Vec::with_capacity((kdim - 1) * (kdim - 1));
            for a in 0..kdim {
                if a == k {
                    continue;
                }
                for b in 0..kdim {
                    if b == k {
                        continue;
                    }
                    new.push(old[a * kdim + b]);
                }
            }
            new
        };
        self.stats.c = shrink(&self.stats.c);
        self.stats.d = shrink(&self.stats.d);
        vals
    }

    /// Re-insert an empty class at index k (inverse of `remove_class`).
    pub fn insert_class(&mut self, k: usize, vals: &[f64]) {
        let kdim = self.z.k();
        self.z.insert_empty_column(k);
        self.rho.insert_class(k, vals);
        self.stats.m.insert(k, 0);
        let kk = kdim + 1;
        let grow = |old: &Vec<u64>| {
            let mut new = vec![0u64; kk * kk];
            for a in 0..kdim {
                let na = a + usize::from(a >= k);
                for b in 0..kdim {
                    let nb = b + usize::from(b >= k);
                    new[na * kk + nb] = old[a * kdim + b];
                }
            }
            new
        };
        self.stats.c = grow(&self.stats.c);
        self.stats.d = grow(&self.stats.d);
    }

    /// Recompute all link weights from the current rho (used after HMC
    /// accepts a new set of parameters).
    pub fn refresh_all_links(&mut self, g: &Graph) {
        self.stats.link_f_sum = 0.0;
        self.stats.zero_links = 0;
        for (e, &(i, j)) in g.links().iter().enumerate() {
            let w = self.canonical_w(i as usize, j as usize);
            self.stats.link_w[e] = w;
            if w < 0.0 {
                self.stats.link_f[e] = log1mexp(w);
                self.stats.link_f_sum += self.stats.link_f[e];
            } else {
                self.stats.link_f[e] = 0.0;
                self.stats.zero_links += 1;
            }
        }
    }

    /// Re-sum the cached per-link values to stop float drift in the
    /// running total; cheap, run once per iteration.
    pub fn canonicalize_link_sum(&mut self) {
        let mut s = 0.0;
        for (e, &w) in self.stats.link_w.iter().enumerate() {
            if w < 0.0 {
                s += self.stats.link_f[e];
            }
        }
        self.stats.link_f_sum = s;
    }

    /// Maximum absolute discrepancy between cached stats and a from
    /// scratch recomputation (tests and debug checks).
    pub fn consistency_error(&self, g: &Graph) -> f64 {
        let mut fresh = self.clone();
        fresh.recompute_stats(g);
        if fresh.stats.m != self.stats.m
            || fresh.stats.c != self.stats.c
            || fresh.stats.d != self.stats.d
            || fresh.stats.zero_links != self.stats.zero_links
        {
            return f64::INFINITY;
        }
        let mut err: f64 = 0.0;
        for e in 0..self.stats.link_w.len() {
            err = err.max((fresh.stats.link_w[e] - self.stats.link_w[e]).abs());
            err = err.max((fresh.stats.link_f[e] - self.stats.link_f[e]).abs());
        }
        err.max((fresh.stats.link_f_sum - self.stats.link_f_sum).abs())
    }
}
