//! Symmetric class-link probability matrix with parameter tying.
//!
//! Free parameters live in logit space r; the dense K x K views of
//! rho = sigmoid(r) and lq = log(1 - rho) are cached and rebuilt on
//! every mutation. lq is strictly negative thanks to the clamp, so a
//! dyad weight w = z_i' P z_j is zero exactly when the feature rows do
//! not interact at all.

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::latent::Hyper;
use crate::math::{logit, sigmoid, softplus};

/// Clamp bound for logit-space parameters.
pub const R_CLAMP: f64 = 30.0;

/// Parameter tying modes for the class-link matrix.
///
/// `Full` keeps one parameter per unordered class pair (RM), `PerClass`
/// one diagonal parameter per class plus a shared between-class value
/// (DB), `Shared` a single within and a single between value (HW).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tying {
    Full,
    PerClass,
    Shared,
}

/// Role of a free parameter, deciding which Beta pseudo-counts apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    Within,
    Between,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkDensity {
    tying: Tying,
    k: usize,
    /// Full mode: packed upper triangle, idx(a<=b) = b(b+1)/2 + a.
    tri: Vec<f64>,
    /// PerClass mode: per-class diagonal values.
    diag: Vec<f64>,
    /// Shared mode within value; also used as scratch default.
    within: f64,
    /// Shared between value (PerClass and Shared modes).
    between: f64,
    rho: Vec<f64>,
    lq: Vec<f64>,
}

fn tri_idx(a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    b * (b + 1) / 2 + a
}

fn clamp_r(r: f64) -> f64 {
    r.clamp(-R_CLAMP, R_CLAMP)
}

impl LinkDensity {
    /// All-parameters-at-zero (rho = 1/2) density for `k` classes.
    pub fn flat(tying: Tying, k: usize) -> LinkDensity {
        let mut d = LinkDensity {
            tying,
            k,
            tri: match tying {
                Tying::Full => vec![0.0; k * (k + 1) / 2],
                _ => Vec::new(),
            },
            diag: match tying {
                Tying::PerClass => vec![0.0; k],
                _ => Vec::new(),
            },
            within: 0.0,
            between: 0.0,
            rho: Vec::new(),
            lq: Vec::new(),
        };
        d.rebuild();
        d
    }

    /// Sample every free parameter from its Beta prior.
    pub fn sample_prior<R: Rng>(tying: Tying, k: usize, h: &Hyper, rng: &mut R) -> LinkDensity {
        let mut d = LinkDensity::flat(tying, k);
        let n = d.n_free();
        let mut vals = Vec::with_capacity(n);
        for f in 0..n {
            vals.push(draw_prior_r(d.role_of_free(f), h, rng));
        }
        d.set_free(&vals);
        d
    }

    pub fn tying(&self) -> Tying {
        self.tying
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rho(&self, a: usize, b: usize) -> f64 {
        self.rho[a * self.k + b]
    }

    /// log(1 - rho), strictly negative.
    pub fn lq(&self, a: usize, b: usize) -> f64 {
        self.lq[a * self.k + b]
    }

    pub fn lq_dense(&self) -> &[f64] {
        &self.lq
    }

    pub fn r(&self, a: usize, b: usize) -> f64 {
        match self.tying {
            Tying::Full => self.tri[tri_idx(a, b)],
            Tying::PerClass => {
                if a == b {
                    self.diag[a]
                } else {
                    self.between
                }
            }
            Tying::Shared => {
                if a == b {
                    self.within
                } else {
                    self.between
                }
            }
        }
    }

    fn rebuild(&mut self) {
        let k = self.k;
        self.rho.clear();
        self.lq.clear();
        self.rho.reserve(k * k);
        self.lq.reserve(k * k);
        for a in 0..k {
            for b in 0..k {
                let r = self.r(a, b);
                self.rho.push(sigmoid(r));
                self.lq.push(-softplus(r));
            }
        }
    }

    pub fn n_free(&self) -> usize {
        match self.tying {
            Tying::Full => self.k * (self.k + 1) / 2,
            Tying::PerClass => {
                if self.k == 0 {
                    0
                } else {
                    self.k + 1
                }
            }
            Tying::Shared => {
                if self.k == 0 {
                    0
                } else {
                    2
                }
            }
        }
    }

    /// Free parameter layout: Full = packed triangle order; PerClass =
    /// [diag_0 .. diag_{K-1}, between]; Shared = [within, between].
    pub fn free_values(&self) -> Vec<f64> {
        match self.tying {
            Tying::Full => self.tri.clone(),
            Tying::PerClass => {
                if self.k == 0 {
                    Vec::new()
                } else {
                    let mut v = self.diag.clone();
                    v.push(self.between);
                    v
                }
            }
            Tying::Shared => {
                if self.k == 0 {
                    Vec::new()
                } else {
                    vec![self.within, self.between]
                }
            }
        }
    }

    pub fn set_free(&mut self, vals: &[f64]) {
        assert_eq!(vals.len(), self.n_free());
        match self.tying {
            Tying::Full => {
                for (dst, &v) in self.tri.iter_mut().zip(vals) {
                    *dst = clamp_r(v);
                }
            }
            Tying::PerClass => {
                if self.k > 0 {
                    for (dst, &v) in self.diag.iter_mut().zip(vals) {
                        *dst = clamp_r(v);
                    }
                    self.between = clamp_r(vals[self.k]);
                }
            }
            Tying::Shared => {
                if self.k > 0 {
                    self.within = clamp_r(vals[0]);
                    self.between = clamp_r(vals[1]);
                }
            }
        }
        self.rebuild();
    }

    pub fn role_of_free(&self, f: usize) -> ParamRole {
        match self.tying {
            Tying::Full => {
                // Diagonal cells sit at the end of each triangle row:
                // idx(b, b) = b(b+1)/2 + b = (b+1)(b+2)/2 - 1.
                let mut b = 0;
                let mut idx = f;
                while idx > b {
                    idx -= b + 1;
                    b += 1;
                }
                if idx == b {
                    ParamRole::Within
                } else {
                    ParamRole::Between
                }
            }
            Tying::PerClass => {
                if f < self.k {
                    ParamRole::Within
                } else {
                    ParamRole::Between
                }
            }
            Tying::Shared => {
                if f == 0 {
                    ParamRole::Within
                } else {
                    ParamRole::Between
                }
            }
        }
    }

    /// Free-parameter index owning dense cell (a, b).
    pub fn free_of_cell(&self, a: usize, b: usize) -> usize {
        match self.tying {
            Tying::Full => tri_idx(a, b),
            Tying::PerClass => {
                if a == b {
                    a
                } else {
                    self.k
                }
            }
            Tying::Shared => usize::from(a != b),
        }
    }

    /// Fold a dense K x K cell table into per-free-parameter sums.
    pub fn fold_cells_to_free(&self, dense: &[f64]) -> Vec<f64> {
        assert_eq!(dense.len(), self.k * self.k);
        let mut out = vec![0.0; self.n_free()];
        for a in 0..self.k {
            for b in 0..self.k {
                out[self.free_of_cell(a, b)] += dense[a * self.k + b];
            }
        }
        out
    }

    /// Number of new free parameters a pushed class introduces. The
    /// first class also instantiates any shared parameters.
    pub fn n_new_params(&self) -> usize {
        match self.tying {
            Tying::Full => self.k + 1,
            Tying::PerClass => 1 + usize::from(self.k == 0),
            Tying::Shared => usize::from(self.k == 0) * 2,
        }
    }

    /// Append class K. `vals` are r-space values in the layout
    /// [(K,0), .., (K,K-1), (K,K)] for Full and [(K,K)] for PerClass;
    /// the first class additionally carries the shared between value
    /// ([diag, between] for PerClass, [within, between] for Shared).
    pub fn push_class(&mut self, vals: &[f64]) {
        assert_eq!(vals.len(), self.n_new_params());
        match self.tying {
            Tying::Full => {
                self.tri.extend(vals.iter().map(|&v| clamp_r(v)));
            }
            Tying::PerClass => {
                self.diag.push(clamp_r(vals[0]));
                if self.k == 0 {
                    self.between = clamp_r(vals[1]);
                }
            }
            Tying::Shared => {
                if self.k == 0 {
                    self.within = clamp_r(vals[0]);
                    self.between = clamp_r(vals[1]);
                }
            }
        }
        self.k += 1;
        self.rebuild();
    }

    /// Remove class k, returning its parameters in the same layout that
    /// `insert_class(k, ..)` accepts: interactions with the surviving
    /// classes in their post-removal order, then the diagonal value.
    /// Removing the last class also hands back the shared parameters so
    /// remove/insert are exact inverses in every mode.
    pub fn extract_class(&mut self, k: usize) -> Vec<f64> {
        let kk = self.k;
        assert!(k < kk);
        let out = match self.tying {
            Tying::Full => {
                let mut vals: Vec<f64> = (0..kk)
                    .filter(|&l| l != k)
                    .map(|l| self.tri[tri_idx(k, l)])
                    .collect();
                vals.push(self.tri[tri_idx(k, k)]);
                let mut tri = Vec::with_capacity((kk - 1) * kk / 2);
                for b in 0..kk {
                    if b == k {
                        continue;
                    }
                    for a in 0..=b {
                        if a == k {
                            continue;
                        }
                        tri.push(self.tri[tri_idx(a, b)]);
                    }
                }
                self.tri = tri;
                vals
            }
            Tying::PerClass => {
                let mut vals = vec![self.diag.remove(k)];
                if kk == 1 {
                    vals.push(self.between);
                }
                vals
            }
            Tying::Shared => {
                if kk == 1 {
                    vec![self.within, self.between]
                } else {
                    Vec::new()
                }
            }
        };
        self.k -= 1;
        self.rebuild();
        out
    }

    /// Re-insert a class at index k with parameters from `extract_class`.
    pub fn insert_class(&mut self, k: usize, vals: &[f64]) {
        assert!(k <= self.k);
        match self.tying {
            Tying::Full => {
                assert_eq!(vals.len(), self.k + 1);
                let old_k = self.k;
                let mut tri = Vec::with_capacity((old_k + 1) * (old_k + 2) / 2);
                let old_pos = |a: usize, b: usize| tri_idx(a, b);
                for b in 0..=old_k {
                    for a in 0..=b {
                        let v = if a == k && b == k {
                            vals[old_k]
                        } else if b == k {
                            vals[a - usize::from(a > k)]
                        } else if a == k {
                            vals[b - usize::from(b > k)]
                        } else {
                            let oa = a - usize::from(a > k);
                            let ob = b - usize::from(b > k);
                            self.tri[old_pos(oa, ob)]
                        };
                        tri.push(v);
                    }
                }
                self.tri = tri;
            }
            Tying::PerClass => {
                assert_eq!(vals.len(), 1 + usize::from(self.k == 0));
                if self.k == 0 {
                    self.between = vals[1];
                }
                self.diag.insert(k, vals[0]);
            }
            Tying::Shared => {
                if self.k == 0 {
                    assert_eq!(vals.len(), 2);
                    self.within = vals[0];
                    self.between = vals[1];
                } else {
                    assert!(vals.is_empty());
                }
            }
        }
        self.k += 1;
        self.rebuild();
    }

    /// Log density of the Beta priors over the free parameters, in rho
    /// space. Each tied parameter contributes exactly once.
    pub fn log_prior(&self, h: &Hyper) -> f64 {
        let mut lp = 0.0;
        for f in 0..self.n_free() {
            let (a, b) = h.pseudo_counts(self.role_of_free(f));
            let r = self.free_values()[f];
            lp += crate::math::beta_ln_pdf(sigmoid(r), a, b);
        }
        lp
    }
}

/// Draw one r-space value from the Beta prior for the given role.
pub fn draw_prior_r<R: Rng>(role: ParamRole, h: &Hyper, rng: &mut R) -> f64 {
    let (a, b) = h.pseudo_counts(role);
    let rho = Beta::new(a, b).expect("valid pseudo-counts").sample(rng);
    clamp_r(logit(rho))
}
