//! Hamiltonian updates for the link density parameters with the
//! feature matrix held fixed.
//!
//! The potential is the negative log of likelihood times prior over the
//! free logit-space parameters r (Jacobian included):
//!
//!   U(r) = -[ sum_links log(1 - e^w) + sum_f lq_f Mfold_f
//!             + sum_f (a_f r_f - (a_f + b_f) softplus(r_f)) ]
//!
//! where Mfold_f collects half the observed non-link pair counts of the
//! dense cells owned by parameter f, so the middle term is the familiar
//! 1/2 sum_ab lq_ab (m_a m_b - D_ab - C_ab). Both the energy and its
//! gradient reduce to per-parameter dot products once each link's
//! feature pairs are folded to free-parameter counts, which happens once
//! per trajectory.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::graph::Graph;
use crate::latent::{ChainState, Hyper, R_CLAMP};
use crate::math::{log1mexp, sigmoid, softplus};

/// Everything fixed during one trajectory: pseudo-counts, folded
/// non-link pair counts, and per-link sparse pair counts over the free
/// parameters.
pub struct HmcContext {
    a: Vec<f64>,
    b: Vec<f64>,
    mfold: Vec<f64>,
    /// (free param, pair count) per link that has interacting features.
    links: Vec<Vec<(usize, f64)>>,
}

impl HmcContext {
    pub fn new(s: &ChainState, g: &Graph, h: &Hyper) -> HmcContext {
        let k = s.k();
        let nf = s.rho.n_free();
        let mut a = Vec::with_capacity(nf);
        let mut b = Vec::with_capacity(nf);
        for f in 0..nf {
            let (pa, pb) = h.pseudo_counts(s.rho.role_of_free(f));
            a.push(pa);
            b.push(pb);
        }
        let mut dense = vec![0.0; k * k];
        for x in 0..k {
            for y in 0..k {
                dense[x * k + y] = s.stats.m[x] as f64 * s.stats.m[y] as f64
                    - s.stats.d[x * k + y] as f64
                    - s.stats.c[x * k + y] as f64;
            }
        }
        let mfold: Vec<f64> = s
            .rho
            .fold_cells_to_free(&dense)
            .into_iter()
            .map(|v| 0.5 * v)
            .collect();

        let mut links = Vec::with_capacity(g.n_links());
        let mut scratch = vec![0.0; nf];
        for &(i, j) in g.links() {
            let mut touched: Vec<usize> = Vec::new();
            for &x in s.z.row(i as usize) {
                for &y in s.z.row(j as usize) {
                    let f = s.rho.free_of_cell(x as usize, y as usize);
                    if scratch[f] == 0.0 {
                        touched.push(f);
                    }
                    scratch[f] += 1.0;
                }
            }
            touched.sort_unstable();
            let mut cnt = Vec::with_capacity(touched.len());
            for &f in &touched {
                cnt.push((f, scratch[f]));
                scratch[f] = 0.0;
            }
            links.push(cnt);
        }
        HmcContext { a, b, mfold, links }
    }

    pub fn n_free(&self) -> usize {
        self.a.len()
    }

    /// Potential energy U(r).
    pub fn energy(&self, r: &[f64]) -> f64 {
        let lq: Vec<f64> = r.iter().map(|&v| -softplus(v)).collect();
        let mut log_p = 0.0;
        for cnt in &self.links {
            if cnt.is_empty() {
                // no interacting features: constant (impossible) link,
                // shared by every point of the trajectory
                continue;
            }
            let w: f64 = cnt.iter().map(|&(f, c)| c * lq[f]).sum();
            log_p += log1mexp(w);
        }
        for f in 0..self.n_free() {
            log_p += lq[f] * self.mfold[f];
            log_p += self.a[f] * r[f] - (self.a[f] + self.b[f]) * softplus(r[f]);
        }
        -log_p
    }

    /// Gradient of U with respect to r.
    pub fn grad(&self, r: &[f64], out: &mut [f64]) {
        let nf = self.n_free();
        let lq: Vec<f64> = r.iter().map(|&v| -softplus(v)).collect();
        let mut l = vec![0.0; nf];
        for cnt in &self.links {
            if cnt.is_empty() {
                continue;
            }
            let w: f64 = cnt.iter().map(|&(f, c)| c * lq[f]).sum();
            // d log(1-e^w)/dw = -e^w/(1-e^w) = -1/expm1(-w)
            let ffac = 1.0 / (-w).exp_m1();
            for &(f, c) in cnt {
                l[f] += ffac * c;
            }
        }
        for f in 0..nf {
            let rho = sigmoid(r[f]);
            out[f] = rho * (self.mfold[f] - l[f]) - self.a[f] + (self.a[f] + self.b[f]) * rho;
        }
    }
}

/// One trajectory with `h.hmc.leapfrog_steps` leapfrog steps of size
/// `eps`. Returns (accepted, acceptance probability); the probability
/// feeds step-size adaptation. A position outside the clamp box rejects
/// immediately, keeping the proposal map exactly reversible.
pub fn hmc_update<R: Rng>(
    s: &mut ChainState,
    g: &Graph,
    h: &Hyper,
    eps: f64,
    rng: &mut R,
) -> (bool, f64) {
    let ctx = HmcContext::new(s, g, h);
    let nf = ctx.n_free();
    let mut r = s.rho.free_values();
    let mut p: Vec<f64> = (0..nf).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();

    let h0 = ctx.energy(&r) + 0.5 * p.iter().map(|v| v * v).sum::<f64>();
    let mut grad = vec![0.0; nf];

    ctx.grad(&r, &mut grad);
    for f in 0..nf {
        p[f] -= 0.5 * eps * grad[f];
    }
    for step in 0..h.hmc.leapfrog_steps {
        for f in 0..nf {
            r[f] += eps * p[f];
            if r[f].abs() > R_CLAMP {
                return (false, 0.0);
            }
        }
        ctx.grad(&r, &mut grad);
        let scale = if step + 1 == h.hmc.leapfrog_steps { 0.5 } else { 1.0 };
        for f in 0..nf {
            p[f] -= scale * eps * grad[f];
        }
    }

    let h1 = ctx.energy(&r) + 0.5 * p.iter().map(|v| v * v).sum::<f64>();
    let accept_p = if h1 <= h0 { 1.0 } else { (h0 - h1).exp() };
    let u: f64 = rng.random();
    if u < accept_p {
        s.rho.set_free(&r);
        s.refresh_all_links(g);
        (true, accept_p)
    } else {
        (false, accept_p)
    }
}
