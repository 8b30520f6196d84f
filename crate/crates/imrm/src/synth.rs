//! Synthetic network generators with ground truth: block models with
//! homogeneous (HW), per-class diagonal (DB), or arbitrary (RM)
//! densities, and their multiple-membership variants built as the
//! elementwise union Y v RYR^T for a random derangement R.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::Graph;
use crate::latent::FeatureMatrix;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("density {0} outside [0,1]")]
    BadDensity(f64),
    #[error("{0}")]
    BadShape(String),
    #[error("need at least 2 vertices for a derangement")]
    TooSmall,
}

/// Block density parameterizations for the three families.
#[derive(Debug, Clone)]
pub enum BlockParams {
    /// One within-class and one between-class density.
    Hw { rho_c: f64, rho_0: f64 },
    /// Per-class within densities, one between density.
    Db { rho_diag: Vec<f64>, rho_0: f64 },
    /// Full symmetric k x k density matrix, row-major.
    Rm { rho: Vec<f64> },
}

impl BlockParams {
    /// The stock DB preset: within densities evenly spaced from 0.2 to 1.
    pub fn db_default(k: usize, rho_0: f64) -> BlockParams {
        let rho_diag = (0..k)
            .map(|i| {
                if k == 1 {
                    1.0
                } else {
                    // convex combination is exact at both endpoints
                    let t = i as f64 / (k - 1) as f64;
                    0.2 * (1.0 - t) + 1.0 * t
                }
            })
            .collect();
        BlockParams::Db { rho_diag, rho_0 }
    }

    /// The stock RM preset: strong diagonal, off-diagonal overlap graded
    /// from 0 up to 0.3 across the class pairs.
    pub fn rm_default(k: usize) -> BlockParams {
        let mut rho = vec![0.0; k * k];
        for c in 0..k {
            rho[c * k + c] = 0.9;
        }
        let pairs = k * (k - 1) / 2;
        let mut t = 0usize;
        for a in 0..k {
            for b in (a + 1)..k {
                let v = if pairs <= 1 {
                    0.3
                } else {
                    0.3 * t as f64 / (pairs - 1) as f64
                };
                rho[a * k + b] = v;
                rho[b * k + a] = v;
                t += 1;
            }
        }
        BlockParams::Rm { rho }
    }

    pub fn validate(&self, k: usize) -> Result<(), SynthError> {
        let check = |v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(SynthError::BadDensity(v))
            }
        };
        match self {
            BlockParams::Hw { rho_c, rho_0 } => {
                check(*rho_c)?;
                check(*rho_0)
            }
            BlockParams::Db { rho_diag, rho_0 } => {
                if rho_diag.len() != k {
                    return Err(SynthError::BadShape(format!(
                        "{} within densities for k={}",
                        rho_diag.len(),
                        k
                    )));
                }
                for &v in rho_diag {
                    check(v)?;
                }
                check(*rho_0)
            }
            BlockParams::Rm { rho } => {
                if rho.len() != k * k {
                    return Err(SynthError::BadShape(format!(
                        "{} densities for k={}",
                        rho.len(),
                        k
                    )));
                }
                for a in 0..k {
                    for b in 0..k {
                        check(rho[a * k + b])?;
                        if rho[a * k + b] != rho[b * k + a] {
                            return Err(SynthError::BadShape(
                                "density matrix must be symmetric".into(),
                            ));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    pub fn density(&self, a: usize, b: usize, k: usize) -> f64 {
        match self {
            BlockParams::Hw { rho_c, rho_0 } => {
                if a == b {
                    *rho_c
                } else {
                    *rho_0
                }
            }
            BlockParams::Db { rho_diag, rho_0 } => {
                if a == b {
                    rho_diag[a]
                } else {
                    *rho_0
                }
            }
            BlockParams::Rm { rho } => rho[a * k + b],
        }
    }

    pub fn matrix(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                out[a * k + b] = self.density(a, b, k);
            }
        }
        out
    }
}

/// Generating configuration attached to a synthetic graph. `rho` is the
/// raw density matrix over the truth columns; unlike inference state it
/// may contain exact zeros and ones.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub labels: Vec<usize>,
    pub z: FeatureMatrix,
    pub rho: Vec<f64>,
    /// Multi-membership vertices whose image class equals their own
    /// (they carry one feature instead of two).
    pub dedup_count: usize,
}

impl GroundTruth {
    /// Sidecar format: one line per vertex, feature ids comma-separated.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("vertex,features\n");
        for i in 0..self.z.n() {
            let feats: Vec<String> = self.z.row(i).iter().map(|f| f.to_string()).collect();
            out.push_str(&format!("{},{}\n", i, feats.join(",")));
        }
        out
    }
}

fn sample_block_links<R: Rng>(
    labels: &[usize],
    params: &BlockParams,
    k: usize,
    rng: &mut R,
) -> Vec<(u32, u32)> {
    let n = labels.len();
    let mut links = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = params.density(labels[i], labels[j], k);
            if rng.random::<f64>() < p {
                links.push((i as u32, j as u32));
            }
        }
    }
    links
}

/// Single-membership block-model graph: contiguous classes of
/// `size_per_class` vertices, dyads Bernoulli in the block densities.
pub fn gen_single(
    params: &BlockParams,
    k: usize,
    size_per_class: usize,
    seed: u64,
) -> Result<(Graph, GroundTruth), SynthError> {
    params.validate(k)?;
    let n = k * size_per_class;
    let labels: Vec<usize> = (0..n).map(|v| v / size_per_class).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let links = sample_block_links(&labels, params, k, &mut rng);
    let g = Graph::new(n, &links, &[]).expect("generated dyads are valid");
    let rows: Vec<Vec<u32>> = labels.iter().map(|&c| vec![c as u32]).collect();
    let truth = GroundTruth {
        z: FeatureMatrix::from_rows(n, k, &rows),
        rho: params.matrix(k),
        labels,
        dedup_count: 0,
    };
    Ok((g, truth))
}

fn random_derangement<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            return perm;
        }
    }
}

/// Multiple-membership variant: base graph Y unioned with its image
/// under a uniform random derangement, Y v RYR^T. Each vertex carries
/// its own class and its image's class (one feature when they agree).
pub fn gen_multi(
    params: &BlockParams,
    k: usize,
    size_per_class: usize,
    seed: u64,
) -> Result<(Graph, GroundTruth), SynthError> {
    params.validate(k)?;
    let n = k * size_per_class;
    if n < 2 {
        return Err(SynthError::TooSmall);
    }
    let labels: Vec<usize> = (0..n).map(|v| v / size_per_class).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = sample_block_links(&labels, params, k, &mut rng);
    let sigma = random_derangement(n, &mut rng);
    // (RYR^T)_ij = Y_{sigma(i) sigma(j)}: pull base links back through
    // the inverse permutation
    let mut inv = vec![0usize; n];
    for (v, &s) in sigma.iter().enumerate() {
        inv[s] = v;
    }
    let mut links: Vec<(u32, u32)> = base.clone();
    for &(a, b) in &base {
        let (x, y) = (inv[a as usize] as u32, inv[b as usize] as u32);
        links.push((x.min(y), x.max(y)));
    }
    let g = Graph::new(n, &links, &[]).expect("generated dyads are valid");

    let mut dedup_count = 0;
    let mut rows: Vec<Vec<u32>> = Vec::with_capacity(n);
    for v in 0..n {
        let own = labels[v];
        let image = labels[sigma[v]];
        if image == own {
            dedup_count += 1;
            rows.push(vec![own as u32]);
        } else {
            rows.push(vec![own as u32, (k + image) as u32]);
        }
    }
    let kz = 2 * k;
    let base_rho = params.matrix(k);
    let mut rho = vec![0.0; kz * kz];
    for a in 0..k {
        for b in 0..k {
            rho[a * kz + b] = base_rho[a * k + b];
            rho[(k + a) * kz + (k + b)] = base_rho[a * k + b];
        }
    }
    let truth = GroundTruth {
        z: FeatureMatrix::from_rows(n, kz, &rows),
        rho,
        labels,
        dedup_count,
    };
    Ok((g, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extreme_hw_gives_disjoint_cliques() {
        let params = BlockParams::Hw {
            rho_c: 1.0,
            rho_0: 0.0,
        };
        let (g, truth) = gen_single(&params, 3, 5, 42).unwrap();
        assert_eq!(g.n_links(), 3 * (5 * 4) / 2);
        for &(i, j) in g.links() {
            assert_eq!(truth.labels[i as usize], truth.labels[j as usize]);
        }
    }

    #[test]
    fn zero_density_gives_empty_graph() {
        let params = BlockParams::Hw {
            rho_c: 0.0,
            rho_0: 0.0,
        };
        let (g, _) = gen_single(&params, 2, 10, 7).unwrap();
        assert_eq!(g.n_links(), 0);
        let (gm, _) = gen_multi(&params, 2, 10, 7).unwrap();
        assert_eq!(gm.n_links(), 0);
    }

    #[test]
    fn db_block_fractions_track_targets() {
        let params = BlockParams::db_default(4, 0.02);
        let size = 60;
        let (g, truth) = gen_single(&params, 4, size, 11).unwrap();
        let within_pairs = (size * (size - 1) / 2) as f64;
        for c in 0..4 {
            let target = match &params {
                BlockParams::Db { rho_diag, .. } => rho_diag[c],
                _ => unreachable!(),
            };
            let count = g
                .links()
                .iter()
                .filter(|&&(i, j)| {
                    truth.labels[i as usize] == c && truth.labels[j as usize] == c
                })
                .count() as f64;
            let frac = count / within_pairs;
            let sigma = (target * (1.0 - target) / within_pairs).sqrt();
            assert!(
                (frac - target).abs() < 4.0 * sigma.max(1e-3),
                "class {}: {} vs {}",
                c,
                frac,
                target
            );
        }
    }

    #[test]
    fn multi_truth_features_and_link_bounds() {
        let params = BlockParams::Hw {
            rho_c: 0.9,
            rho_0: 0.05,
        };
        let (g, truth) = gen_multi(&params, 3, 20, 5).unwrap();
        let mut ones = 0;
        for v in 0..truth.z.n() {
            let row = truth.z.row(v);
            assert!(row.len() == 1 || row.len() == 2);
            ones += usize::from(row.len() == 1);
            assert_eq!(row[0] as usize, truth.labels[v]);
        }
        assert_eq!(ones, truth.dedup_count);
        // the union has at least the base links and at most twice them;
        // regenerate the base to compare
        let (gb, _) = gen_single(&params, 3, 20, 5).unwrap();
        assert!(g.n_links() >= gb.n_links());
        assert!(g.n_links() <= 2 * gb.n_links());
    }

    #[test]
    fn derangements_have_no_fixed_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [2, 3, 5, 17] {
            for _ in 0..50 {
                let d = random_derangement(n, &mut rng);
                assert!(d.iter().enumerate().all(|(i, &p)| i != p));
                let mut sorted = d.clone();
                sorted.sort_unstable();
                assert_eq!(sorted, (0..n).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn generation_is_deterministic_in_the_seed() {
        let params = BlockParams::rm_default(3);
        let (a, ta) = gen_multi(&params, 3, 8, 99).unwrap();
        let (b, tb) = gen_multi(&params, 3, 8, 99).unwrap();
        assert_eq!(a.links(), b.links());
        assert_eq!(ta.z, tb.z);
        let (c, _) = gen_multi(&params, 3, 8, 100).unwrap();
        assert!(a.links() != c.links());
    }
}
