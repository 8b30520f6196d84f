//! Chain driver. Per iteration: split-merge attempts, one full Gibbs
//! sweep, and for the feature models one HMC update of the densities
//! with step size adapted during burn-in. Single-membership models run
//! their collapsed counterparts and never touch HMC. Thinned post-burn
//! snapshots and a per-iteration trace are recorded.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::Graph;
use crate::latent::{ChainState, ConfigError, FeatureMatrix, Hyper, LinkDensity, Tying};
use crate::samplers::{
    gibbs_sweep, hmc_update, irm_split_merge, irm_sweep, split_merge_step, Partition,
};
use crate::snapshot::{Snapshot, SnapshotError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Imhw,
    Imdb,
    Imrm,
    Ihw,
    Idb,
    Irm,
}

impl Model {
    pub const ALL: [Model; 6] = [
        Model::Imhw,
        Model::Imdb,
        Model::Imrm,
        Model::Ihw,
        Model::Idb,
        Model::Irm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Model::Imhw => "IMHW",
            Model::Imdb => "IMDB",
            Model::Imrm => "IMRM",
            Model::Ihw => "IHW",
            Model::Idb => "IDB",
            Model::Irm => "IRM",
        }
    }

    pub fn tying(self) -> Tying {
        match self {
            Model::Imhw | Model::Ihw => Tying::Shared,
            Model::Imdb | Model::Idb => Tying::PerClass,
            Model::Imrm | Model::Irm => Tying::Full,
        }
    }

    /// Multiple-membership (feature) models, as opposed to the
    /// collapsed single-membership ones.
    pub fn multiple(self) -> bool {
        matches!(self, Model::Imhw | Model::Imdb | Model::Imrm)
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Model, String> {
        Model::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown model '{s}' (expected one of IMHW, IMDB, IMRM, IHW, IDB, IRM)"))
    }
}

#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub iter: usize,
    pub k: usize,
    pub logjoint: f64,
    pub hmc_acc: f64,
    pub sm_acc: f64,
    pub ms: f64,
    pub snapshot: Option<usize>,
}

impl TraceRecord {
    pub const CSV_HEADER: &'static str = "iter,K,logjoint,hmc_acc,sm_acc,ms";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.iter, self.k, self.logjoint, self.hmc_acc, self.sm_acc, self.ms
        )
    }
}

#[derive(Debug)]
pub struct FitResult {
    pub model: Model,
    pub trace: Vec<TraceRecord>,
    pub snapshots: Vec<Snapshot>,
}

enum Engine {
    Feature { s: ChainState, eps: f64 },
    Blocks(Partition),
}

#[derive(Debug)]
pub enum ChainError {
    Config(ConfigError),
    Snapshot(SnapshotError),
}

impl fmt::Display for ChainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainError::Config(e) => write!(f, "{e}"),
            ChainError::Snapshot(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ChainError {}

impl From<ConfigError> for ChainError {
    fn from(e: ConfigError) -> ChainError {
        ChainError::Config(e)
    }
}

impl From<SnapshotError> for ChainError {
    fn from(e: SnapshotError) -> ChainError {
        ChainError::Snapshot(e)
    }
}

/// Run a chain from a random initialization: every vertex starts with
/// one uniformly drawn feature/class among `k_init` and empty columns
/// are pruned, which keeps starts comparable across all six models.
pub fn run_chain(g: &Graph, model: Model, h: &Hyper, seed: u64) -> Result<FitResult, ChainError> {
    h.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let engine = init_random_engine(g, model, h, &mut rng);
    Ok(drive(g, model, h, engine, rng, 0))
}

/// Run a chain starting at the given single-membership labels.
pub fn run_chain_with_init(
    g: &Graph,
    model: Model,
    h: &Hyper,
    seed: u64,
    labels: &[usize],
) -> Result<FitResult, ChainError> {
    h.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let engine = if model.multiple() {
        let k = labels.iter().copied().max().map_or(0, |m| m + 1);
        let rows: Vec<Vec<u32>> = labels.iter().map(|&c| vec![c as u32]).collect();
        let z = FeatureMatrix::from_rows(g.n(), k, &rows);
        let rho = LinkDensity::sample_prior(model.tying(), k, h, &mut rng);
        Engine::Feature {
            s: ChainState::from_parts(g, z, rho),
            eps: h.hmc.step_size,
        }
    } else {
        Engine::Blocks(Partition::from_assignments(g, labels))
    };
    Ok(drive(g, model, h, engine, rng, 0))
}

/// Continue a chain from a snapshot up to `h.iterations`, keeping the
/// iteration numbering.
pub fn resume_chain(g: &Graph, h: &Hyper, snap: &Snapshot) -> Result<FitResult, ChainError> {
    h.validate()?;
    let model = Model::from_str(&snap.model)
        .map_err(|e| SnapshotError::Shape(format!("bad model tag: {e}")))?;
    let rng = snap.rng.restore()?;
    let engine = if model.multiple() {
        let eps = if snap.eps > 0.0 {
            snap.eps
        } else {
            h.hmc.step_size
        };
        Engine::Feature {
            s: snap.to_feature_state(g, model.tying())?,
            eps,
        }
    } else {
        Engine::Blocks(Partition::from_assignments(g, &snap.to_labels()?))
    };
    Ok(drive(g, model, h, engine, rng, snap.iter))
}

fn init_random_engine<R: Rng>(g: &Graph, model: Model, h: &Hyper, rng: &mut R) -> Engine {
    if model.multiple() {
        Engine::Feature {
            s: ChainState::init_random(g, model.tying(), h, rng),
            eps: h.hmc.step_size,
        }
    } else {
        let mut labels: Vec<usize> = (0..g.n()).map(|_| rng.random_range(0..h.k_init)).collect();
        // compact to contiguous group ids
        let mut map = vec![usize::MAX; h.k_init];
        let mut next = 0;
        for c in labels.iter_mut() {
            if map[*c] == usize::MAX {
                map[*c] = next;
                next += 1;
            }
            *c = map[*c];
        }
        Engine::Blocks(Partition::from_assignments(g, &labels))
    }
}

fn rate(hits: usize, tries: usize) -> f64 {
    if tries == 0 {
        0.0
    } else {
        hits as f64 / tries as f64
    }
}

fn drive(
    g: &Graph,
    model: Model,
    h: &Hyper,
    mut engine: Engine,
    mut rng: ChaCha8Rng,
    start_iter: usize,
) -> FitResult {
    let burn = h.burn_iters();
    let tying = model.tying();
    let mut trace = Vec::new();
    let mut snapshots: Vec<Snapshot> = Vec::new();
    let (mut hmc_hits, mut hmc_tries) = (0usize, 0usize);
    let (mut sm_hits, mut sm_tries) = (0usize, 0usize);
    for it in start_iter..h.iterations {
        let t0 = Instant::now();
        match &mut engine {
            Engine::Feature { s, eps } => {
                for _ in 0..h.sm_per_iter {
                    sm_tries += 1;
                    sm_hits += usize::from(split_merge_step(s, g, h, &mut rng));
                }
                gibbs_sweep(s, g, h, &mut rng);
                hmc_tries += 1;
                let (accepted, ap) = hmc_update(s, g, h, *eps, &mut rng);
                hmc_hits += usize::from(accepted);
                if it < burn {
                    *eps = (*eps * (0.05 * (ap - h.hmc.adapt_target)).exp()).clamp(1e-6, 10.0);
                }
                s.canonicalize_link_sum();
            }
            Engine::Blocks(p) => {
                for _ in 0..h.sm_per_iter {
                    sm_tries += 1;
                    sm_hits += usize::from(irm_split_merge(p, g, tying, h, &mut rng));
                }
                irm_sweep(p, g, tying, h, &mut rng);
            }
        }
        let (k, logjoint) = match &engine {
            Engine::Feature { s, .. } => (s.k(), s.log_joint(h)),
            Engine::Blocks(p) => (p.k(), p.log_joint(tying, h)),
        };
        let ms = t0.elapsed().as_secs_f64() * 1e3;
        let snapshot = if it >= burn && (it - burn) % h.thin == 0 {
            let snap = match &engine {
                Engine::Feature { s, eps } => {
                    Snapshot::from_feature_state(model.name(), it + 1, s, *eps, &rng)
                }
                Engine::Blocks(p) => {
                    Snapshot::from_partition(model.name(), it + 1, p, tying, h, &rng)
                }
            };
            snapshots.push(snap);
            Some(snapshots.len() - 1)
        } else {
            None
        };
        trace.push(TraceRecord {
            iter: it + 1,
            k,
            logjoint,
            hmc_acc: rate(hmc_hits, hmc_tries),
            sm_acc: rate(sm_hits, sm_tries),
            ms,
            snapshot,
        });
    }
    FitResult {
        model,
        trace,
        snapshots,
    }
}
