//! Key-value config files and their merge into the run settings.
//! Precedence is CLI flag > config file > built-in defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use imrm::latent::Hyper;

/// Failure classes mapped onto process exit codes.
#[derive(Debug)]
pub enum Fail {
    Usage(String),
    Io(String),
    Numeric(String),
}

impl Fail {
    pub fn code(&self) -> i32 {
        match self {
            Fail::Usage(_) => 2,
            Fail::Io(_) => 3,
            Fail::Numeric(_) => 4,
        }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Fail {
        Fail::Io(format!("{}: {}", path.display(), e))
    }
}

impl fmt::Display for Fail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fail::Usage(m) => write!(f, "usage: {}", m),
            Fail::Io(m) => write!(f, "i/o: {}", m),
            Fail::Numeric(m) => write!(f, "numerical: {}", m),
        }
    }
}

impl std::error::Error for Fail {}

const KNOWN_KEYS: [&str; 17] = [
    "alpha",
    "a_within",
    "b_within",
    "a_between",
    "b_between",
    "k_init",
    "iterations",
    "t_scans",
    "sm_per_iter",
    "burn_frac",
    "thin",
    "max_k",
    "leapfrog_steps",
    "step_size",
    "adapt_target",
    "seed",
    "holdout",
];

/// One `key = value` per line; `#` starts a comment; unknown keys are
/// rejected so typos cannot silently fall back to defaults.
#[derive(Debug, Default)]
pub struct FileConfig {
    map: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, Fail> {
        let text = std::fs::read_to_string(path).map_err(|e| Fail::io(path, e))?;
        FileConfig::parse(&text).map_err(|m| Fail::Usage(format!("{}: {}", path.display(), m)))
    }

    pub fn parse(text: &str) -> Result<FileConfig, String> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", idx + 1))?;
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(format!("line {}: unknown key '{}'", idx + 1, key));
            }
            if map.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(format!("line {}: duplicate key '{}'", idx + 1, key));
            }
        }
        Ok(FileConfig { map })
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, Fail>
    where
        T::Err: fmt::Display,
    {
        debug_assert!(KNOWN_KEYS.contains(&key));
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| Fail::Usage(format!("config key {}: {}", key, e))),
        }
    }
}

/// Hyper overrides as they arrive from the command line.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct HyperArgs {
    /// IBP / CRP concentration (default: ln N)
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Beta pseudo-count a for within-class densities
    #[arg(long)]
    pub a_within: Option<f64>,
    /// Beta pseudo-count b for within-class densities
    #[arg(long)]
    pub b_within: Option<f64>,
    /// Beta pseudo-count a for between-class densities
    #[arg(long)]
    pub a_between: Option<f64>,
    /// Beta pseudo-count b for between-class densities
    #[arg(long)]
    pub b_between: Option<f64>,
    /// Initial number of classes / features
    #[arg(long)]
    pub k_init: Option<usize>,
    /// Total sampling iterations
    #[arg(long = "iters")]
    pub iterations: Option<usize>,
    /// Restricted Gibbs scans inside split-merge
    #[arg(long)]
    pub t_scans: Option<usize>,
    /// Split-merge attempts per iteration
    #[arg(long)]
    pub sm_per_iter: Option<usize>,
    /// Fraction of iterations discarded as burn-in
    #[arg(long)]
    pub burn_frac: Option<f64>,
    /// Keep every `thin`-th post-burn-in sample
    #[arg(long)]
    pub thin: Option<usize>,
    /// Hard cap on the class / feature count
    #[arg(long)]
    pub max_k: Option<usize>,
    /// Leapfrog steps per HMC trajectory
    #[arg(long)]
    pub leapfrog_steps: Option<usize>,
    /// Initial HMC step size (adapted during burn-in)
    #[arg(long)]
    pub step_size: Option<f64>,
    /// HMC acceptance rate targeted by step-size adaptation
    #[arg(long)]
    pub adapt_target: Option<f64>,
}

/// Defaults, overridden by the config file, overridden by flags.
pub fn resolve_hyper(n: usize, file: &FileConfig, cli: &HyperArgs) -> Result<Hyper, Fail> {
    let mut h = Hyper::defaults(n);
    macro_rules! layer {
        ($field:ident, $key:literal) => {
            if let Some(v) = file.get($key)? {
                h.$field = v;
            }
            if let Some(v) = cli.$field {
                h.$field = v;
            }
        };
    }
    layer!(alpha, "alpha");
    layer!(a_within, "a_within");
    layer!(b_within, "b_within");
    layer!(a_between, "a_between");
    layer!(b_between, "b_between");
    layer!(k_init, "k_init");
    layer!(iterations, "iterations");
    layer!(t_scans, "t_scans");
    layer!(sm_per_iter, "sm_per_iter");
    layer!(burn_frac, "burn_frac");
    layer!(thin, "thin");
    if let Some(v) = file.get("max_k")? {
        h.max_k = Some(v);
    }
    if let Some(v) = cli.max_k {
        h.max_k = Some(v);
    }
    if let Some(v) = file.get("leapfrog_steps")? {
        h.hmc.leapfrog_steps = v;
    }
    if let Some(v) = cli.leapfrog_steps {
        h.hmc.leapfrog_steps = v;
    }
    if let Some(v) = file.get("step_size")? {
        h.hmc.step_size = v;
    }
    if let Some(v) = cli.step_size {
        h.hmc.step_size = v;
    }
    if let Some(v) = file.get("adapt_target")? {
        h.hmc.adapt_target = v;
    }
    if let Some(v) = cli.adapt_target {
        h.hmc.adapt_target = v;
    }
    h.validate().map_err(|e| Fail::Usage(e.to_string()))?;
    Ok(h)
}
