//! Model hyperparameters and sampler settings.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::latent::ParamRole;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HmcSettings {
    pub leapfrog_steps: usize,
    /// Initial step size; adapted during burn-in, frozen afterwards.
    pub step_size: f64,
    pub adapt_target: f64,
}

/// Priors and run settings. `defaults(n)` reproduces the standard
/// configuration: alpha = log N, within pseudo-counts (5, 1), between
/// (1, 5), K_init = 50, 2500 iterations, t = 2 restricted scans.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hyper {
    pub alpha: f64,
    pub a_within: f64,
    pub b_within: f64,
    pub a_between: f64,
    pub b_between: f64,
    pub k_init: usize,
    pub iterations: usize,
    /// Extra restricted Gibbs scans in split-merge.
    pub t_scans: usize,
    /// Split-merge attempts per iteration.
    pub sm_per_iter: usize,
    /// Fraction of iterations treated as burn-in.
    pub burn_frac: f64,
    /// Snapshot every `thin` post-burn-in iterations.
    pub thin: usize,
    /// Hard cap on the feature count; proposals beyond it are rejected.
    pub max_k: Option<usize>,
    pub hmc: HmcSettings,
}

impl Hyper {
    pub fn defaults(n: usize) -> Hyper {
        Hyper {
            alpha: (n.max(2) as f64).ln(),
            a_within: 5.0,
            b_within: 1.0,
            a_between: 1.0,
            b_between: 5.0,
            k_init: 50,
            iterations: 2500,
            t_scans: 2,
            sm_per_iter: 1,
            burn_frac: 0.5,
            thin: 10,
            max_k: None,
            hmc: HmcSettings {
                leapfrog_steps: 10,
                step_size: 0.1,
                adapt_target: 0.75,
            },
        }
    }

    pub fn pseudo_counts(&self, role: ParamRole) -> (f64, f64) {
        match role {
            ParamRole::Within => (self.a_within, self.b_within),
            ParamRole::Between => (self.a_between, self.b_between),
        }
    }

    pub fn burn_iters(&self) -> usize {
        (self.iterations as f64 * self.burn_frac).floor() as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let pos = [
            ("alpha", self.alpha),
            ("a_within", self.a_within),
            ("b_within", self.b_within),
            ("a_between", self.a_between),
            ("b_between", self.b_between),
            ("hmc.step_size", self.hmc.step_size),
        ];
        for (name, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ConfigError::Invalid(format!("{} must be > 0, got {}", name, v)));
            }
        }
        if self.k_init == 0 {
            return Err(ConfigError::Invalid("k_init must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.burn_frac) {
            return Err(ConfigError::Invalid(format!(
                "burn_frac must be in [0,1), got {}",
                self.burn_frac
            )));
        }
        if self.thin == 0 {
            return Err(ConfigError::Invalid("thin must be >= 1".into()));
        }
        if self.hmc.leapfrog_steps == 0 {
            return Err(ConfigError::Invalid("leapfrog_steps must be >= 1".into()));
        }
        if !(0.0 < self.hmc.adapt_target && self.hmc.adapt_target < 1.0) {
            return Err(ConfigError::Invalid("adapt_target must be in (0,1)".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_settings() {
        let h = Hyper::defaults(100);
        assert!((h.alpha - 100f64.ln()).abs() < 1e-15);
        assert_eq!(
            (h.a_within, h.b_within, h.a_between, h.b_between),
            (5.0, 1.0, 1.0, 5.0)
        );
        assert_eq!(h.k_init, 50);
        assert_eq!(h.iterations, 2500);
        assert_eq!(h.t_scans, 2);
        assert!(h.validate().is_ok());
    }

    #[test]
    fn validate_rejects_bad_values() {
        let mut h = Hyper::defaults(10);
        h.alpha = 0.0;
        assert!(h.validate().is_err());
        let mut h = Hyper::defaults(10);
        h.burn_frac = 1.0;
        assert!(h.validate().is_err());
    }
}
