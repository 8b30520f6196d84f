//! Latent state: binary feature assignments, class-link probabilities
//! with parameter tying, priors, and the incremental likelihood engine.

mod density;
mod features;
mod hyper;
mod state;

pub use density::{draw_prior_r, LinkDensity, ParamRole, Tying, R_CLAMP};
pub use features::FeatureMatrix;
pub use hyper::{ConfigError, HmcSettings, Hyper};
pub use state::{link_probability, log_ibp_prior, ChainState, SuffStats, ToggleDelta};
