//! MCMC kernels: per-entry Gibbs flips with the singleton-feature
//! Metropolis move, Hamiltonian updates for the link densities,
//! split-merge over feature columns, the collapsed single-membership
//! sampler, and the chain driver tying them together.

mod chain;
mod gibbs;
mod hmc;
mod irm;
mod split_merge;

pub use chain::{
    resume_chain, run_chain, run_chain_with_init, ChainError, FitResult, Model, TraceRecord,
};
pub use gibbs::{
    conditional_log_odds, feature_mh_vertex, gibbs_sweep, gibbs_vertex_flips, prune_empty_columns,
};
pub use hmc::{hmc_update, HmcContext};
pub use irm::{irm_split_merge, irm_sweep, BlockTotals, Partition};
pub use split_merge::split_merge_step;
