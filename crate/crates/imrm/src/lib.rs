//! Nonparametric latent feature and latent class models for link
//! prediction in undirected networks, fit by MCMC.
//!
//! The observation model is a noisy-or over feature pairs: vertices carry
//! binary feature sets, every shared or interacting pair of features gives
//! an independent chance to generate a link, and the link probability is
//! one minus the product of the miss probabilities. Latent class models
//! are the one-feature-per-vertex special case.

pub mod eval;
pub mod graph;
pub mod latent;
pub mod math;
pub mod samplers;
pub mod snapshot;
pub mod synth;
