//! Sign language production toolkit.
//!
//! The pipeline: spoken-language tokens are translated to gloss sequences
//! (`translate`), gloss sequences are expanded into interpolated dictionary
//! pose sequences (`pose`), and a frame selection model (`fsnet`) learns to
//! co-articulate them into continuous signing, supervised by dynamic time
//! warping (`align`). Results can be rasterized to stick figures and limb
//! heatmaps (`render`) or scored with adversarial/perceptual loss combinators
//! (`ganloss`). `corpus` generates synthetic data with recoverable ground
//! truth and ingests translation-protocol files; `neural` is the small
//! differentiable substrate underneath.
//!
//! Batch-shaped work (alignment precompute, corpus generation, frame
//! rendering) runs data-parallel through [`parallel::par_map`] when the
//! `parallel` feature (default) is enabled, with an order-identical
//! sequential fallback otherwise.

pub mod align;
pub mod corpus;
pub mod fsnet;
pub mod ganloss;
pub mod neural;
pub mod parallel;
pub mod pose;
pub mod render;
pub mod translate;
