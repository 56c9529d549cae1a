//! Offline goal-conditioned reinforcement learning built around reverse
//! trajectory play: stored trajectories are treated as walks away from goal
//! states, and a horizon-conditioned Gaussian policy is trained by behavior
//! cloning to retrace them toward arbitrary goals.
//!
//! The toolkit covers the full experiment pipeline on 2D point-navigation
//! tasks:
//!
//! - [`env`] — the PointReach / PointRooms environments (bounded arena,
//!   sparse binary reward, optional walls),
//! - [`dataset`] — offline trajectory generation (random and scripted
//!   expert behavior) and a binary on-disk format,
//! - [`neighbors`] — an exact ball-tree nearest-neighbor index,
//! - [`stitcher`] — nearest-neighbor trajectory stitching, which synthesizes
//!   new trajectories by switching between stored ones at near-coincident
//!   states,
//! - [`relabel`] — hindsight goal relabeling into `(s, a, g, h)` tuples,
//! - [`nn`] — a small from-scratch neural stack (MLP, manual backprop,
//!   Adam, sinusoidal horizon embeddings, finite-difference checks),
//! - [`policy`] — the horizon-conditioned diagonal-Gaussian policy with its
//!   behavior-cloning objective, plus a GCSL baseline mode,
//! - [`reverse_model`] — a reverse dynamics model and CVAE reverse policy
//!   for model-based backward rollouts,
//! - [`eval`] — discounted-return / success-rate evaluation, goal and
//!   horizon sweeps, and vector-field export,
//! - [`config`] — run configuration files shared by the `merlin` CLI.
//!
//! Everything is deterministic given a single top-level seed: all randomness
//! flows through [`rng::derive_seed`] with named purposes, so runs reproduce
//! bit-identically regardless of worker-thread count.

pub mod config;
pub mod dataset;
pub mod env;
pub mod eval;
pub mod neighbors;
pub mod nn;
pub mod policy;
pub mod relabel;
pub mod reverse_model;
pub mod rng;
pub mod stitcher;
pub mod verify;
