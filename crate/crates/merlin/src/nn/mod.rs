//! From-scratch neural stack: a small MLP with manual backprop, Adam,
//! sinusoidal horizon embeddings, diagonal-Gaussian NLL, checkpointing, and
//! finite-difference gradient verification.

pub mod adam;
pub mod checkpoint;
pub mod embed;
pub mod gauss;
pub mod gradcheck;
pub mod mat;
pub mod mlp;

pub use adam::{AdamError, AdamState};
pub use embed::{sinusoidal_embed, EmbedTable};
pub use gauss::{gaussian_nll, gaussian_nll_grad};
pub use gradcheck::{grad_check, FD_STEP};
pub use mat::Mat;
pub use mlp::{ForwardCache, Mlp, Scratch};
