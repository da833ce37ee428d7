//! Music- and text-conditioned motion generation on a shared discrete motion
//! vocabulary, with a self-contained evaluation suite.
//!
//! The pipeline has three stages:
//!
//! 1. [`vqvae`] — a convolutional VQ-VAE tokenizes motion windows from two
//!    corpora (audio-paired "dance" and text-paired "action") into indices of
//!    one shared codebook.
//! 2. [`xmodal`] — a dual-branch transformer translates audio features or
//!    text into motion tokens with a causal motion decoder whose parameters
//!    are shared by both branches.
//! 3. [`fusion`] — autoregressive generation blends the two branches with a
//!    cosine-ramp weight curve over a caller-chosen effect range, samples
//!    tokens top-k, and detokenizes back to motion.
//!
//! Everything learnable is built on [`tensor`], a small dense f64 tensor core
//! with reverse-mode automatic differentiation and Adam. [`metrics`] provides
//! the evaluation suite (Fréchet distances on kinetic/geometric features,
//! diversity, beat alignment, freeze scores, motion prediction distance), and
//! [`analysis`] reports how the two corpora share the codebook.
//!
//! The `book/` directory at the repository root is an mdbook guide; its code
//! snippets are compiled and run as doc-tests through the [`guide`] module.

pub mod analysis;
pub mod error;
pub mod fusion;
pub mod guide;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod motion;
pub mod rng;
pub mod tensor;
pub mod vqvae;
pub mod xmodal;

pub use error::{Error, Result};
pub use rng::Pcg32;
pub use tensor::{Graph, Tensor, Var};
