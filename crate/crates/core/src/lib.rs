//! Instance-level binary classification trained jointly from a few strongly
//! labeled instances and many instances that only carry the binary label of
//! the group they belong to.
//!
//! Group labels are treated as class-conditionally noisy instance labels.
//! The training objective rewards soft accuracy on the strong set plus a
//! weighted surrogate on the weak set that stays faithful under such noise:
//! accuracy for balanced problems, a G-measure surrogate corrected by the
//! estimated false-positive noise rate `β` for imbalanced ones.
//!
//! The crate is `no_std` (it needs `alloc`). IO, file formats, experiments
//! and the command line live in the companion `weasl` crate.
//!
//! Modules:
//! - [`data`]: datasets, group tables, splitting
//! - [`synth`]: Gaussian-mixture generators, purity groups, noise injection
//! - [`model`]: logistic and MLP scorers with hand-derived gradients
//! - [`objective`]: soft threshold, surrogate terms, smoothed max over `γ`
//! - [`noise`]: noise rates, assumption checks, `β` estimation
//! - [`train`]: joint training, baselines, `λ` cross-validation
//! - [`eval`]: metrics and error-overlap accounting
#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod data;
pub mod error;
pub mod eval;
pub mod math;
pub mod model;
pub mod noise;
pub mod objective;
pub mod rng;
pub mod synth;
pub mod train;

#[cfg(test)]
mod testing;

pub use error::{Error, Result};
