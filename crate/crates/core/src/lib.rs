//! Allocation-only core of the InfoVAE laboratory.
//!
//! Everything here is pure computation over `alloc` containers: a small
//! reverse-mode autodiff engine, the distributions and divergence
//! estimators used by the objectives, MLP/masked-MLP models, samplers,
//! diagnostics, and exact finite-space oracles. File formats, the CLI and
//! experiment orchestration live in the `infovae-lab` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod data;
pub mod diagnostics;
pub mod distributions;
pub mod divergences;
pub mod error;
pub mod models;
pub mod nn;
pub mod numeric;
pub mod objectives;
pub mod sampling;
pub mod tabular;
pub mod train;

pub use autodiff::{backward, grad_check, Gradients, Tape, Tensor};
pub use error::{Error, Result};
pub use numeric::ExtReal;
