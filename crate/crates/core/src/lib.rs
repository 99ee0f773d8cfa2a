//! Online deep learning over doubly-streaming data.
//!
//! A stream starts out described by an old feature space `S1`, passes through a
//! short overlap where `S1` and a new space `S2` are both observed, and ends with
//! `S2` only. This crate holds the learning machinery, free of any IO:
//!
//! - [`nn`]: dense layers, activations, cross-entropy, reparameterized sampling,
//!   SGD and a finite-difference gradient check.
//! - [`vae`]: per-layer Gaussian encoders, decoders, KL terms and the
//!   cross-space reconstruction `S2 -> S1`.
//! - [`hbp`]: hedge weights over per-layer classifier heads.
//! - [`ensemble`]: exponential-experts blending of the old and new classifiers.
//! - [`learner`]: the phase-driven orchestrator plus ablation and baseline variants.
//! - [`stream`]: phase schedules, feature evolution and the instance stream.
//! - [`eval`]: windowed online accuracy, averaged cumulative regret, summaries.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod ensemble;
pub mod error;
pub mod eval;
pub mod hbp;
pub mod learner;
pub mod linalg;
pub mod nn;
pub mod rng;
pub mod selfcheck;
pub mod stream;
pub mod synth;
pub mod vae;

pub use error::{Error, Result};
pub use rng::RngState;
