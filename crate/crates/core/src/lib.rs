//! Pool-based active-learning engine.
//!
//! Everything needed to run simulated-oracle active-learning experiments
//! in memory: a trainable MLP classifier ([`learner`]), nineteen
//! acquisition strategies ([`acquisition`]), the clustering/projection
//! primitives behind the representative ones ([`geometry`]), adversarial
//! distance scoring ([`adversarial`]), evaluation metrics and statistics
//! ([`metrics`]), synthetic and IDX/CSV-sourced datasets ([`data`]), and
//! the acquire→label→retrain loop itself ([`experiment`]).
//!
//! The crate is `no_std + alloc`; file IO, configuration files, and the
//! CLI live in the companion `albench` crate.

#![cfg_attr(not(test), no_std)]
#![deny(unsafe_code)]
// Index loops over parallel arrays/matrices are the house style for the
// numeric kernels, and `!(x >= y)` guards are deliberate NaN catches.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod acquisition;
pub mod adversarial;
pub mod data;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod learner;
pub mod math;
pub mod matrix;
pub mod metrics;
pub mod pool;
pub mod rng;

pub use error::{AlError, Result};
pub use matrix::Matrix;
