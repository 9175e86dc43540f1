//! Parallel stochastic gradient descent with guided delay compensation.
//!
//! The crate trains multinomial logistic regression with a single-authority
//! parameter server. Gradients arrive from `c` workers either synchronously
//! (one barrier round per `c` gradients) or asynchronously (applied on
//! arrival, however stale), and the guided variant keeps a rolling ledger of
//! per-batch consistency evidence: every `rho` applied updates it replays the
//! few mini-batches whose application improved both their own loss and the
//! verification loss, steering the iterate back after delayed updates.
//!
//! Everything here is deterministic given a seed. The simulated scheduler
//! totally orders worker events on a virtual clock, so parallel trajectories
//! are reproducible bit-for-bit; a real thread-pool backend can drive the
//! same [`engine::ParameterServer`] from outside this crate.
//!
//! The crate is `no_std` (with `alloc`); all transcendentals go through
//! `libm`, so results do not depend on the platform's libm either.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod data;
pub mod engine;
pub mod error;
pub mod guided;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod rng;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::Matrix;
