//! Structure learning for homogeneous zero-field Ising tree models.
//!
//! A homogeneous Ising tree is a binary (±1) graphical model that is Markov on
//! a tree and whose every edge carries the same correlation `rho` in (0,1).
//! This crate provides:
//!
//! - exact ancestral sampling and exact pairwise correlations ([`tree_model`]);
//! - correlation-based maximum-spanning-tree structure estimation with
//!   heterogeneous per-pair sample counts ([`estimation`]);
//! - a two-phase active learning algorithm that spends a fixed scalar-sample
//!   budget adaptively, concentrating on low-confidence parts of the learned
//!   tree ([`active`]);
//! - closed-form and optimization-based error-exponent calculators together
//!   with a numeric verification sweep for the inequalities that justify the
//!   active algorithm's exponent boost ([`exponents`]);
//! - edge packing and hop-error diagnostics on trees ([`graph_metrics`]).
//!
//! The crate is `no_std` (it requires `alloc`); all transcendental math goes
//! through `libm`. IO, file formats, and the CLI live in the companion
//! `isingtree-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod active;
pub mod error;
pub mod estimation;
pub mod exponents;
pub mod graph_metrics;
pub mod rng;
pub mod tree_model;

pub use error::{Error, Result};
pub use rng::RngSeed;
pub use tree_model::{IsingTreeModel, SampleBlock, TreeTopology};
