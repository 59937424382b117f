//! Deterministic approximate counting and sampling for the anti-ferromagnetic
//! Potts model (and proper colorings at `beta = 0`) on sparse graphs.
//!
//! The estimator is a truncated correlation-decay recursion over *permissive
//! blocks*: a vertex marginal is written as a sum of block marginals, and each
//! block marginal is written in terms of vertex marginals on the block's
//! boundary inside smaller conditioned instances. Truncating the recursion at
//! a depth budget gives [`decay::marg`]; chaining conditional marginals gives
//! [`counting::estimate_partition`] and [`sampling::sample_config`].
//!
//! Brute-force oracles live in [`exact`]; the contraction and local-sparsity
//! diagnostics live in [`saw`], [`blocks`] and [`randstats`].

pub mod blocks;
pub mod counting;
pub mod decay;
pub mod error;
pub mod exact;
pub mod graph;
pub mod model;
pub mod randstats;
pub mod sampling;
pub mod saw;

pub use error::{Error, Result};
pub use graph::{Family, Graph};
pub use model::{Beta, Color, Configuration, Instance, PottsParams};
