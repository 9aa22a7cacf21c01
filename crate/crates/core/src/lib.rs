//! First-passage percolation on sparse Erdős–Rényi graphs with signed edge
//! weights: limit constants, renewal quantities, graph exploration, extremal
//! path enumeration, branching random walk and Cox-process sampling, Poisson
//! approximation bounds and an experiment harness tying them together.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod brw_cox;
pub mod chen_stein;
pub mod constants;
pub mod distributions;
pub mod error;
pub mod graph;
pub mod harness;
pub mod path_search;
pub mod renewal;
pub mod special;

pub use constants::ModelConstants;
pub use distributions::{Domain, Psi, WeightDistribution, WeightLaw};
pub use error::{FppError, Result};

/// Random number generator used throughout: seedable, portable and fast.
pub type SimRng = rand_chacha::ChaCha8Rng;
