//! Sparse observation systems on random bipartite factor graphs.
//!
//! Hidden symbols `X_i` drawn iid from a finite prior sit on variable nodes;
//! each function node `a` emits an observation `Y_a` through a permutation
//! symmetric kernel of its neighbours, each variable emits a side observation
//! `Z_i`, and a reveal channel discloses `X_i` verbatim with probability
//! `theta`. The crate provides
//!
//! - [`graph`]: the `G(n, alpha n, gamma/n)` ensemble, Galton-Watson trees,
//!   neighbourhoods and graph surgery,
//! - [`model`]: priors, kernels, built-in observation models and world sampling,
//! - [`oracle`]: brute-force posteriors and the information quantities built on them,
//! - [`bp`]: belief propagation, the local update map and boundary-factorized marginals,
//! - [`de`]: population dynamics for density evolution,
//! - [`exp`]: experiment drivers, configuration and CSV/manifest output.

pub mod bp;
pub mod de;
pub mod error;
pub mod exp;
pub mod graph;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use graph::{EnsembleParams, FactorGraph, Neighborhood};
