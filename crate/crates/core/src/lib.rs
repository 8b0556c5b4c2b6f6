//! Co-evolution of a directed follow graph and node opinions under
//! people-recommender algorithms.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`] holds the evolving world state ([`OpinionGraph`]).
//! * [`netgen`] generates LFR-style benchmark graphs with tunable
//!   modularity and homophily.
//! * [`odm`] implements the bounded-confidence and Bayesian epistemic
//!   update rules.
//! * [`recommenders`] implements the link recommenders (Jaccard, PPR,
//!   SALSA, opinion-biased) and the quantile normaliser.
//! * [`engine`] runs the interleaved recommendation / rewiring / opinion
//!   update loop.
//! * [`metrics`] computes the neighbour correlation index and the random
//!   walk controversy score.
//! * [`stats`] has the ECDF, the two-sample KS test and seed streams.
//! * [`harness`] runs paired null-vs-recommender replicas over an
//!   `(eta, mu)` grid and exports the results.

pub mod engine;
pub mod error;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod netgen;
pub mod odm;
pub mod recommenders;
pub mod stats;

pub use error::{Error, Result};
pub use graph::{DegreeSummary, NodeId, OpinionGraph};

/// Random generator used everywhere in the crate.
pub type SimRng = rand_pcg::Pcg64;
