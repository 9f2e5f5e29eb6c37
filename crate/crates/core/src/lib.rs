//! Node importance estimation on heterogeneous information networks.
//!
//! The pipeline runs in three stages:
//!
//! 1. Structural knowledge: metapath-induced sub-networks are built from the
//!    typed graph, and per-node centrality scalars plus similarity-walk
//!    embeddings are precomputed into a [`knowledge::KnowledgeBank`].
//! 2. Representation: centrality scalars are vectorized by trainable
//!    perceptrons, fused with attention inside and across metapaths, and
//!    refined by a typed multi-head attention encoder over the graph.
//! 3. Scoring: each node's hidden vector is treated as an empirical
//!    distribution, aligned against a frozen random reference by sorting,
//!    and the resulting 1-Wasserstein embedding is scored linearly.
//!
//! Everything differentiable runs on the small reverse-mode engine in
//! [`autodiff`].

pub mod autodiff;
pub mod container;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod knowledge;
pub mod metapath;
pub mod metrics;
pub mod pool;
pub mod model;
pub mod rng;
pub mod sparse;
pub mod training;

pub use error::{Error, Result};
pub use graph::{EdgeTypeId, HeterogeneousGraph, NodeId, NodeTypeId};
