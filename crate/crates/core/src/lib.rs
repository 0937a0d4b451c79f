//! Domain-class triplet metric learning on synthetic multi-domain data.
//!
//! The crate trains a small MLP encoder with cross-entropy plus a triplet
//! loss whose pairs are mined across domains: positives share the anchor's
//! class but come from another domain, negatives share the anchor's domain
//! but carry another class. Embeddings can be regularized with scale-only
//! batch normalization and unit-sphere feature normalization.
//!
//! Module map:
//! - [`diffcore`]: matrices, MLP forward/backward, cross-entropy, SGD.
//! - [`embedding_space`]: no-bias batch norm and feature normalization.
//! - [`mining`]: candidate masks, batch-hard and batch-all triplets.
//! - [`losses`]: triplet hinge, domain-class triplet loss, total objective.
//! - [`domain_model`]: class/domain mixture generator and Wasserstein diagnostics.
//! - [`metrics`]: silhouettes, k-NN purity, accuracy.
//! - [`harness`]: sampler, training loop, leave-one-domain-out, ablations, sweeps.

pub mod dataset;
pub mod diffcore;
pub mod domain_model;
pub mod embedding_space;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod losses;
pub mod metrics;
pub mod mining;

pub use dataset::{Dataset, LabeledSample};
pub use error::{DctError, Result};
