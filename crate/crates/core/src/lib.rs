//! Dependency-length analysis of preverbal constituent orders.
//!
//! Pipeline: [`treebank`] parses dependency corpora, [`constituency`] splits
//! verb-final sentences into preverbal constituents, [`variants`] generates
//! alternative orders, [`features`] turns reference/variant pairs into
//! pairwise examples, [`stats`] fits and evaluates the models, and
//! [`analysis`] runs whole experiments.

pub mod analysis;
pub mod constituency;
pub mod error;
pub mod features;
pub mod rng;
pub mod stats;
pub mod treebank;
pub mod variants;

pub use error::{Error, Result};
