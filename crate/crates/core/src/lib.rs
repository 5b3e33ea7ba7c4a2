//! Curriculum learning for source-code vulnerability classifiers.
//!
//! The pipeline scores every training function by difficulty (from code
//! complexity or from held-out submodel confidence), trains easy-to-hard in
//! cumulative buckets, and fine-tunes on semantics-preserving rewrites of
//! the samples each stage gets wrong.

pub mod augment;
pub mod corpus;
pub mod cparse;
pub mod curriculum;
pub mod difficulty;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod minieval;
pub mod model;
pub mod synthetic;

pub use error::{Error, ErrorClass, Result};
