//! Meta-evaluation of human and automatic machine translation evaluators.
//!
//! The pipeline: ingest score tables, split overlapping rater pools into
//! independent groups ([`partition`]), turn rater annotations into evaluator
//! scores ([`protocols`]), then compare every evaluator against a gold
//! evaluator with soft pairwise accuracy and tie-calibrated pairwise accuracy
//! ([`metaeval`]) and group them into significance clusters
//! ([`significance`]). [`synth`] generates controlled datasets.

pub mod cli;
pub mod error;
pub mod ingest;
pub mod metaeval;
pub mod model;
pub mod partition;
pub mod protocols;
pub mod report;
pub mod rng;
pub mod significance;
pub mod synth;

pub use error::{Error, Result};
