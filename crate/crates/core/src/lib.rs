//! Fine-grained, attribute-aided evaluation of word segmentation systems.
//!
//! Test words are described by seven attributes (word length, sentence
//! length, OOV density, word/character frequency and word/character label
//! consistency), partitioned into buckets, and scored bucket by bucket.
//! On top of the bucketed scores the crate computes model-wise and
//! dataset-wise measures, self- and aided-diagnosis, cross-dataset
//! discrepancy measures and a greedy source-ordering procedure for
//! multi-source transfer.

pub mod attributes;
pub mod baseline;
pub mod bucketing;
pub mod cli;
pub mod corpus;
pub mod crossdata;
pub mod diagnosis;
mod error;
pub mod measures;
pub mod selection;
pub mod stats;

pub use error::{Error, Result};
