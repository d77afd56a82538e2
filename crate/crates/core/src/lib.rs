//! Representation-bias auditing for language models through balanced
//! pairwise comparisons.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`universe`] loads firms and a monthly feature panel and standardizes it
//!    cross-sectionally.
//! 2. [`protocol`] builds the round-robin schedule and renders prompts.
//! 3. [`inference`] scores each comparison through a [`inference::ModelBackend`]
//!    and appends records to a resumable JSONL store.
//! 4. [`aggregation`], [`stats`] and [`reporting`] turn records into firm-level
//!    confidences, dispersion measures and correlation/ANOVA reports.

pub mod aggregation;
pub mod error;
pub mod fixtures;
pub mod hashing;
pub mod inference;
pub mod protocol;
pub mod reporting;
pub mod stats;
pub mod universe;

pub use error::{BackendError, Error, Result};
