//! Building blocks for a sexist-comment detection pipeline over Spanish
//! social-media comments.
//!
//! The crate follows the three phases of the pipeline:
//!
//! 1. [`corpus`]: registry of content sources, comment ingestion, balanced
//!    sampling and descriptive statistics.
//! 2. [`annotation`]: four-category human labeling with majority-vote
//!    resolution, and export of the binary training set.
//! 3. [`classifier`], [`evaluation`] and [`alerting`]: training and serving a
//!    binary classifier, scoring it, and turning per-source predictions into a
//!    green / yellow / red alert.

pub mod alerting;
pub mod annotation;
pub mod classifier;
pub mod corpus;
pub mod evaluation;
pub mod jsonl;
mod label;

pub use label::Label;
