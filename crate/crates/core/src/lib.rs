//! Token-level anomaly detection from language-model distributions.
//!
//! - [`measure`]: oddballness, its probability-of-probability complement,
//!   truncation bounds and ranks.
//! - [`dump`]: the line-delimited distribution dump format and alignment of
//!   model tokens to dataset tokens.
//! - [`scoring`]: per-token scores for each detection method, model
//!   combination and thresholding.
//! - [`eval`]: labeled corpora, F-beta and threshold tuning.
//! - [`cli`]: the `oddball` command-line front end.

pub mod cli;
pub mod dump;
pub mod eval;
pub mod measure;
pub mod scoring;
