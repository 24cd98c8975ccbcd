//! Labeled corpora, token-level F-beta and threshold tuning on a development
//! split.

mod metrics;
mod report;
mod sweep;
mod tsv;

pub use metrics::{f_beta, EvalResult, DEFAULT_BETA};
pub use report::{ordinal_check, render_table, OrdinalCheck, ReportRow, Summary};
pub use sweep::{
    default_grid, evaluate_run, refine_probability_grid, tune_default, tune_threshold, SweepPoint,
    SweepResult,
};
pub use tsv::{
    parse_multiged_tsv, write_multiged_tsv, write_predictions, Label, LabeledSentence, LabeledToken, TsvError,
};

use thiserror::Error;

use crate::scoring::ScoringError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{scores} scored tokens but {gold} gold labels")]
    LengthMismatch { scores: usize, gold: usize },
    #[error("threshold grid is empty")]
    EmptyGrid,
    #[error("threshold grid is not ascending at index {index}")]
    UnsortedGrid { index: usize },
    #[error(transparent)]
    Threshold(#[from] ScoringError),
}
