use serde::{Deserialize, Serialize};

use super::{EvalError, Label};

pub const DEFAULT_BETA: f64 = 0.5;

/// Token-level detection counts and the scores derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
    pub beta: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl EvalResult {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, beta: f64) -> Self {
        let precision = ratio(tp as f64, (tp + fp) as f64);
        let recall = ratio(tp as f64, (tp + fn_) as f64);
        let b2 = beta * beta;
        let f_beta = ratio((1.0 + b2) * precision * recall, b2 * precision + recall);
        EvalResult {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision,
            recall,
            f_beta,
            beta,
        }
    }

    pub fn flagged(&self) -> usize {
        self.true_positives + self.false_positives
    }
}

/// Corpus-level (micro-averaged) F-beta of token flags against gold labels;
/// an incorrect token is the positive class.
pub fn f_beta(flags: &[bool], gold: &[Label], beta: f64) -> Result<EvalResult, EvalError> {
    if flags.len() != gold.len() {
        return Err(EvalError::LengthMismatch {
            scores: flags.len(),
            gold: gold.len(),
        });
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&flag, &label) in flags.iter().zip(gold) {
        match (flag, label.is_incorrect()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(EvalResult::from_counts(tp, fp, fn_, beta))
}
