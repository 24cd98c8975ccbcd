use std::fmt;

use super::RawSentence;
use crate::measure::TAU_NORM;

/// One problem found in a dump record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub sentence_id: String,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sentence `{}`: {}: {}",
            self.sentence_id, self.field, self.message
        )
    }
}

fn is_probability(x: f64) -> bool {
    x.is_finite() && (0.0..=1.0).contains(&x)
}

/// Every invariant violation in a record; empty means valid.
pub fn validate_record(raw: &RawSentence) -> Vec<Finding> {
    let mut out = Vec::new();
    let mut push = |field: String, message: String| {
        out.push(Finding {
            sentence_id: raw.id.clone(),
            field,
            message,
        })
    };

    if raw.meta.k == 0 {
        push("meta.k".into(), "truncation depth must be at least 1".into());
    }
    let text_len = raw.text.chars().count();
    let mut prev_end = 0;
    for (i, tok) in raw.tokens.iter().enumerate() {
        let span = tok.span;
        if span.start > span.end {
            push(format!("tokens[{i}].span"), format!("start after end in {span}"));
        } else if span.end > text_len {
            push(
                format!("tokens[{i}].span"),
                format!("{span} exceeds text length {text_len}"),
            );
        }
        if span.start < prev_end {
            push(
                format!("tokens[{i}].span"),
                format!("{span} overlaps or precedes the previous token ending at {prev_end}"),
            );
        }
        prev_end = prev_end.max(span.end);

        if !is_probability(tok.p) {
            push(
                format!("tokens[{i}].p"),
                format!("{} is not a probability", tok.p),
            );
        }

        if tok.top.is_empty() {
            push(format!("tokens[{i}].top"), "no stored candidates".into());
            continue;
        }
        if raw.meta.k > 0 && tok.top.len() > raw.meta.k {
            push(
                format!("tokens[{i}].top"),
                format!(
                    "{} candidates exceed truncation depth {}",
                    tok.top.len(),
                    raw.meta.k
                ),
            );
        }
        if let Some(j) = tok.top.iter().position(|&p| !is_probability(p)) {
            push(
                format!("tokens[{i}].top"),
                format!("entry {j} is not a probability: {}", tok.top[j]),
            );
            continue;
        }
        if let Some(j) = tok.top.windows(2).position(|w| w[1] > w[0]) {
            push(
                format!("tokens[{i}].top"),
                format!("not descending at entry {}", j + 1),
            );
        }
        if !is_probability(tok.res) {
            push(
                format!("tokens[{i}].res"),
                format!("{} is not a probability", tok.res),
            );
            continue;
        }
        if tok.top[tok.top.len() - 1] == 0.0 && tok.res > 0.0 {
            push(
                format!("tokens[{i}].res"),
                "residual mass with a zero smallest candidate".into(),
            );
        }
        let total = tok.top.iter().sum::<f64>() + tok.res;
        if (total - 1.0).abs() > TAU_NORM {
            push(
                format!("tokens[{i}].top+res"),
                format!("total mass {total} is not within {TAU_NORM} of 1"),
            );
        }
    }
    out
}

/// Suspicious but valid values. Currently: an actual-token probability above
/// every stored candidate, which scores zero oddballness by monotonicity.
pub fn warnings(raw: &RawSentence) -> Vec<Finding> {
    raw.tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.top.first().is_some_and(|&m| t.p > m))
        .map(|(i, t)| Finding {
            sentence_id: raw.id.clone(),
            field: format!("tokens[{i}].p"),
            message: format!("{} exceeds the most likely candidate {}", t.p, t.top[0]),
        })
        .collect()
}
