//! Per-token anomaly scores, model combination and thresholding.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dump::{align_to_dataset_tokens, AlignError, Alignment, SentenceDump};
use crate::measure::{oddballness_bounds, rank_of, GFunction, MeasureError};

/// Detection method. Scores are oriented differently per method:
/// probabilities are anomalous when low, oddballness and ranks when high.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Probability,
    Oddballness(GFunction),
    TopK,
}

impl Method {
    pub const ODDBALLNESS: Method = Method::Oddballness(GFunction::Identity);

    /// True when a larger score means a more anomalous token.
    pub fn higher_is_anomalous(self) -> bool {
        !matches!(self, Method::Probability)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Probability => "probability",
            Method::Oddballness(_) => "oddballness",
            Method::TopK => "topk",
        }
    }

    /// Label in the report tables.
    pub fn label(self) -> String {
        match self {
            Method::Probability => "Probability".into(),
            Method::Oddballness(GFunction::Identity) => "Oddballness".into(),
            Method::Oddballness(g) => format!("Oddballness ({g})"),
            Method::TopK => "TopK".into(),
        }
    }

    /// The more anomalous of two scores.
    fn worse(self, a: f64, b: f64) -> f64 {
        if self.higher_is_anomalous() {
            a.max(b)
        } else {
            a.min(b)
        }
    }

    pub fn check_threshold(self, threshold: f64) -> Result<(), ScoringError> {
        let ok = match self {
            Method::Probability | Method::Oddballness(_) => {
                threshold.is_finite() && (0.0..=1.0).contains(&threshold)
            }
            Method::TopK => threshold.is_finite() && threshold >= 1.0 && threshold.fract() == 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(ScoringError::InvalidThreshold {
                method: self,
                threshold,
            })
        }
    }

    /// Whether a score is flagged at `threshold`: probability below it,
    /// oddballness or rank above it.
    #[inline]
    pub fn flags(self, score: f64, threshold: f64) -> bool {
        if self.higher_is_anomalous() {
            score > threshold
        } else {
            score < threshold
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Oddballness(g) if *g != GFunction::Identity => write!(f, "oddballness[{g}]"),
            m => f.write_str(m.name()),
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "probability" => Ok(Method::Probability),
            "oddballness" => Ok(Method::ODDBALLNESS),
            "topk" => Ok(Method::TopK),
            other => Err(format!(
                "unknown method `{other}` (expected probability, oddballness or topk)"
            )),
        }
    }
}

/// How subword scores reduce to one score per dataset token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum AggregationPolicy {
    /// The most anomalous subword in the method's direction.
    #[default]
    #[serde(rename = "max")]
    MaxAnomaly,
    #[serde(rename = "mean")]
    Mean,
    #[serde(rename = "first")]
    FirstSubword,
}

impl FromStr for AggregationPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" | "max_anomaly" => Ok(AggregationPolicy::MaxAnomaly),
            "mean" => Ok(AggregationPolicy::Mean),
            "first" | "first_subword" => Ok(AggregationPolicy::FirstSubword),
            other => Err(format!(
                "unknown aggregation `{other}` (expected max, mean or first)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredToken {
    pub dataset_token_index: usize,
    pub score: f64,
    /// False when an oddballness score came from an inexact truncation bound.
    pub exact: bool,
    pub flagged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceScores {
    pub id: String,
    pub tokens: Vec<ScoredToken>,
    pub exact_records: usize,
    pub total_records: usize,
}

impl SentenceScores {
    /// Fraction of model tokens scored exactly; 1 for an empty sentence.
    pub fn exactness(&self) -> f64 {
        if self.total_records == 0 {
            1.0
        } else {
            self.exact_records as f64 / self.total_records as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoringError {
    #[error("sentence `{sentence}`: dataset token {index} `{token}` has no model tokens")]
    Unaligned {
        sentence: String,
        index: usize,
        token: String,
    },
    #[error("sentence `{sentence}`: {source}")]
    Align {
        sentence: String,
        #[source]
        source: AlignError,
    },
    #[error("sentence `{sentence}`, model token {record}: {source}")]
    Measure {
        sentence: String,
        record: usize,
        #[source]
        source: MeasureError,
    },
    #[error("cannot combine score lists of length {left} and {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("cannot combine scores for dataset tokens {left} and {right} at position {position}")]
    IndexMismatch {
        position: usize,
        left: usize,
        right: usize,
    },
    #[error("method {0} does not support model combination")]
    UnsupportedMethod(Method),
    #[error("threshold {threshold} is outside the domain of method {method}")]
    InvalidThreshold { method: Method, threshold: f64 },
}

/// Scores every dataset token of one sentence.
///
/// Oddballness uses the lower truncation bound, so a truncated dump never
/// scores a token as more anomalous than it is.
pub fn score_sentence(
    dump: &SentenceDump,
    alignment: &Alignment,
    method: Method,
    policy: AggregationPolicy,
) -> Result<SentenceScores, ScoringError> {
    let mut record_scores = Vec::with_capacity(dump.tokens.len());
    for (record, tok) in dump.tokens.iter().enumerate() {
        let measured = match method {
            Method::Probability => Ok((tok.p_actual, true)),
            Method::Oddballness(g) => {
                oddballness_bounds(&tok.dist, tok.p_actual, g).map(|b| (b.lower, b.exact))
            }
            Method::TopK => rank_of(&tok.dist, tok.p_actual).map(|r| (r.as_score(), true)),
        };
        record_scores.push(measured.map_err(|source| ScoringError::Measure {
            sentence: dump.sentence_id.clone(),
            record,
            source,
        })?);
    }

    let mut tokens = Vec::with_capacity(alignment.len());
    for (index, group) in alignment.groups().iter().enumerate() {
        let Some(&first) = group.first() else {
            let span = alignment.dataset_spans()[index];
            return Err(ScoringError::Unaligned {
                sentence: dump.sentence_id.clone(),
                index,
                token: dump
                    .original_text
                    .chars()
                    .skip(span.start)
                    .take(span.end - span.start)
                    .collect(),
            });
        };
        let scores = group.iter().map(|&r| record_scores[r].0);
        let score = match policy {
            AggregationPolicy::MaxAnomaly => scores.reduce(|a, b| method.worse(a, b)).unwrap_or(f64::NAN),
            AggregationPolicy::Mean => scores.sum::<f64>() / group.len() as f64,
            AggregationPolicy::FirstSubword => record_scores[first].0,
        };
        let exact = match policy {
            AggregationPolicy::FirstSubword => record_scores[first].1,
            _ => group.iter().all(|&r| record_scores[r].1),
        };
        tokens.push(ScoredToken {
            dataset_token_index: index,
            score,
            exact,
            flagged: None,
        });
    }
    Ok(SentenceScores {
        id: dump.sentence_id.clone(),
        tokens,
        exact_records: record_scores.iter().filter(|(_, exact)| *exact).count(),
        total_records: record_scores.len(),
    })
}

/// Aligns and scores a corpus in parallel. Output order follows input order,
/// and on failure the error of the earliest failing sentence is returned.
///
/// Without `dataset_tokens`, each sentence's text is split on whitespace.
pub fn score_corpus<S: AsRef<str> + Sync>(
    dumps: &[SentenceDump],
    dataset_tokens: Option<&[Vec<S>]>,
    method: Method,
    policy: AggregationPolicy,
) -> Result<Vec<SentenceScores>, ScoringError> {
    let results: Vec<Result<SentenceScores, ScoringError>> = dumps
        .par_iter()
        .enumerate()
        .map(|(i, dump)| {
            let alignment = match dataset_tokens {
                Some(all) => align_to_dataset_tokens(dump, &all[i]),
                None => {
                    let words: Vec<&str> = dump.original_text.split_whitespace().collect();
                    align_to_dataset_tokens(dump, &words)
                }
            }
            .map_err(|source| ScoringError::Align {
                sentence: dump.sentence_id.clone(),
                source,
            })?;
            score_sentence(dump, &alignment, method, policy)
        })
        .collect();
    results.into_iter().collect()
}

/// Elementwise combination of two models' scores for the same dataset tokens:
/// maximum oddballness or minimum probability.
pub fn combine(
    a: &[ScoredToken],
    b: &[ScoredToken],
    method: Method,
) -> Result<Vec<ScoredToken>, ScoringError> {
    if method == Method::TopK {
        return Err(ScoringError::UnsupportedMethod(method));
    }
    if a.len() != b.len() {
        return Err(ScoringError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(position, (x, y))| {
            if x.dataset_token_index != y.dataset_token_index {
                return Err(ScoringError::IndexMismatch {
                    position,
                    left: x.dataset_token_index,
                    right: y.dataset_token_index,
                });
            }
            Ok(ScoredToken {
                dataset_token_index: x.dataset_token_index,
                score: method.worse(x.score, y.score),
                exact: x.exact && y.exact,
                flagged: None,
            })
        })
        .collect()
}

pub fn combine_sentences(
    a: &SentenceScores,
    b: &SentenceScores,
    method: Method,
) -> Result<SentenceScores, ScoringError> {
    Ok(SentenceScores {
        id: a.id.clone(),
        tokens: combine(&a.tokens, &b.tokens, method)?,
        exact_records: a.exact_records + b.exact_records,
        total_records: a.total_records + b.total_records,
    })
}

pub fn apply_threshold(
    scores: &[ScoredToken],
    method: Method,
    threshold: f64,
) -> Result<Vec<ScoredToken>, ScoringError> {
    method.check_threshold(threshold)?;
    Ok(scores
        .iter()
        .map(|t| ScoredToken {
            flagged: Some(method.flags(t.score, threshold)),
            ..*t
        })
        .collect())
}

mod score_repr {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    const BEYOND_K: &str = "beyond-K";

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Tag(String),
    }

    pub fn serialize<S: Serializer>(scores: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let reprs: Vec<Repr> = scores
            .iter()
            .map(|&x| {
                if x == f64::INFINITY {
                    Repr::Tag(BEYOND_K.into())
                } else {
                    Repr::Number(x)
                }
            })
            .collect();
        reprs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Repr>::deserialize(d)?
            .into_iter()
            .map(|r| match r {
                Repr::Number(x) => Ok(x),
                Repr::Tag(t) if t == BEYOND_K => Ok(f64::INFINITY),
                Repr::Tag(t) => Err(serde::de::Error::custom(format!("unknown score `{t}`"))),
            })
            .collect()
    }
}

/// One line of a score file. Ranks beyond the stored depth are written as
/// the string `"beyond-K"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    #[serde(with = "score_repr")]
    pub scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flags: Option<Vec<bool>>,
    pub exactness: f64,
}

impl From<&SentenceScores> for ScoreRecord {
    fn from(s: &SentenceScores) -> Self {
        let flags: Option<Vec<bool>> = s.tokens.iter().map(|t| t.flagged).collect();
        ScoreRecord {
            id: s.id.clone(),
            scores: s.tokens.iter().map(|t| t.score).collect(),
            flags,
            exactness: s.exactness(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dump::{CharSpan, DumpMeta, Mode, TokenRecord};
    use crate::measure::TruncatedDistribution;

    fn record(text: &str, span: (usize, usize), p: f64, top: &[f64], res: f64) -> TokenRecord {
        TokenRecord {
            text: text.into(),
            span: CharSpan::new(span.0, span.1),
            p_actual: p,
            dist: TruncatedDistribution::new(top.to_vec(), res).unwrap(),
        }
    }

    fn sentence(text: &str, tokens: Vec<TokenRecord>) -> SentenceDump {
        SentenceDump {
            sentence_id: "s".into(),
            original_text: text.into(),
            meta: DumpMeta {
                model_name: "m".into(),
                mode: Mode::Masked,
                prompt_text: None,
                k: 3,
            },
            tokens,
        }
    }

    /// Three words, each predicted from the same three-point distribution.
    fn d3_sentence() -> SentenceDump {
        let top = [0.7, 0.25, 0.05];
        sentence(
            "a b c",
            vec![
                record("a", (0, 1), 0.7, &top, 0.0),
                record(" b", (1, 3), 0.25, &top, 0.0),
                record(" c", (3, 5), 0.05, &top, 0.0),
            ],
        )
    }

    fn scores_of(dump: &SentenceDump, words: &[&str], method: Method, policy: AggregationPolicy) -> Vec<f64> {
        let a = align_to_dataset_tokens(dump, words).unwrap();
        score_sentence(dump, &a, method, policy)
            .unwrap()
            .tokens
            .iter()
            .map(|t| t.score)
            .collect()
    }

    fn tokens(scores: &[f64]) -> Vec<ScoredToken> {
        scores
            .iter()
            .enumerate()
            .map(|(i, &score)| ScoredToken {
                dataset_token_index: i,
                score,
                exact: true,
                flagged: None,
            })
            .collect()
    }

    fn flagged(t: &[ScoredToken]) -> Vec<bool> {
        t.iter().map(|t| t.flagged.unwrap()).collect()
    }

    #[test]
    fn oddballness_of_three_point_fixture() {
        let s = scores_of(
            &d3_sentence(),
            &["a", "b", "c"],
            Method::ODDBALLNESS,
            Default::default(),
        );
        assert_eq!(s[0], 0.0);
        assert!((s[1] - 0.45).abs() < 1e-12);
        assert!((s[2] - 0.85).abs() < 1e-12);
    }

    #[test]
    fn probability_is_passthrough() {
        let s = scores_of(
            &d3_sentence(),
            &["a", "b", "c"],
            Method::Probability,
            Default::default(),
        );
        assert_eq!(s, vec![0.7, 0.25, 0.05]);
    }

    #[test]
    fn ranks_of_three_point_fixture() {
        let s = scores_of(&d3_sentence(), &["a", "b", "c"], Method::TopK, Default::default());
        assert_eq!(s, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn subword_reduction_per_policy() {
        // oddballness 0.3 and 0.9 from two-point distributions
        let dump = sentence(
            "xy",
            vec![
                record("x", (0, 1), 0.2, &[0.5, 0.2], 0.3),
                record("y", (1, 2), 0.05, &[0.95, 0.05], 0.0),
            ],
        );
        let odd = |policy| scores_of(&dump, &["xy"], Method::ODDBALLNESS, policy)[0];
        assert!((odd(AggregationPolicy::MaxAnomaly) - 0.9).abs() < 1e-12);
        assert!((odd(AggregationPolicy::Mean) - 0.6).abs() < 1e-12);
        assert!((odd(AggregationPolicy::FirstSubword) - 0.3).abs() < 1e-12);

        let prob = scores_of(&dump, &["xy"], Method::Probability, AggregationPolicy::MaxAnomaly);
        assert_eq!(prob, vec![0.05]);
    }

    #[test]
    fn inexact_bounds_are_counted() {
        let dump = sentence("x", vec![record("x", (0, 1), 0.01, &[0.5, 0.3], 0.2)]);
        let a = align_to_dataset_tokens(&dump, &["x"]).unwrap();
        let s = score_sentence(&dump, &a, Method::ODDBALLNESS, Default::default()).unwrap();
        assert!(!s.tokens[0].exact);
        assert_eq!(s.exactness(), 0.0);
        assert!((s.tokens[0].score - (0.49 + 0.29)).abs() < 1e-12);
    }

    #[test]
    fn unaligned_token_is_named() {
        let dump = sentence("a b", vec![record("a", (0, 1), 1.0, &[1.0], 0.0)]);
        let a = align_to_dataset_tokens(&dump, &["a", "b"]).unwrap();
        let err = score_sentence(&dump, &a, Method::Probability, Default::default()).unwrap_err();
        assert_eq!(
            err,
            ScoringError::Unaligned {
                sentence: "s".into(),
                index: 1,
                token: "b".into()
            }
        );
    }

    #[test]
    fn combination_directions() {
        let a = tokens(&[0.2, 0.9]);
        let b = tokens(&[0.5, 0.1]);
        let odd: Vec<f64> = combine(&a, &b, Method::ODDBALLNESS)
            .unwrap()
            .iter()
            .map(|t| t.score)
            .collect();
        assert_eq!(odd, vec![0.5, 0.9]);
        let prob: Vec<f64> = combine(&a, &b, Method::Probability)
            .unwrap()
            .iter()
            .map(|t| t.score)
            .collect();
        assert_eq!(prob, vec![0.2, 0.1]);
        assert_eq!(combine(&a, &a, Method::ODDBALLNESS).unwrap(), a);
    }

    #[test]
    fn combination_errors() {
        let a = tokens(&[0.2, 0.9]);
        assert_eq!(
            combine(&a, &tokens(&[0.1]), Method::ODDBALLNESS),
            Err(ScoringError::LengthMismatch { left: 2, right: 1 })
        );
        let mut shifted = tokens(&[0.2, 0.9]);
        shifted[1].dataset_token_index = 5;
        assert!(matches!(
            combine(&a, &shifted, Method::Probability),
            Err(ScoringError::IndexMismatch { position: 1, .. })
        ));
        assert_eq!(
            combine(&a, &a, Method::TopK),
            Err(ScoringError::UnsupportedMethod(Method::TopK))
        );
    }

    #[test]
    fn thresholds_per_method() {
        let odd = apply_threshold(&tokens(&[0.0, 0.45, 0.85]), Method::ODDBALLNESS, 0.84).unwrap();
        assert_eq!(flagged(&odd), vec![false, false, true]);
        let prob = apply_threshold(&tokens(&[0.7, 0.25, 0.05]), Method::Probability, 0.0002).unwrap();
        assert_eq!(flagged(&prob), vec![false, false, false]);
        let topk = apply_threshold(&tokens(&[1.0, 2.0, f64::INFINITY]), Method::TopK, 2.0).unwrap();
        assert_eq!(flagged(&topk), vec![false, false, true]);
    }

    #[test]
    fn threshold_domain_is_checked() {
        let t = tokens(&[0.5]);
        for (method, bad) in [
            (Method::ODDBALLNESS, 1.5),
            (Method::Probability, -0.1),
            (Method::Probability, f64::NAN),
            (Method::TopK, 0.0),
            (Method::TopK, 2.5),
        ] {
            assert!(matches!(
                apply_threshold(&t, method, bad),
                Err(ScoringError::InvalidThreshold { .. })
            ));
        }
    }

    #[test]
    fn combined_flags_are_the_union() {
        // every pair of score vectors over a small grid, max-combination
        let grid = [0.0, 0.3, 0.6, 0.9];
        for &x0 in &grid {
            for &x1 in &grid {
                for &y0 in &grid {
                    for &y1 in &grid {
                        let (a, b) = (tokens(&[x0, x1]), tokens(&[y0, y1]));
                        for theta in [0.0, 0.3, 0.5, 0.9] {
                            let m = Method::ODDBALLNESS;
                            let c =
                                flagged(&apply_threshold(&combine(&a, &b, m).unwrap(), m, theta).unwrap());
                            let fa = flagged(&apply_threshold(&a, m, theta).unwrap());
                            let fb = flagged(&apply_threshold(&b, m, theta).unwrap());
                            let union: Vec<bool> = fa.iter().zip(&fb).map(|(p, q)| *p || *q).collect();
                            assert_eq!(c, union);

                            let m = Method::Probability;
                            let c =
                                flagged(&apply_threshold(&combine(&a, &b, m).unwrap(), m, theta).unwrap());
                            let fa = flagged(&apply_threshold(&a, m, theta).unwrap());
                            let fb = flagged(&apply_threshold(&b, m, theta).unwrap());
                            let union: Vec<bool> = fa.iter().zip(&fb).map(|(p, q)| *p || *q).collect();
                            assert_eq!(c, union);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn score_record_encodes_beyond_k() {
        let s = SentenceScores {
            id: "s".into(),
            tokens: apply_threshold(&tokens(&[1.0, f64::INFINITY]), Method::TopK, 1.0).unwrap(),
            exact_records: 2,
            total_records: 2,
        };
        let json = serde_json::to_string(&ScoreRecord::from(&s)).unwrap();
        assert_eq!(
            json,
            r#"{"id":"s","scores":[1.0,"beyond-K"],"flags":[false,true],"exactness":1.0}"#
        );
        let back: ScoreRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.scores[1], f64::INFINITY);
    }

    #[test]
    fn corpus_scoring_keeps_order() {
        let mut dumps = Vec::new();
        for i in 0..50 {
            let mut d = d3_sentence();
            d.sentence_id = format!("s{i}");
            dumps.push(d);
        }
        let out = score_corpus::<String>(&dumps, None, Method::ODDBALLNESS, Default::default()).unwrap();
        let ids: Vec<&str> = out.iter().map(|s| s.id.as_str()).collect();
        let want: Vec<String> = (0..50).map(|i| format!("s{i}")).collect();
        assert_eq!(ids, want);
    }
}
