//! Line-delimited distribution dumps.
//!
//! One JSON object per line, one sentence per object:
//!
//! ```text
//! {"id":"s1","text":"New Yrok","meta":{"model":"gpt2","mode":"causal","k":512},
//!  "tokens":[{"t":"New","span":[0,3],"p":0.02,"top":[0.3,0.1],"res":0.6}, ...]}
//! ```
//!
//! `span` is a half-open range of character (Unicode scalar) offsets into
//! `text`, `p` is the probability the model gave the token that actually
//! occurs, `top` holds the most likely candidates in descending order and
//! `res` the mass of everything else (omitted when zero).

mod align;
mod validate;

pub use align::{align_to_dataset_tokens, AlignError, Alignment};
pub use validate::{validate_record, warnings, Finding};

use std::fmt;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::TruncatedDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Causal,
    Masked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpMeta {
    #[serde(rename = "model")]
    pub model_name: String,
    pub mode: Mode,
    #[serde(rename = "prompt", default, skip_serializing_if = "Option::is_none")]
    pub prompt_text: Option<String>,
    /// Truncation depth the extractor was asked for.
    pub k: usize,
}

/// Half-open `[start, end)` range of character offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }
}

impl From<[usize; 2]> for CharSpan {
    fn from([start, end]: [usize; 2]) -> Self {
        Self { start, end }
    }
}

impl From<CharSpan> for [usize; 2] {
    fn from(s: CharSpan) -> Self {
        [s.start, s.end]
    }
}

impl fmt::Display for CharSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenRecord {
    pub text: String,
    pub span: CharSpan,
    pub p_actual: f64,
    pub dist: TruncatedDistribution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceDump {
    pub sentence_id: String,
    pub original_text: String,
    pub meta: DumpMeta,
    pub tokens: Vec<TokenRecord>,
}

/// Wire shape of a sentence, before invariants are checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSentence {
    pub id: String,
    pub text: String,
    pub meta: DumpMeta,
    pub tokens: Vec<RawToken>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawToken {
    pub t: String,
    pub span: CharSpan,
    pub p: f64,
    pub top: Vec<f64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub res: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("line {line}: malformed record: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {}", .violations[0])]
    Validation { line: usize, violations: Vec<Finding> },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl RawSentence {
    /// Checks every invariant and converts, or returns all violations.
    pub fn into_sentence(self) -> Result<SentenceDump, Vec<Finding>> {
        let violations = validate_record(&self);
        if !violations.is_empty() {
            return Err(violations);
        }
        let tokens = self
            .tokens
            .into_iter()
            .map(|t| TokenRecord {
                dist: TruncatedDistribution::new(t.top, t.res).expect("validated distribution"),
                text: t.t,
                span: t.span,
                p_actual: t.p,
            })
            .collect();
        Ok(SentenceDump {
            sentence_id: self.id,
            original_text: self.text,
            meta: self.meta,
            tokens,
        })
    }
}

impl From<&SentenceDump> for RawSentence {
    fn from(s: &SentenceDump) -> Self {
        RawSentence {
            id: s.sentence_id.clone(),
            text: s.original_text.clone(),
            meta: s.meta.clone(),
            tokens: s
                .tokens
                .iter()
                .map(|t| RawToken {
                    t: t.text.clone(),
                    span: t.span,
                    p: t.p_actual,
                    top: t.dist.top().to_vec(),
                    res: t.dist.residual(),
                })
                .collect(),
        }
    }
}

/// Streaming reader over a dump; yields sentences in file order.
///
/// Blank lines are skipped. A bad line produces an error and reading
/// continues with the next line.
pub struct DumpReader<R> {
    lines: io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Iterator for DumpReader<R> {
    type Item = Result<SentenceDump, DumpError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let text = match self.lines.next()? {
                Ok(t) => t,
                Err(e) => return Some(Err(e.into())),
            };
            self.line += 1;
            if text.trim().is_empty() {
                continue;
            }
            let line = self.line;
            let raw: RawSentence = match serde_json::from_str(&text) {
                Ok(r) => r,
                Err(source) => return Some(Err(DumpError::Parse { line, source })),
            };
            return Some(
                raw.into_sentence()
                    .map_err(|violations| DumpError::Validation { line, violations }),
            );
        }
    }
}

pub fn parse_dump<R: BufRead>(reader: R) -> DumpReader<R> {
    DumpReader {
        lines: reader.lines(),
        line: 0,
    }
}

/// Reads a whole dump, stopping at the first error.
pub fn read_dump<R: BufRead>(reader: R) -> Result<Vec<SentenceDump>, DumpError> {
    parse_dump(reader).collect()
}

pub fn write_dump<'a, W: Write>(
    sentences: impl IntoIterator<Item = &'a SentenceDump>,
    mut writer: W,
) -> io::Result<()> {
    for s in sentences {
        serde_json::to_writer(&mut writer, &RawSentence::from(s))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}
