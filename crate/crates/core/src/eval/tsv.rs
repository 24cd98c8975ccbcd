use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "c")]
    Correct,
    #[serde(rename = "i")]
    Incorrect,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Correct => "c",
            Label::Incorrect => "i",
        }
    }

    pub fn from_flag(flagged: bool) -> Self {
        if flagged {
            Label::Incorrect
        } else {
            Label::Correct
        }
    }

    pub fn is_incorrect(self) -> bool {
        self == Label::Incorrect
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledToken {
    pub surface: String,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSentence {
    pub tokens: Vec<LabeledToken>,
}

impl LabeledSentence {
    pub fn surfaces(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.tokens.iter().map(|t| t.label)
    }
}

#[derive(Debug, Error)]
pub enum TsvError {
    #[error("line {line}: unknown label `{label}` (expected `c` or `i`)")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: expected `token<TAB>label`")]
    Malformed { line: usize },
    #[error("no sentences in input")]
    Empty,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Reads the shared-task layout: `token<TAB>label` per line, `c` or `i`,
/// sentences separated by blank lines. Runs of blank lines count as one
/// separator and a final sentence without a trailing blank line is kept.
pub fn parse_multiged_tsv<R: BufRead>(reader: R) -> Result<Vec<LabeledSentence>, TsvError> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(LabeledSentence {
                    tokens: std::mem::take(&mut current),
                });
            }
            continue;
        }
        let (surface, label) = line
            .rsplit_once('\t')
            .ok_or(TsvError::Malformed { line: i + 1 })?;
        let label = match label.trim() {
            "c" => Label::Correct,
            "i" => Label::Incorrect,
            other => {
                return Err(TsvError::UnknownLabel {
                    line: i + 1,
                    label: other.to_string(),
                })
            }
        };
        current.push(LabeledToken {
            surface: surface.to_string(),
            label,
        });
    }
    if !current.is_empty() {
        sentences.push(LabeledSentence { tokens: current });
    }
    if sentences.is_empty() {
        return Err(TsvError::Empty);
    }
    Ok(sentences)
}

pub fn write_multiged_tsv<W: Write>(sentences: &[LabeledSentence], mut writer: W) -> io::Result<()> {
    for s in sentences {
        for t in &s.tokens {
            writeln!(writer, "{}\t{}", t.surface, t.label.as_str())?;
        }
        writeln!(writer)?;
    }
    writer.flush()
}

/// Same layout as the gold file, with predicted labels.
pub fn write_predictions<W: Write>(
    sentences: &[LabeledSentence],
    flags: &[Vec<bool>],
    writer: W,
) -> io::Result<()> {
    let predicted: Vec<LabeledSentence> = sentences
        .iter()
        .zip(flags)
        .map(|(s, f)| LabeledSentence {
            tokens: s
                .tokens
                .iter()
                .zip(f)
                .map(|(t, &flag)| LabeledToken {
                    surface: t.surface.clone(),
                    label: Label::from_flag(flag),
                })
                .collect(),
        })
        .collect();
    write_multiged_tsv(&predicted, writer)
}
