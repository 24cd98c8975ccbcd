use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use super::{CharSpan, SentenceDump};

/// Model-token indices grouped by the dataset token they fall in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    groups: Vec<Vec<usize>>,
    spans: Vec<CharSpan>,
}

impl Alignment {
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Character span of each dataset token in the sentence text.
    pub fn dataset_spans(&self) -> &[CharSpan] {
        &self.spans
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Dataset tokens that no model token landed in.
    pub fn unaligned(&self) -> Vec<usize> {
        self.groups
            .iter()
            .enumerate()
            .filter(|(_, g)| g.is_empty())
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlignError {
    #[error("dataset token {index} `{token}` not found at character {at} (text there: `{found}`)")]
    DatasetToken {
        index: usize,
        token: String,
        at: usize,
        found: String,
    },
    #[error("text continues after the last dataset token at character {at}: `{found}`")]
    TrailingText { at: usize, found: String },
    #[error("model token {record} at {span} does not fall inside a single dataset token")]
    Straddles { record: usize, span: CharSpan },
    #[error("model token {record} at {span} reads `{token}` but the text there is `{found}`")]
    TextMismatch {
        record: usize,
        span: CharSpan,
        token: String,
        found: String,
    },
    #[error("model token {record} at {span} lies outside the sentence")]
    OutOfRange { record: usize, span: CharSpan },
    #[error("no dataset tokens to align against")]
    NoDatasetTokens,
}

fn nfc(s: &str) -> String {
    s.nfc().collect()
}

fn slice(chars: &[char], start: usize, end: usize) -> String {
    chars[start.min(chars.len())..end.min(chars.len())]
        .iter()
        .collect()
}

fn is_marker(c: char) -> bool {
    c.is_whitespace() || c == '\u{2581}'
}

/// Locates each dataset token in the sentence text, in order, allowing any
/// whitespace between tokens.
fn locate(chars: &[char], tokens: &[&str]) -> Result<Vec<CharSpan>, AlignError> {
    let mut spans = Vec::with_capacity(tokens.len());
    let mut cursor = 0;
    for (index, token) in tokens.iter().enumerate() {
        while cursor < chars.len() && chars[cursor].is_whitespace() {
            cursor += 1;
        }
        let want: Vec<char> = token.chars().collect();
        let end = if chars[cursor..].starts_with(&want) {
            Some(cursor + want.len())
        } else {
            // normalization may change the length; try a bounded window
            let want = nfc(token);
            let limit = (cursor + 4 * want.chars().count() + 4).min(chars.len());
            (cursor + 1..=limit).find(|&e| nfc(&slice(chars, cursor, e)) == want)
        };
        let Some(end) = end else {
            return Err(AlignError::DatasetToken {
                index,
                token: token.to_string(),
                at: cursor,
                found: slice(chars, cursor, cursor + want.len().max(1)),
            });
        };
        spans.push(CharSpan::new(cursor, end));
        cursor = end;
    }
    while cursor < chars.len() && chars[cursor].is_whitespace() {
        cursor += 1;
    }
    if cursor < chars.len() {
        return Err(AlignError::TrailingText {
            at: cursor,
            found: slice(chars, cursor, chars.len()),
        });
    }
    Ok(spans)
}

/// Maps every model token to the dataset token containing its span.
///
/// Model-token spans are trimmed of surrounding whitespace first. A token that
/// is only whitespace attaches to the next dataset token (or the last one at
/// the end of the sentence). Token text is compared with the text under its
/// span after NFC normalization, except for tokens carrying U+FFFD (partial
/// byte-level pieces).
pub fn align_to_dataset_tokens<S: AsRef<str>>(
    dump: &SentenceDump,
    dataset_tokens: &[S],
) -> Result<Alignment, AlignError> {
    if dataset_tokens.is_empty() {
        return Err(AlignError::NoDatasetTokens);
    }
    let chars: Vec<char> = dump.original_text.chars().collect();
    let tokens: Vec<&str> = dataset_tokens.iter().map(AsRef::as_ref).collect();
    let spans = locate(&chars, &tokens)?;
    let mut groups = vec![Vec::new(); spans.len()];

    for (record, tok) in dump.tokens.iter().enumerate() {
        let span = tok.span;
        if span.start > span.end || span.end > chars.len() {
            return Err(AlignError::OutOfRange { record, span });
        }
        let (mut s, mut e) = (span.start, span.end);
        while s < e && chars[s].is_whitespace() {
            s += 1;
        }
        while e > s && chars[e - 1].is_whitespace() {
            e -= 1;
        }

        let target = if s == e {
            spans.iter().position(|d| d.start >= s).unwrap_or(spans.len() - 1)
        } else {
            let j = spans.partition_point(|d| d.start <= s);
            match j.checked_sub(1) {
                Some(j) if spans[j].end >= e => j,
                _ => return Err(AlignError::Straddles { record, span }),
            }
        };

        let shown = tok.text.trim_matches(is_marker);
        if s < e && !shown.contains('\u{FFFD}') {
            let found = slice(&chars, s, e);
            if nfc(shown) != nfc(&found) {
                return Err(AlignError::TextMismatch {
                    record,
                    span,
                    token: tok.text.clone(),
                    found,
                });
            }
        }
        groups[target].push(record);
    }
    Ok(Alignment { groups, spans })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dump::{DumpMeta, Mode, TokenRecord};
    use crate::measure::TruncatedDistribution;

    fn dump(text: &str, toks: &[(&str, usize, usize)]) -> SentenceDump {
        SentenceDump {
            sentence_id: "t".into(),
            original_text: text.into(),
            meta: DumpMeta {
                model_name: "m".into(),
                mode: Mode::Causal,
                prompt_text: None,
                k: 1,
            },
            tokens: toks
                .iter()
                .map(|&(t, s, e)| TokenRecord {
                    text: t.into(),
                    span: CharSpan::new(s, e),
                    p_actual: 1.0,
                    dist: TruncatedDistribution::new(vec![1.0], 0.0).unwrap(),
                })
                .collect(),
        }
    }

    #[test]
    fn subwords_group_under_their_word() {
        let d = dump(
            "New Yrok City",
            &[("New", 0, 3), (" Yr", 3, 6), ("ok", 6, 8), (" City", 8, 13)],
        );
        let a = align_to_dataset_tokens(&d, &["New", "Yrok", "City"]).unwrap();
        assert_eq!(a.groups(), &[vec![0], vec![1, 2], vec![3]]);
        assert!(a.unaligned().is_empty());
        assert_eq!(a.dataset_spans()[1], CharSpan::new(4, 8));
    }

    #[test]
    fn identical_tokenization_is_identity() {
        let d = dump("a bb c", &[("a", 0, 1), ("bb", 2, 4), ("c", 5, 6)]);
        let a = align_to_dataset_tokens(&d, &["a", "bb", "c"]).unwrap();
        assert_eq!(a.groups(), &[vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn missing_dataset_token_is_an_error() {
        let d = dump("a bb c", &[("a", 0, 1)]);
        let err = align_to_dataset_tokens(&d, &["a", "zz", "c"]).unwrap_err();
        assert!(
            matches!(err, AlignError::DatasetToken { index: 1, at: 2, .. }),
            "{err:?}"
        );
        let err = align_to_dataset_tokens(&d, &["a", "bb"]).unwrap_err();
        assert!(matches!(err, AlignError::TrailingText { at: 5, .. }), "{err:?}");
    }

    #[test]
    fn unaligned_dataset_tokens_are_reported() {
        let d = dump("a bb c", &[("a", 0, 1), ("c", 5, 6)]);
        let a = align_to_dataset_tokens(&d, &["a", "bb", "c"]).unwrap();
        assert_eq!(a.unaligned(), vec![1]);
    }

    #[test]
    fn straddling_model_token_is_an_error() {
        let d = dump("ab cd", &[("ab cd", 0, 5)]);
        let err = align_to_dataset_tokens(&d, &["ab", "cd"]).unwrap_err();
        assert!(matches!(err, AlignError::Straddles { record: 0, .. }));
    }

    #[test]
    fn whitespace_only_token_joins_next_word() {
        let d = dump("ab  cd", &[("ab", 0, 2), (" ", 2, 3), (" cd", 3, 6)]);
        let a = align_to_dataset_tokens(&d, &["ab", "cd"]).unwrap();
        assert_eq!(a.groups(), &[vec![0], vec![1, 2]]);
    }

    #[test]
    fn text_mismatch_is_reported() {
        let d = dump("ab cd", &[("ab", 0, 2), ("xx", 3, 5)]);
        let err = align_to_dataset_tokens(&d, &["ab", "cd"]).unwrap_err();
        assert!(matches!(err, AlignError::TextMismatch { record: 1, .. }));
    }

    #[test]
    fn nfc_equivalent_forms_match() {
        // decomposed e + combining acute in the text, precomposed in the dataset
        let d = dump("cafe\u{301} ok", &[("cafe\u{301}", 0, 5), (" ok", 5, 8)]);
        let a = align_to_dataset_tokens(&d, &["caf\u{e9}", "ok"]).unwrap();
        assert_eq!(a.groups(), &[vec![0], vec![1]]);
    }

    #[test]
    fn sentencepiece_marker_is_ignored() {
        let d = dump("ab cd", &[("\u{2581}ab", 0, 2), ("\u{2581}cd", 2, 5)]);
        assert!(align_to_dataset_tokens(&d, &["ab", "cd"]).is_ok());
    }
}
