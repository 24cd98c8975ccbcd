//! Writes the synthetic dev/test fixture used by the end-to-end tests.
//!
//! Each model token is predicted in a peaked, confident or open context.
//! Correct tokens come from the head of their context, so in an open context
//! they are individually unlikely; incorrect ones come from just below the
//! head. Ten percent of tokens get the other label's behaviour.
//!
//! Usage: cargo run --example gen_synthetic -- <output-dir>

use std::fs;
use std::path::Path;

use oddball::dump::{write_dump, CharSpan, DumpMeta, Mode, SentenceDump, TokenRecord};
use oddball::eval::{write_multiged_tsv, Label, LabeledSentence, LabeledToken};
use oddball::measure::TruncatedDistribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SYLLABLES: [&str; 12] = [
    "ka", "lo", "mi", "ra", "tu", "ne", "si", "po", "de", "fa", "gu", "bel",
];
const DEPTH: usize = 96;
const OUTCOMES: usize = 160;

fn sig5(x: f64) -> f64 {
    format!("{x:.4e}").parse().unwrap()
}

#[derive(Clone, Copy)]
enum Kind {
    /// one candidate with nearly all the mass
    Peaked,
    /// one dominant candidate and a geometric tail
    Confident,
    /// fifty to ninety near-equal candidates
    Open,
}

/// A full distribution over `OUTCOMES`, descending, and the size of its head.
fn context(rng: &mut ChaCha8Rng, kind: Kind) -> (Vec<f64>, usize) {
    let geometric = |rng: &mut ChaCha8Rng, top: f64, decay: f64| -> Vec<f64> {
        (0..OUTCOMES)
            .map(|j| {
                if j == 0 {
                    top
                } else {
                    decay.powi(j as i32) * rng.random_range(0.8..1.2)
                }
            })
            .collect()
    };
    let (mut w, head): (Vec<f64>, usize) = match kind {
        Kind::Peaked => {
            let top = rng.random_range(100.0..400.0);
            let decay = rng.random_range(0.3..0.5);
            (geometric(rng, top, decay), 1)
        }
        Kind::Confident => {
            let top = rng.random_range(2.0..8.0);
            let decay = rng.random_range(0.4..0.7);
            (geometric(rng, top, decay), 1)
        }
        Kind::Open => {
            let width = rng.random_range(50..90);
            let w = (0..OUTCOMES)
                .map(|j| {
                    if j < width {
                        rng.random_range(0.8..1.2)
                    } else {
                        0.6f64.powi((j - width) as i32 + 1)
                    }
                })
                .collect();
            (w, width)
        }
    };
    w.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = w.iter().sum();
    (w.iter().map(|x| x / total).collect(), head)
}

/// Index of the outcome that actually occurs.
fn pick(rng: &mut ChaCha8Rng, head: usize, label: Label) -> usize {
    if rng.random_bool(0.1) {
        // label noise
        return match label {
            Label::Correct => rng.random_range(3..20),
            Label::Incorrect => rng.random_range(0..head),
        };
    }
    match (head == 1, label) {
        (true, Label::Correct) => {
            if rng.random_bool(0.95) {
                0
            } else {
                rng.random_range(1..3)
            }
        }
        (false, Label::Correct) => rng.random_range(0..head),
        (true, Label::Incorrect) => rng.random_range(1..4),
        (false, Label::Incorrect) => rng.random_range(head..head + 10),
    }
}

fn record(rng: &mut ChaCha8Rng, text: &str, span: CharSpan, label: Label) -> TokenRecord {
    let kind = match rng.random_range(0..10) {
        0..3 => Kind::Peaked,
        3..6 => Kind::Confident,
        _ => Kind::Open,
    };
    let (full, head) = context(rng, kind);
    let actual = pick(rng, head, label);
    let top: Vec<f64> = full[..DEPTH].iter().map(|&p| sig5(p)).collect();
    let residual = sig5((1.0 - top.iter().sum::<f64>()).max(0.0));
    TokenRecord {
        text: text.to_string(),
        span,
        p_actual: sig5(full[actual]),
        dist: TruncatedDistribution::new(top, residual).expect("valid synthetic distribution"),
    }
}

fn split(rng: &mut ChaCha8Rng, prefix: &str, n: usize) -> (Vec<SentenceDump>, Vec<LabeledSentence>) {
    let mut dumps = Vec::new();
    let mut gold = Vec::new();
    for s in 0..n {
        let len = rng.random_range(5..12);
        let words: Vec<(String, Label)> = (0..len)
            .map(|_| {
                let syl = rng.random_range(1..4);
                let w: String = (0..syl)
                    .map(|_| SYLLABLES[rng.random_range(0..SYLLABLES.len())])
                    .collect();
                let label = if rng.random_bool(0.15) {
                    Label::Incorrect
                } else {
                    Label::Correct
                };
                (w, label)
            })
            .collect();

        let mut text = String::new();
        let mut tokens = Vec::new();
        for (i, (w, label)) in words.iter().enumerate() {
            let lead = usize::from(i > 0);
            let start = text.chars().count();
            if i > 0 {
                text.push(' ');
            }
            text.push_str(w);
            // words longer than one syllable become two model tokens
            let cut = if w.len() > 3 { 2 } else { w.len() };
            let first = format!("{}{}", if i > 0 { " " } else { "" }, &w[..cut]);
            let first_end = start + lead + cut;
            tokens.push(record(rng, &first, CharSpan::new(start, first_end), *label));
            if cut < w.len() {
                // the error usually shows on one piece only
                let second_label = if rng.random_bool(0.5) {
                    *label
                } else {
                    Label::Correct
                };
                tokens.push(record(
                    rng,
                    &w[cut..],
                    CharSpan::new(first_end, start + lead + w.len()),
                    second_label,
                ));
            }
        }
        dumps.push(SentenceDump {
            sentence_id: format!("{prefix}-{s:03}"),
            original_text: text,
            meta: DumpMeta {
                model_name: "synthetic-lm".into(),
                mode: Mode::Causal,
                prompt_text: None,
                k: DEPTH,
            },
            tokens,
        });
        gold.push(LabeledSentence {
            tokens: words
                .into_iter()
                .map(|(surface, label)| LabeledToken { surface, label })
                .collect(),
        });
    }
    (dumps, gold)
}

fn main() {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "tests/fixtures/synthetic".into());
    let dir = Path::new(&dir);
    fs::create_dir_all(dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20240501);
    for (name, n) in [("dev", 40), ("test", 40)] {
        let (dumps, gold) = split(&mut rng, name, n);
        let mut out = Vec::new();
        write_dump(&dumps, &mut out).unwrap();
        fs::write(dir.join(format!("{name}.dump.jsonl")), out).unwrap();
        let mut out = Vec::new();
        write_multiged_tsv(&gold, &mut out).unwrap();
        fs::write(dir.join(format!("{name}.tsv")), out).unwrap();
    }
}
