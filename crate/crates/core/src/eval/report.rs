use serde::{Deserialize, Serialize};

use super::EvalResult;
use crate::scoring::Method;

/// One line of a results table: a method, its threshold and the development
/// and test scores obtained with it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: Method,
    pub threshold: f64,
    pub dev: Option<EvalResult>,
    pub test: Option<EvalResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub threshold: f64,
    pub dev_f: Option<f64>,
    pub test_f: Option<f64>,
    pub dev: Option<EvalResult>,
    pub test: Option<EvalResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdinalCheck {
    pub holds: bool,
    pub message: String,
}

/// Machine-readable form of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub beta: f64,
    pub rows: Vec<SummaryRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordinal: Option<OrdinalCheck>,
}

impl Summary {
    pub fn new(rows: &[ReportRow], beta: f64) -> Self {
        Summary {
            beta,
            rows: rows
                .iter()
                .map(|r| SummaryRow {
                    method: r.method.label(),
                    threshold: r.threshold,
                    dev_f: r.dev.map(|d| d.f_beta),
                    test_f: r.test.map(|t| t.f_beta),
                    dev: r.dev,
                    test: r.test,
                })
                .collect(),
            ordinal: ordinal_check(rows),
        }
    }
}

fn percent(r: Option<EvalResult>) -> String {
    r.map_or_else(|| "-".to_string(), |r| format!("{:.2}", 100.0 * r.f_beta))
}

/// Fixed-width text table with columns Method, Threshold, Dev F, Test F.
/// F scores are printed as percentages with two decimals.
pub fn render_table(rows: &[ReportRow], beta: f64) -> String {
    let header = [
        "Method".to_string(),
        "Threshold".to_string(),
        format!("Dev F{beta}"),
        format!("Test F{beta}"),
    ];
    let body: Vec<[String; 4]> = rows
        .iter()
        .map(|r| {
            [
                r.method.label(),
                r.threshold.to_string(),
                percent(r.dev),
                percent(r.test),
            ]
        })
        .collect();
    let mut widths = header.clone().map(|h| h.chars().count());
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String; 4]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c:<w$}"))
            .collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let mut out = line(&header);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
    for row in &body {
        out.push_str(&line(row));
    }
    out
}

/// Compares development scores across methods: oddballness is expected to
/// be at least as good as probability, and probability at least as good as
/// top-K. Needs both an oddballness and a probability row.
pub fn ordinal_check(rows: &[ReportRow]) -> Option<OrdinalCheck> {
    let dev = |pred: fn(&Method) -> bool| {
        rows.iter()
            .find(|r| pred(&r.method))
            .and_then(|r| r.dev)
            .map(|d| d.f_beta)
    };
    let odd = dev(|m| matches!(m, Method::Oddballness(_)))?;
    let prob = dev(|m| *m == Method::Probability)?;
    let topk = dev(|m| *m == Method::TopK);

    let mut holds = odd >= prob;
    let mut message = format!(
        "oddballness {:.2} {} probability {:.2}",
        100.0 * odd,
        if odd >= prob { ">=" } else { "<" },
        100.0 * prob
    );
    if let Some(topk) = topk {
        holds &= prob >= topk;
        message.push_str(&format!(
            " {} topk {:.2}",
            if prob >= topk { ">=" } else { "<" },
            100.0 * topk
        ));
    }
    Some(OrdinalCheck { holds, message })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(f: f64) -> Option<EvalResult> {
        Some(EvalResult {
            f_beta: f,
            ..EvalResult::from_counts(0, 0, 0, 0.5)
        })
    }

    fn rows(odd: f64, prob: f64, topk: f64) -> Vec<ReportRow> {
        vec![
            ReportRow {
                method: Method::TopK,
                threshold: 30.0,
                dev: result(topk),
                test: result(topk),
            },
            ReportRow {
                method: Method::Probability,
                threshold: 0.002,
                dev: result(prob),
                test: None,
            },
            ReportRow {
                method: Method::ODDBALLNESS,
                threshold: 0.84,
                dev: result(odd),
                test: result(0.4661),
            },
        ]
    }

    #[test]
    fn table_layout() {
        let t = render_table(&rows(0.4916, 0.4434, 0.4119), 0.5);
        let want = "\
| Method      | Threshold | Dev F0.5 | Test F0.5 |
|-------------|-----------|----------|-----------|
| TopK        | 30        | 41.19    | 41.19     |
| Probability | 0.002     | 44.34    | -         |
| Oddballness | 0.84      | 49.16    | 46.61     |
";
        assert_eq!(t, want);
    }

    #[test]
    fn ordinal_claim() {
        let ok = ordinal_check(&rows(0.49, 0.44, 0.41)).unwrap();
        assert!(ok.holds);
        assert_eq!(ok.message, "oddballness 49.00 >= probability 44.00 >= topk 41.00");
        let bad = ordinal_check(&rows(0.40, 0.44, 0.41)).unwrap();
        assert!(!bad.holds);
        assert!(ordinal_check(&rows(0.4, 0.4, 0.4)[..1]).is_none());
    }
}
