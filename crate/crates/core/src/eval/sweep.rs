use serde::{Deserialize, Serialize};

use super::{EvalError, EvalResult, Label};
use crate::scoring::Method;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub flagged: usize,
    #[serde(flatten)]
    pub result: EvalResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub method: String,
    pub best_threshold: f64,
    pub best_f: f64,
    /// No incorrect tokens in the gold labels; every point scores zero.
    pub degenerate: bool,
    pub grid: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn best(&self) -> &SweepPoint {
        self.grid
            .iter()
            .find(|p| p.threshold == self.best_threshold)
            .expect("best threshold is a grid point")
    }
}

fn check_grid(method: Method, grid: &[f64]) -> Result<(), EvalError> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    for &t in grid {
        method.check_threshold(t)?;
    }
    if let Some(i) = grid.windows(2).position(|w| w[1] < w[0]) {
        return Err(EvalError::UnsortedGrid { index: i + 1 });
    }
    Ok(())
}

/// Evaluates every threshold of an ascending grid in one pass over the
/// sorted scores and picks the best F-beta.
///
/// Ties prefer fewer flagged tokens, then the threshold that flags less
/// (larger for oddballness and ranks, smaller for probability).
pub fn tune_threshold(
    scores: &[f64],
    gold: &[Label],
    method: Method,
    grid: &[f64],
    beta: f64,
) -> Result<SweepResult, EvalError> {
    if scores.len() != gold.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            gold: gold.len(),
        });
    }
    check_grid(method, grid)?;

    let mut pairs: Vec<(f64, bool)> = scores
        .iter()
        .zip(gold)
        .map(|(&s, l)| (s, l.is_incorrect()))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len();
    let positives = pairs.iter().filter(|p| p.1).count();
    let higher = method.higher_is_anomalous();

    // `below` is the length of the low-score prefix: unflagged scores when
    // high scores flag, flagged ones when low scores flag
    let (mut below, mut positives_below) = (0, 0);
    let mut points = Vec::with_capacity(grid.len());
    for &threshold in grid {
        while below < n && method.flags(pairs[below].0, threshold) != higher {
            positives_below += usize::from(pairs[below].1);
            below += 1;
        }
        let (flagged, tp) = if higher {
            (n - below, positives - positives_below)
        } else {
            (below, positives_below)
        };
        let result = EvalResult::from_counts(tp, flagged - tp, positives - tp, beta);
        points.push(SweepPoint {
            threshold,
            flagged,
            result,
        });
    }

    let mut best = 0;
    for (i, p) in points.iter().enumerate().skip(1) {
        let b = &points[best];
        let better = p.result.f_beta > b.result.f_beta
            || (p.result.f_beta == b.result.f_beta
                && (p.flagged < b.flagged || (p.flagged == b.flagged && higher)));
        if better {
            best = i;
        }
    }
    Ok(SweepResult {
        method: method.to_string(),
        best_threshold: points[best].threshold,
        best_f: points[best].result.f_beta,
        degenerate: positives == 0,
        grid: points,
    })
}

/// Applies a tuned threshold to held-out scores.
pub fn evaluate_run(
    scores: &[f64],
    gold: &[Label],
    threshold: f64,
    method: Method,
    beta: f64,
) -> Result<EvalResult, EvalError> {
    method.check_threshold(threshold)?;
    let flags: Vec<bool> = scores.iter().map(|&s| method.flags(s, threshold)).collect();
    super::f_beta(&flags, gold, beta)
}

fn decimal(mantissa: u32, exponent: i32) -> f64 {
    format!("{mantissa}e{exponent}").parse().expect("decimal literal")
}

/// Grid used when none is given: oddballness 0.00 to 1.00 in steps of 0.01,
/// probability 1e-6 to 1e-1 in 1-2-5 steps, ranks 1 to `depth`.
pub fn default_grid(method: Method, depth: usize) -> Vec<f64> {
    match method {
        Method::Oddballness(_) => (0..=100).map(|i| i as f64 / 100.0).collect(),
        Method::Probability => {
            let mut grid: Vec<f64> = (-6..=-2).flat_map(|e| [1, 2, 5].map(|m| decimal(m, e))).collect();
            grid.push(decimal(1, -1));
            grid
        }
        Method::TopK => (1..=depth.max(1)).map(|k| k as f64).collect(),
    }
}

/// Two-significant-digit thresholds between the neighbours of the coarse
/// optimum, merged into the coarse grid.
pub fn refine_probability_grid(coarse: &[f64], best: f64) -> Vec<f64> {
    let Some(i) = coarse.iter().position(|&t| t == best) else {
        return coarse.to_vec();
    };
    let lo = coarse[i.saturating_sub(1)];
    let hi = coarse[(i + 1).min(coarse.len() - 1)];
    let mut grid = coarse.to_vec();
    for e in -8..=0 {
        for m in 10..100 {
            let t = decimal(m, e - 1);
            if t > lo && t < hi && t <= 1.0 {
                grid.push(t);
            }
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Tunes over the default grid; for probability the coarse optimum is refined
/// with a second pass.
pub fn tune_default(
    scores: &[f64],
    gold: &[Label],
    method: Method,
    depth: usize,
    beta: f64,
) -> Result<SweepResult, EvalError> {
    let coarse = default_grid(method, depth);
    let first = tune_threshold(scores, gold, method, &coarse, beta)?;
    if method != Method::Probability {
        return Ok(first);
    }
    let refined = refine_probability_grid(&coarse, first.best_threshold);
    tune_threshold(scores, gold, method, &refined, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::f_beta;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use Label::{Correct as C, Incorrect as I};

    fn brute_force(scores: &[f64], gold: &[Label], method: Method, grid: &[f64]) -> Vec<EvalResult> {
        grid.iter()
            .map(|&t| {
                let flags: Vec<bool> = scores.iter().map(|&s| method.flags(s, t)).collect();
                f_beta(&flags, gold, 0.5).unwrap()
            })
            .collect()
    }

    #[test]
    fn picks_separating_threshold() {
        let r = tune_threshold(
            &[0.0, 0.45, 0.85],
            &[C, C, I],
            Method::ODDBALLNESS,
            &[0.5, 0.84],
            0.5,
        )
        .unwrap();
        assert_eq!(r.best_threshold, 0.84);
        assert_eq!(r.best_f, 1.0);
        assert!(!r.degenerate);
        assert_eq!(r.grid.len(), 2);
    }

    #[test]
    fn degenerate_gold() {
        let r = tune_threshold(&[0.1, 0.9], &[C, C], Method::ODDBALLNESS, &[0.0, 0.5, 1.0], 0.5).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.best_f, 0.0);
        assert_eq!(r.best_threshold, 1.0);
    }

    #[test]
    fn tie_break_prefers_fewer_flags() {
        // both 0.3 and 0.5 flag only the incorrect token; prefer the larger
        let r = tune_threshold(&[0.2, 0.9], &[C, I], Method::ODDBALLNESS, &[0.3, 0.5], 0.5).unwrap();
        assert_eq!(r.best_threshold, 0.5);
        let r = tune_threshold(&[0.2, 0.01], &[C, I], Method::Probability, &[0.05, 0.1], 0.5).unwrap();
        assert_eq!(r.best_threshold, 0.05);
    }

    #[test]
    fn grid_errors() {
        assert!(matches!(
            tune_threshold(&[0.1], &[C], Method::ODDBALLNESS, &[], 0.5),
            Err(EvalError::EmptyGrid)
        ));
        assert!(matches!(
            tune_threshold(&[0.1], &[C], Method::ODDBALLNESS, &[0.5, 0.2], 0.5),
            Err(EvalError::UnsortedGrid { index: 1 })
        ));
        assert!(matches!(
            tune_threshold(&[0.1], &[C], Method::TopK, &[0.5], 0.5),
            Err(EvalError::Threshold(_))
        ));
        assert!(matches!(
            tune_threshold(&[0.1, 0.2], &[C], Method::ODDBALLNESS, &[0.5], 0.5),
            Err(EvalError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn sweep_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.random_range(1..60);
            let gold: Vec<Label> = (0..n).map(|_| if rng.random_bool(0.3) { I } else { C }).collect();
            // coarse values so that scores coincide with grid points
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..=20) as f64 / 20.0).collect();
            let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
            for method in [Method::ODDBALLNESS, Method::Probability] {
                let fast = tune_threshold(&scores, &gold, method, &grid, 0.5).unwrap();
                let slow = brute_force(&scores, &gold, method, &grid);
                for (p, r) in fast.grid.iter().zip(&slow) {
                    assert_eq!(p.result, *r);
                }
            }
        }
    }

    #[test]
    fn default_grids() {
        let odd = default_grid(Method::ODDBALLNESS, 0);
        assert_eq!(odd.len(), 101);
        assert_eq!(odd[84], 0.84);
        let prob = default_grid(Method::Probability, 0);
        assert_eq!(prob.first(), Some(&1e-6));
        assert_eq!(prob.last(), Some(&0.1));
        assert!(prob.contains(&0.0002) && prob.contains(&0.005));
        assert_eq!(default_grid(Method::TopK, 500).len(), 500);
    }

    #[test]
    fn refinement_stays_between_neighbours() {
        let coarse = default_grid(Method::Probability, 0);
        let fine = refine_probability_grid(&coarse, 2e-4);
        assert!(fine.contains(&0.00014) && fine.contains(&0.0003) && fine.contains(&0.00049));
        assert!(!fine.contains(&0.00051));
        assert!(fine.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn evaluate_run_applies_threshold() {
        let r = evaluate_run(&[0.0, 0.45, 0.85], &[C, I, I], 0.84, Method::ODDBALLNESS, 0.5).unwrap();
        assert_eq!(
            (r.true_positives, r.false_positives, r.false_negatives),
            (1, 0, 1)
        );
    }
}
