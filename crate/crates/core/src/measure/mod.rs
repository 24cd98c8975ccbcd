//! Oddballness of an outcome within a discrete probability distribution.
//!
//! For a distribution `D = {p_1, p_2, ...}` and an outcome of probability
//! `p`, oddballness is
//!
//! ```text
//! xi_D(p) = sum_j g(max(0, p_j - p)) / sum_j g(p_j)
//! ```
//!
//! With the identity `g` and a normalized `D` the denominator is 1 and the
//! measure reduces to `sum_j max(0, p_j - p)`. The most likely outcome always
//! scores 0, an impossible outcome scores 1, and a flat distribution scores 0
//! for every member no matter how small its probability is.
//!
//! Its complement is the "probability of the probability", `sum_j min(p_j, p)`:
//! the mass of every outcome that is at most as likely as `p`, where each more
//! likely outcome contributes only a `p`-sized share. [`prob_of_prob`]
//! computes that sum directly so it can serve as an independent cross-check.

mod bounds;
mod distribution;
mod g;

pub use bounds::{oddballness_bounds, rank_of, OddballnessBounds, Rank};
pub use distribution::{FullDistribution, TruncatedDistribution, TAU_NORM};
pub use g::GFunction;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("distribution is empty")]
    Empty,
    #[error("total probability {sum} is not within {tau} of 1", tau = TAU_NORM)]
    Normalization { sum: f64 },
    #[error("probabilities are not in descending order at index {index}")]
    NotDescending { index: usize },
    #[error("residual mass {residual} with a zero smallest stored probability")]
    InvalidTruncation { residual: f64 },
}

/// Clamps to [0, 1]; a negative zero (the sum of nothing) becomes +0.
pub(crate) fn unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0) + 0.0
}

/// Oddballness of an outcome with probability `p` within `dist`.
///
/// `p` does not have to be a member of `dist`; `p = 0` gives 1 and any `p` at
/// or above the mode gives 0.
pub fn oddballness(dist: &FullDistribution, p: f64, g: GFunction) -> Result<f64, MeasureError> {
    FullDistribution::check_query(p)?;
    let total = dist.total();
    let above = dist.probs().iter().take_while(|&&pj| pj > p);
    let xi = match g {
        GFunction::Identity => above.map(|&pj| pj - p).sum::<f64>() / total,
        _ => {
            let num: f64 = above.map(|&pj| g.apply((pj - p) / total)).sum();
            let den: f64 = dist.probs().iter().map(|&pj| g.apply(pj / total)).sum();
            num / den
        }
    };
    Ok(unit(xi))
}

/// Mass of outcomes at most as likely as `p`, with every more likely outcome
/// counted only up to `p`: `sum_j min(p_j, p)`.
pub fn prob_of_prob(dist: &FullDistribution, p: f64) -> Result<f64, MeasureError> {
    FullDistribution::check_query(p)?;
    let pi = dist.probs().iter().map(|&pj| pj.min(p)).sum::<f64>() / dist.total();
    Ok(unit(pi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d3() -> FullDistribution {
        FullDistribution::new(vec![0.7, 0.25, 0.05]).unwrap()
    }

    #[test]
    fn two_point_distribution() {
        let d1 = FullDistribution::new(vec![0.01, 0.99]).unwrap();
        let id = GFunction::Identity;
        assert!((oddballness(&d1, 0.01, id).unwrap() - 0.98).abs() < 1e-12);
        assert_eq!(oddballness(&d1, 0.99, id).unwrap(), 0.0);
        assert!((prob_of_prob(&d1, 0.01).unwrap() - 0.02).abs() < 1e-12);
    }

    #[test]
    fn three_point_distribution() {
        let d = d3();
        let id = GFunction::Identity;
        assert_eq!(oddballness(&d, 0.7, id).unwrap(), 0.0);
        assert!((oddballness(&d, 0.25, id).unwrap() - 0.45).abs() < 1e-12);
        assert!((oddballness(&d, 0.05, id).unwrap() - 0.85).abs() < 1e-12);
        assert!((prob_of_prob(&d, 0.25).unwrap() - 0.55).abs() < 1e-12);
        assert!((prob_of_prob(&d, 0.7).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_members_are_never_odd() {
        let d2 = FullDistribution::new(vec![0.01; 100]).unwrap();
        for g in GFunction::ALL {
            assert_eq!(oddballness(&d2, 0.01, g).unwrap(), 0.0);
        }
    }

    #[test]
    fn impossible_event_is_maximally_odd() {
        for g in GFunction::ALL {
            let xi = oddballness(&d3(), 0.0, g).unwrap();
            assert!((xi - 1.0).abs() < 1e-12, "{g}: {xi}");
        }
    }

    #[test]
    fn above_mode_scores_zero() {
        assert_eq!(oddballness(&d3(), 0.9, GFunction::Identity).unwrap(), 0.0);
    }

    #[test]
    fn square_weighting_by_hand() {
        // (0.45^2 + 0) / (0.49 + 0.0625 + 0.0025)
        let xi = oddballness(&d3(), 0.25, GFunction::Square).unwrap();
        assert!((xi - 0.2025 / 0.555).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_query() {
        assert!(matches!(
            oddballness(&d3(), f64::INFINITY, GFunction::Identity),
            Err(MeasureError::InvalidInput(_))
        ));
        assert!(matches!(
            prob_of_prob(&d3(), -0.1),
            Err(MeasureError::InvalidInput(_))
        ));
    }

    fn weights() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, 2..64)
            .prop_filter("nonzero mass", |w| w.iter().sum::<f64>() > 1e-6)
    }

    fn normalize(w: &[f64]) -> Vec<f64> {
        let s: f64 = w.iter().sum();
        w.iter().map(|x| x / s).collect()
    }

    proptest! {
        #[test]
        fn duality_holds(w in weights(), pick in 0usize..64, q in 0.0f64..1.0) {
            let d = FullDistribution::new(normalize(&w)).unwrap();
            let member = d.probs()[pick % d.len()];
            for p in [member, q] {
                let xi = oddballness(&d, p, GFunction::Identity).unwrap();
                let pi = prob_of_prob(&d, p).unwrap();
                prop_assert!((xi + pi - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn monotone_in_probability(w in weights(), g in prop::sample::select(GFunction::ALL.to_vec())) {
            let d = FullDistribution::new(normalize(&w)).unwrap();
            let scores: Vec<f64> = d.probs().iter().map(|&p| oddballness(&d, p, g).unwrap()).collect();
            // probs are descending, so scores must be ascending
            prop_assert!(scores.windows(2).all(|s| s[0] <= s[1]));
            prop_assert!(scores.iter().all(|s| (0.0..=1.0).contains(s)));
            prop_assert_eq!(scores[0], 0.0);
        }
    }
}
