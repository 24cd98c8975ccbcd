use super::{unit, GFunction, MeasureError, TruncatedDistribution};

/// Interval guaranteed to contain the oddballness of the full distribution
/// behind a truncated one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OddballnessBounds {
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
}

impl OddballnessBounds {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, xi: f64, tol: f64) -> bool {
        xi >= self.lower - tol && xi <= self.upper + tol
    }
}

fn check_query(p: f64) -> Result<(), MeasureError> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(MeasureError::InvalidInput(format!(
            "query probability outside [0, 1]: {p}"
        )));
    }
    Ok(())
}

/// Worst case of `sum h(x_j)` over unstored outcomes `x_j <= cap` with
/// `sum x_j = mass`, for convex `h` with `h(0) = 0`: as many outcomes as
/// possible sit at `cap` and one takes the remainder.
fn packed(mass: f64, cap: f64, h: impl Fn(f64) -> f64) -> f64 {
    let full = (mass / cap).floor();
    let rest = (mass - full * cap).max(0.0);
    full * h(cap) + h(rest)
}

/// Bounds the oddballness of `p` when only the top of the distribution is
/// known.
///
/// The stored part is scored exactly and gives the lower bound. The unstored
/// outcomes can only add to the numerator when `p` is below the smallest
/// stored probability; the upper bound packs the residual mass into outcomes
/// of the largest admissible size. The result is exact when `p` is at least
/// the smallest stored probability (for the identity `g`; other kinds also
/// need a zero residual since their denominator depends on the unstored
/// shape).
pub fn oddballness_bounds(
    dist: &TruncatedDistribution,
    p: f64,
    g: GFunction,
) -> Result<OddballnessBounds, MeasureError> {
    check_query(p)?;
    let total = dist.total();
    let q = p / total;
    let residual = dist.residual() / total;
    let last = dist.smallest() / total;
    let covered = q >= last;
    let above = dist.top().iter().map(|&t| t / total).take_while(|&t| t > q);

    if g == GFunction::Identity {
        let lower: f64 = unit(above.map(|t| t - q).sum::<f64>());
        if covered {
            return Ok(OddballnessBounds {
                lower,
                upper: lower,
                exact: true,
            });
        }
        let extra = packed(residual, last, |x| (x - q).max(0.0));
        let upper = (lower + extra).clamp(lower, 1.0);
        return Ok(OddballnessBounds {
            lower,
            upper,
            exact: false,
        });
    }

    let num: f64 = above.map(|t| g.apply(t - q)).sum();
    let den: f64 = dist.top().iter().map(|&t| g.apply(t / total)).sum();
    if residual == 0.0 {
        let xi = unit(num / den);
        return Ok(OddballnessBounds {
            lower: xi,
            upper: xi,
            exact: covered,
        });
    }
    let den_max = den + packed(residual, last, |x| g.apply(x));
    let num_max = if covered {
        num
    } else {
        num + packed(residual, last, |x| g.apply((x - q).max(0.0)))
    };
    let lower = unit(num / den_max);
    let upper = (num_max / den).clamp(lower, 1.0);
    Ok(OddballnessBounds {
        lower,
        upper,
        exact: false,
    })
}

/// 1-based rank of an outcome among the stored candidates.
///
/// `BeyondK` orders after every position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rank {
    Position(usize),
    BeyondK,
}

impl Rank {
    /// Rank as an anomaly score; `BeyondK` maps to infinity.
    pub fn as_score(self) -> f64 {
        match self {
            Rank::Position(r) => r as f64,
            Rank::BeyondK => f64::INFINITY,
        }
    }
}

/// Rank of `p` among the stored probabilities, counting only strictly more
/// likely candidates, so ties with the `K`-th candidate stay within the top
/// `K`.
pub fn rank_of(dist: &TruncatedDistribution, p: f64) -> Result<Rank, MeasureError> {
    check_query(p)?;
    if p < dist.smallest() {
        return Ok(Rank::BeyondK);
    }
    Ok(Rank::Position(1 + dist.top().partition_point(|&t| t > p)))
}
