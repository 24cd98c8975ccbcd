use super::MeasureError;

/// Accepted deviation of the total mass from 1 before renormalization.
pub const TAU_NORM: f64 = 1e-3;

fn check_probability(value: f64, what: &str) -> Result<(), MeasureError> {
    if !value.is_finite() {
        return Err(MeasureError::InvalidInput(format!(
            "{what} is not finite: {value}"
        )));
    }
    if !(0.0..=1.0).contains(&value) {
        return Err(MeasureError::InvalidInput(format!(
            "{what} outside [0, 1]: {value}"
        )));
    }
    Ok(())
}

fn check_total(total: f64) -> Result<(), MeasureError> {
    if (total - 1.0).abs() > TAU_NORM {
        return Err(MeasureError::Normalization { sum: total });
    }
    Ok(())
}

/// A complete discrete distribution, sorted descending.
///
/// Probabilities are kept as given; scoring divides every probability and the
/// query by their total, which renormalizes without perturbing comparisons
/// between a query and the members it was taken from.
#[derive(Debug, Clone, PartialEq)]
pub struct FullDistribution {
    probs: Vec<f64>,
    total: f64,
}

impl FullDistribution {
    pub fn new(probs: impl Into<Vec<f64>>) -> Result<Self, MeasureError> {
        let mut probs = probs.into();
        if probs.is_empty() {
            return Err(MeasureError::Empty);
        }
        for (i, &p) in probs.iter().enumerate() {
            check_probability(p, &format!("probability at index {i}"))?;
        }
        let total: f64 = probs.iter().sum();
        check_total(total)?;
        // stable: equal values keep input order
        probs.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { probs, total })
    }

    /// Probabilities as given, descending.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.probs[0]
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub(crate) fn check_query(p: f64) -> Result<(), MeasureError> {
        check_probability(p, "query probability")
    }
}

/// The `K` most likely outcomes of a distribution plus the mass of the rest.
///
/// Every outcome that was not stored is assumed to be no more likely than the
/// smallest stored one.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedDistribution {
    top: Vec<f64>,
    residual: f64,
}

impl TruncatedDistribution {
    pub fn new(top: impl Into<Vec<f64>>, residual: f64) -> Result<Self, MeasureError> {
        let top = top.into();
        if top.is_empty() {
            return Err(MeasureError::Empty);
        }
        for (i, &p) in top.iter().enumerate() {
            check_probability(p, &format!("top probability at index {i}"))?;
        }
        check_probability(residual, "residual")?;
        if let Some(i) = top.windows(2).position(|w| w[1] > w[0]) {
            return Err(MeasureError::NotDescending { index: i + 1 });
        }
        if top[top.len() - 1] == 0.0 && residual > 0.0 {
            return Err(MeasureError::InvalidTruncation { residual });
        }
        check_total(top.iter().sum::<f64>() + residual)?;
        Ok(Self { top, residual })
    }

    /// Keeps the `k` largest probabilities of `full` (at least one, at most all).
    pub fn from_full(full: &FullDistribution, k: usize) -> Self {
        let k = k.clamp(1, full.len());
        let scale = full.total();
        let top = full.probs()[..k].iter().map(|p| p / scale).collect();
        let residual: f64 = full.probs()[k..].iter().map(|p| p / scale).sum();
        Self {
            top,
            residual: super::unit(residual),
        }
    }

    pub fn top(&self) -> &[f64] {
        &self.top
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn depth(&self) -> usize {
        self.top.len()
    }

    /// Smallest stored probability; an upper bound on every unstored outcome.
    pub fn smallest(&self) -> f64 {
        self.top[self.top.len() - 1]
    }

    pub fn total(&self) -> f64 {
        self.top.iter().sum::<f64>() + self.residual
    }

    /// The stored outcomes as a full distribution, when nothing was cut off.
    pub fn to_full(&self) -> Option<FullDistribution> {
        if self.residual == 0.0 {
            FullDistribution::new(self.top.clone()).ok()
        } else {
            None
        }
    }
}
