use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Weighting function applied to probability gaps before they are summed.
///
/// Every shipped kind is continuous, nondecreasing and convex on `[0, 1]` with
/// `g(0) = 0` and `g(1) = 1`. Convexity is what the truncation bounds in
/// [`oddballness_bounds`](super::oddballness_bounds) rely on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GFunction {
    #[default]
    Identity,
    Square,
    Cube,
}

impl GFunction {
    pub const ALL: [GFunction; 3] = [GFunction::Identity, GFunction::Square, GFunction::Cube];

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            GFunction::Identity => x,
            GFunction::Square => x * x,
            GFunction::Cube => x * x * x,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GFunction::Identity => "identity",
            GFunction::Square => "square",
            GFunction::Cube => "cube",
        }
    }
}

impl fmt::Display for GFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GFunction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" | "id" | "x" => Ok(GFunction::Identity),
            "square" | "x2" | "x^2" => Ok(GFunction::Square),
            "cube" | "x3" | "x^3" => Ok(GFunction::Cube),
            other => Err(format!(
                "unknown g function `{other}` (expected identity, square or cube)"
            )),
        }
    }
}
