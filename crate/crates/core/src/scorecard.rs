//! Linear point scorecards with ordered category thresholds.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{input, Result};
use crate::numeric::dot;

/// How a score is compared with a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Crossing {
    /// Threshold `k` is crossed iff `score >= tau[k]`.
    #[default]
    #[serde(rename = "ge")]
    AtOrAbove,
}

/// Weights `beta` and strictly increasing thresholds `tau` (length `K - 1`).
///
/// A score `s` lands in category `k` iff `tau[k-2] <= s < tau[k-1]`, with the
/// implicit outer thresholds at minus and plus infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scorecard {
    pub beta: Vec<f64>,
    pub tau: Vec<f64>,
    #[serde(default)]
    pub crossing: Crossing,
}

impl Scorecard {
    pub fn new(beta: Vec<f64>, tau: Vec<f64>) -> Result<Self> {
        if tau.is_empty() {
            return input("a scorecard needs at least one threshold");
        }
        if beta.iter().chain(&tau).any(|v| !v.is_finite()) {
            return input("scorecard entries must be finite");
        }
        if tau.windows(2).any(|w| w[0] >= w[1]) {
            return input(format!("thresholds must be strictly increasing: {tau:?}"));
        }
        Ok(Scorecard { beta, tau, crossing: Crossing::AtOrAbove })
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn num_categories(&self) -> usize {
        self.tau.len() + 1
    }

    pub fn is_integer(&self) -> bool {
        self.beta.iter().all(|b| b.fract() == 0.0)
    }

    /// `beta . x`.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.beta.len() {
            return input(format!("feature vector has length {}, scorecard expects {}", x.len(), self.beta.len()));
        }
        Ok(dot(&self.beta, x))
    }

    /// Category (1-based) of a raw score.
    pub fn category_of_score(&self, s: f64) -> usize {
        1 + self.tau.partition_point(|&t| t <= s)
    }

    pub fn categorize(&self, x: &[f64]) -> Result<usize> {
        Ok(self.category_of_score(self.score(x)?))
    }

    pub fn scores(&self, d: &Dataset) -> Result<Vec<f64>> {
        d.instances.iter().map(|inst| self.score(&inst.features)).collect()
    }

    pub fn categories(&self, d: &Dataset) -> Result<Vec<usize>> {
        d.instances.iter().map(|inst| self.categorize(&inst.features)).collect()
    }

    /// Joint positive rescaling; categorization is unchanged.
    pub fn scaled(&self, c: f64) -> Scorecard {
        assert!(c > 0.0);
        Scorecard {
            beta: self.beta.iter().map(|b| b * c).collect(),
            tau: self.tau.iter().map(|t| t * c).collect(),
            crossing: self.crossing,
        }
    }
}

/// Free-function form of [`Scorecard::score`].
pub fn score(card: &Scorecard, x: &[f64]) -> Result<f64> {
    card.score(x)
}

/// Free-function form of [`Scorecard::categorize`].
pub fn categorize(card: &Scorecard, x: &[f64]) -> Result<usize> {
    card.categorize(x)
}
