//! Asymmetric distance-aware ordinal loss and the empirical risk of a scorecard.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeasibleSet};
use crate::error::{input, Result};
use crate::numeric::KahanSum;
use crate::scorecard::Scorecard;

/// Under/over-triage weights and the distance exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossParams {
    pub alpha_under: f64,
    pub alpha_over: f64,
    #[serde(default = "default_q")]
    pub q: f64,
}

fn default_q() -> f64 {
    1.0
}

impl Default for LossParams {
    /// Under-triage three times as costly as over-triage, linear in distance.
    fn default() -> Self {
        LossParams { alpha_under: 3.0, alpha_over: 1.0, q: 1.0 }
    }
}

impl LossParams {
    pub fn new(alpha_under: f64, alpha_over: f64, q: f64) -> Result<Self> {
        let p = LossParams { alpha_under, alpha_over, q };
        p.check()?;
        Ok(p)
    }

    pub fn symmetric() -> Self {
        LossParams { alpha_under: 1.0, alpha_over: 1.0, q: 1.0 }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.alpha_under > 0.0 && self.alpha_over > 0.0 && self.alpha_under.is_finite() && self.alpha_over.is_finite()) {
            return input(format!("alpha_under/alpha_over must be positive: {self:?}"));
        }
        if !(self.q >= 1.0 && self.q.is_finite()) {
            return input(format!("exponent q must be >= 1, got {}", self.q));
        }
        Ok(())
    }

    /// Loss of predicting `k` when the truth is `k_star`; no range checks.
    #[inline]
    pub fn loss_unchecked(&self, k: usize, k_star: usize) -> f64 {
        use std::cmp::Ordering::*;
        match k.cmp(&k_star) {
            Equal => 0.0,
            Less => self.alpha_under * ((k_star - k) as f64).powf(self.q),
            Greater => self.alpha_over * ((k - k_star) as f64).powf(self.q),
        }
    }

    /// Distance from `k` to the closest member of `set`; no range checks.
    #[inline]
    pub fn feasible_cost_unchecked(&self, k: usize, set: FeasibleSet) -> f64 {
        set.iter().map(|ks| self.loss_unchecked(k, ks)).fold(f64::INFINITY, f64::min)
    }
}

/// `k < k_star` is under-triage and weighs `alpha_under`; `k > k_star` weighs `alpha_over`.
pub fn ordinal_loss(k: usize, k_star: usize, num_categories: usize, p: &LossParams) -> Result<f64> {
    for c in [k, k_star] {
        if c == 0 || c > num_categories {
            return input(format!("category {c} outside 1..={num_categories}"));
        }
    }
    Ok(p.loss_unchecked(k, k_star))
}

/// Cost of predicting `k` against the closest feasible category.
pub fn feasible_cost(k: usize, set: FeasibleSet, num_categories: usize, p: &LossParams) -> Result<f64> {
    if set.is_empty() {
        return input("feasible set is empty");
    }
    if k == 0 || k > num_categories || set.max().unwrap() > num_categories {
        return input(format!("categories must lie in 1..={num_categories}"));
    }
    Ok(p.feasible_cost_unchecked(k, set))
}

/// `cost[i][k-1]`: weighted cost of placing instance `i` in category `k`.
pub fn cost_table(d: &Dataset, p: &LossParams) -> Vec<Vec<f64>> {
    d.instances
        .iter()
        .map(|inst| (1..=d.num_categories).map(|k| inst.weight * p.feasible_cost_unchecked(k, inst.feasible)).collect())
        .collect()
}

/// `sum_i w_i * c(categorize(x_i), S_i)`.
pub fn empirical_risk(card: &Scorecard, d: &Dataset, p: &LossParams) -> Result<f64> {
    p.check()?;
    if card.num_categories() != d.num_categories {
        return input(format!(
            "scorecard has {} categories, dataset {}",
            card.num_categories(),
            d.num_categories
        ));
    }
    let mut acc = KahanSum::new();
    for inst in &d.instances {
        let k = card.categorize(&inst.features)?;
        acc.add(inst.weight * feasible_cost(k, inst.feasible, d.num_categories, p)?);
    }
    Ok(acc.total())
}
