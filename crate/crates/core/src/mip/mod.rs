//! Exact integer scorecard optimization.
//!
//! Given weights and thresholds, the threshold-crossing indicators and the
//! category assignment of every instance are fully determined, so the mixed
//! integer program reduces to a search over integer weights (and, in free
//! mode, a grid of thresholds). [`solve_exact`] explores that space by
//! branch-and-bound with interval bounds on every instance's score;
//! [`brute_force_oracle`] enumerates it exhaustively for verification.

mod check;
mod oracle;
mod presets;
mod search;
mod two_phase;

pub use check::{check_feasible, ConstraintCheck, ConstraintReport};
pub use oracle::{brute_force_oracle, ORACLE_LIMIT};
pub use presets::{variant_preset, Variant};
pub use search::solve_exact;
pub use two_phase::{fit_two_phase, TwoPhaseResult, WarmSource};

use serde::{Deserialize, Serialize};

use crate::cso::{EditCaps, WeightConstraints};
use crate::dataset::{Dataset, FeasibleSet};
use crate::error::{config, input, Result};
use crate::loss::LossParams;
use crate::scorecard::Scorecard;

/// How thresholds enter the program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThresholdMode {
    Fixed { tau: Vec<f64> },
    /// Thresholds searched on the half-integer grid inside `[lower, upper]`.
    Free { min_gap: f64, total_gap: f64, lower: f64, upper: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BigMPolicy {
    #[default]
    Auto,
    Explicit(f64),
}

/// Incumbent-anchored weights: optional hard caps and an optional L1 penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimalEdit {
    pub reference: Vec<f64>,
    #[serde(default)]
    pub max_change: Option<Vec<f64>>,
    /// Coefficient of `sum_j |beta_j - reference_j|` added to the objective.
    #[serde(default)]
    pub penalty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapBound {
    MaxCount(f64),
    MaxRate(f64),
    MinRate(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CapReference {
    #[default]
    Absolute,
    /// The bound is relative to what this scorecard achieves on the same data;
    /// the configured value is added as slack.
    Incumbent(Scorecard),
}

/// Limit on how many instances labelled `truth` may be predicted as `predicted`.
///
/// The cohort is the set of instances whose feasible set is exactly `{truth}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerformanceCap {
    pub truth: usize,
    pub predicted: usize,
    pub bound: CapBound,
    #[serde(default)]
    pub reference: CapReference,
}

/// Count interval a cap allows, resolved against a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapLimit {
    pub min_count: f64,
    pub max_count: f64,
    pub cohort_size: usize,
}

impl PerformanceCap {
    pub fn cohort(&self, d: &Dataset) -> Vec<usize> {
        let label = FeasibleSet::singleton(self.truth);
        (0..d.len()).filter(|&i| d.instances[i].feasible == label).collect()
    }

    /// Count of cohort members `card` places in `predicted`.
    pub fn count(&self, card: &Scorecard, d: &Dataset) -> Result<usize> {
        let mut n = 0;
        for i in self.cohort(d) {
            if card.categorize(&d.instances[i].features)? == self.predicted {
                n += 1;
            }
        }
        Ok(n)
    }

    pub fn resolve(&self, d: &Dataset) -> Result<CapLimit> {
        let k = d.num_categories;
        if !(1..=k).contains(&self.truth) || !(1..=k).contains(&self.predicted) {
            return config(format!("cap categories ({}, {}) outside 1..={k}", self.truth, self.predicted));
        }
        let size = self.cohort(d).len();
        let n = size as f64;
        let base = match &self.reference {
            CapReference::Absolute => None,
            CapReference::Incumbent(card) => Some(self.count(card, d)? as f64),
        };
        let slack = 1e-9;
        let limit = match (self.bound, base) {
            (CapBound::MaxCount(c), None) => CapLimit { min_count: 0.0, max_count: c + slack, cohort_size: size },
            (CapBound::MaxCount(c), Some(b)) => CapLimit { min_count: 0.0, max_count: b + c + slack, cohort_size: size },
            (CapBound::MaxRate(r), None) => CapLimit { min_count: 0.0, max_count: r * n + slack, cohort_size: size },
            (CapBound::MaxRate(r), Some(b)) => CapLimit { min_count: 0.0, max_count: b + r * n + slack, cohort_size: size },
            (CapBound::MinRate(r), None) => CapLimit { min_count: r * n - slack, max_count: f64::INFINITY, cohort_size: size },
            (CapBound::MinRate(r), Some(b)) => {
                CapLimit { min_count: b - r * n - slack, max_count: f64::INFINITY, cohort_size: size }
            }
        };
        Ok(limit)
    }

    fn check(&self) -> Result<()> {
        match self.bound {
            CapBound::MaxCount(c) if !(c >= 0.0) => config("max_count must be non-negative"),
            CapBound::MaxRate(r) | CapBound::MinRate(r) if !(0.0..=1.0).contains(&r) => {
                config(format!("rate bound {r} outside [0, 1]"))
            }
            _ => Ok(()),
        }
    }
}

/// Node and wall-clock limits for [`solve_exact`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    pub node_limit: Option<u64>,
    pub time_limit_ms: Option<u64>,
}

/// The full constraint catalog of the integer program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MipConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integer_weights: bool,
    #[serde(default)]
    pub risk: Vec<usize>,
    #[serde(default)]
    pub protective: Vec<usize>,
    /// Added to the dataset's own monotone pairs.
    #[serde(default)]
    pub monotone_pairs: Vec<(usize, usize)>,
    #[serde(default)]
    pub sparsity: Option<usize>,
    #[serde(default)]
    pub minimal_edit: Option<MinimalEdit>,
    #[serde(default)]
    pub groups: Vec<(usize, usize)>,
    pub thresholds: ThresholdMode,
    pub epsilon: f64,
    /// Reject solutions with a training score strictly within `epsilon` of a threshold.
    #[serde(default)]
    pub enforce_margin: bool,
    #[serde(default)]
    pub big_m: BigMPolicy,
    #[serde(default)]
    pub caps: Vec<PerformanceCap>,
    pub loss: LossParams,
    #[serde(default)]
    pub budget: Budget,
    /// Restrict each weight to `warm_j +- radius` when a warm start is given.
    #[serde(default)]
    pub trust_radius: Option<f64>,
}

impl MipConfig {
    /// Integer weights in `[lo, hi]`, fixed thresholds, margin 0.5, no extra constraints.
    pub fn new(p: usize, lo: f64, hi: f64, tau: Vec<f64>, loss: LossParams) -> Self {
        MipConfig {
            lower: vec![lo; p],
            upper: vec![hi; p],
            integer_weights: true,
            risk: Vec::new(),
            protective: Vec::new(),
            monotone_pairs: Vec::new(),
            sparsity: None,
            minimal_edit: None,
            groups: Vec::new(),
            thresholds: ThresholdMode::Fixed { tau },
            epsilon: 0.5,
            enforce_margin: false,
            big_m: BigMPolicy::Auto,
            caps: Vec::new(),
            loss,
            budget: Budget::default(),
            trust_radius: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn num_thresholds(&self) -> Option<usize> {
        match &self.thresholds {
            ThresholdMode::Fixed { tau } => Some(tau.len()),
            ThresholdMode::Free { .. } => None,
        }
    }

    /// Config monotone pairs merged with the dataset's.
    pub fn effective_pairs(&self, d: &Dataset) -> Vec<(usize, usize)> {
        let mut pairs = self.monotone_pairs.clone();
        for p in &d.monotone_pairs {
            if !pairs.contains(p) {
                pairs.push(*p);
            }
        }
        pairs
    }

    /// The convex part of the constraint catalog, as used by the relaxation.
    pub fn weight_constraints(&self, d: &Dataset) -> WeightConstraints {
        WeightConstraints {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            risk: self.risk.clone(),
            protective: self.protective.clone(),
            monotone_pairs: self.effective_pairs(d),
            groups: self.groups.clone(),
            minimal_edit: self.minimal_edit.as_ref().and_then(|m| {
                m.max_change.as_ref().map(|caps| EditCaps { reference: m.reference.clone(), max_change: caps.clone() })
            }),
        }
    }

    /// Soft minimal-edit penalty of `beta`.
    pub fn penalty(&self, beta: &[f64]) -> f64 {
        match &self.minimal_edit {
            Some(m) if m.penalty > 0.0 => {
                m.penalty * beta.iter().zip(&m.reference).map(|(b, r)| (b - r).abs()).sum::<f64>()
            }
            _ => 0.0,
        }
    }

    /// Empirical risk plus soft penalties.
    pub fn objective(&self, card: &Scorecard, d: &Dataset) -> Result<f64> {
        Ok(crate::loss::empirical_risk(card, d, &self.loss)? + self.penalty(&card.beta))
    }

    pub fn validate(&self, d: &Dataset) -> Result<()> {
        let p = d.dim();
        if self.lower.len() != p || self.upper.len() != p {
            return config(format!("weight bounds have length {}, dataset dimension is {p}", self.lower.len()));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, h)| l > h || l.is_nan() || h.is_nan()) {
            return config("every weight needs lower <= upper");
        }
        if !(self.epsilon > 0.0) {
            return config("margin epsilon must be positive");
        }
        if let Some(s) = self.sparsity {
            if s > p {
                return config(format!("sparsity limit {s} exceeds dimension {p}"));
            }
        }
        if let Some(m) = &self.minimal_edit {
            if m.reference.len() != p || m.max_change.as_ref().is_some_and(|c| c.len() != p) {
                return config("minimal-edit vectors must match the dimension");
            }
            if !(m.penalty >= 0.0) {
                return config("minimal-edit penalty must be non-negative");
            }
        }
        if let Some(r) = self.trust_radius {
            if !(r >= 0.0) {
                return config("trust radius must be non-negative");
            }
        }
        let k = d.num_categories;
        match &self.thresholds {
            ThresholdMode::Fixed { tau } => {
                if tau.len() + 1 != k {
                    return config(format!("{} fixed thresholds for {k} categories", tau.len()));
                }
                if tau.windows(2).any(|w| w[0] >= w[1]) {
                    return config("fixed thresholds must be strictly increasing");
                }
            }
            ThresholdMode::Free { min_gap, total_gap, lower, upper } => {
                if !(*min_gap > 0.0) || !(*total_gap >= 0.0) {
                    return config("free thresholds need min_gap > 0 and total_gap >= 0");
                }
                if !(lower.is_finite() && upper.is_finite() && lower <= upper) {
                    return config("free thresholds need finite bounds lower <= upper");
                }
            }
        }
        for cap in &self.caps {
            cap.check()?;
            if let CapReference::Incumbent(card) = &cap.reference {
                if card.dim() != p || card.num_categories() != k {
                    return config("incumbent scorecard shape does not match the dataset");
                }
            }
            cap.resolve(d)?;
        }
        self.loss.check()?;
        let indices = self.risk.iter().chain(&self.protective).copied();
        let pairs = self.monotone_pairs.iter().chain(&self.groups).flat_map(|&(a, b)| [a, b]);
        if let Some(j) = indices.chain(pairs).find(|&j| j >= p) {
            return config(format!("constraint index {j} out of range for {p} weights"));
        }
        Ok(())
    }

    /// Candidate threshold vectors, in ascending lexicographic order.
    pub fn threshold_candidates(&self, k: usize) -> Vec<Vec<f64>> {
        match &self.thresholds {
            ThresholdMode::Fixed { tau } => vec![tau.clone()],
            ThresholdMode::Free { min_gap, total_gap, lower, upper } => {
                let first = (lower - 0.5).ceil() as i64;
                let last = (upper - 0.5).floor() as i64;
                let grid: Vec<f64> = (first..=last).map(|m| m as f64 + 0.5).collect();
                let mut out = Vec::new();
                let mut cur = Vec::with_capacity(k - 1);
                enumerate_tuples(&grid, k - 1, *min_gap, *total_gap, &mut cur, &mut out);
                out
            }
        }
    }
}

fn enumerate_tuples(grid: &[f64], len: usize, gap: f64, span: f64, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
    if cur.len() == len {
        if len < 2 || cur[len - 1] - cur[0] >= span - 1e-12 {
            out.push(cur.clone());
        }
        return;
    }
    for &g in grid {
        if let Some(&prev) = cur.last() {
            if g - prev < gap - 1e-12 {
                continue;
            }
        }
        cur.push(g);
        enumerate_tuples(grid, len, gap, span, cur, out);
        cur.pop();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    ProvenOptimal,
    FeasibleHeuristic,
    Infeasible,
    BudgetExhausted,
}

/// Outcome of an exact or heuristic solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub scorecard: Option<Scorecard>,
    pub objective: f64,
    pub status: Status,
    /// Incumbent objective minus the best proven lower bound.
    pub gap: f64,
    pub nodes_explored: u64,
    pub wall_ms: u64,
    /// Why no solution exists, when `status` is infeasible.
    pub diagnostic: Option<String>,
}

/// JSON run summary written next to fitted models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub status: Status,
    pub objective: Option<f64>,
    pub gap: f64,
    pub nodes: u64,
    /// Omitted (null) unless timing is requested, so summaries stay reproducible.
    pub wall_ms: Option<u64>,
    pub config_digest: String,
}

impl Solution {
    pub fn summary(&self, config_digest: &str, with_timing: bool) -> SolverSummary {
        SolverSummary {
            status: self.status,
            objective: self.scorecard.as_ref().map(|_| self.objective),
            gap: self.gap,
            nodes: self.nodes_explored,
            wall_ms: with_timing.then_some(self.wall_ms),
            config_digest: config_digest.to_string(),
        }
    }
}

/// `2 * max_i ||x_i|| * b_beta + b_tau`.
pub fn compute_big_m(d: &Dataset, b_beta: f64, b_tau: f64) -> Result<f64> {
    if d.is_empty() {
        return input("big-M needs at least one instance");
    }
    if !(b_beta > 0.0 && b_tau > 0.0) {
        return input("big-M bounds must be positive");
    }
    let max_norm = d
        .instances
        .iter()
        .map(|i| i.features.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    Ok(2.0 * max_norm * b_beta + b_tau)
}

/// Big-M implied by a config's weight and threshold bounds.
pub fn config_big_m(cfg: &MipConfig, d: &Dataset) -> Result<f64> {
    match cfg.big_m {
        BigMPolicy::Explicit(m) => Ok(m),
        BigMPolicy::Auto => {
            let b_beta = cfg
                .lower
                .iter()
                .zip(&cfg.upper)
                .map(|(l, h)| l.abs().max(h.abs()).powi(2))
                .sum::<f64>()
                .sqrt()
                .max(f64::MIN_POSITIVE);
            let b_tau = match &cfg.thresholds {
                ThresholdMode::Fixed { tau } => tau.iter().fold(0.0f64, |a, t| a.max(t.abs())),
                ThresholdMode::Free { lower, upper, .. } => lower.abs().max(upper.abs()),
            }
            .max(f64::MIN_POSITIVE);
            compute_big_m(d, b_beta, b_tau)
        }
    }
}

/// Weighted assignment cost `w_i * c(k, S_i)` for every instance and category.
pub(crate) fn costs(cfg: &MipConfig, d: &Dataset) -> Vec<Vec<f64>> {
    crate::loss::cost_table(d, &cfg.loss)
}
