//! Evaluation metrics and distribution diagnostics for scorecards.
//!
//! Binary metrics treat the highest category as positive and the lowest as
//! negative; only instances labelled with exactly one of those two categories
//! are admissible. Metrics with an empty denominator are returned as `None`.

mod report;

pub use report::{
    categorization_table, metrics_report, score_differentials, standard_cohorts, write_curve_csv, CategorizationRow,
    CategorizationTable, DifferentialSummary, Histogram, MetricsReport,
};

use serde::Serialize;

use crate::dataset::{Dataset, FeasibleSet};
use crate::error::{input, Result};
use crate::scorecard::Scorecard;

/// Scores and binary truth (`true` = highest category) of a two-class labelled dataset.
pub fn binary_labels(card: &Scorecard, d: &Dataset) -> Result<(Vec<f64>, Vec<bool>)> {
    let k = d.num_categories;
    let (low, high) = (FeasibleSet::singleton(1), FeasibleSet::singleton(k));
    let mut scores = Vec::with_capacity(d.len());
    let mut labels = Vec::with_capacity(d.len());
    for (row, inst) in d.instances.iter().enumerate() {
        let positive = if inst.feasible == high {
            true
        } else if inst.feasible == low {
            false
        } else {
            return input(format!("row {row} has feasible set {} but evaluation needs {{1}} or {{{k}}}", inst.feasible));
        };
        scores.push(card.score(&inst.features)?);
        labels.push(positive);
    }
    Ok((scores, labels))
}

/// Fraction predicted exactly right, and fraction right when any middle
/// category also counts as correct.
pub fn tight_loose_accuracy(card: &Scorecard, d: &Dataset) -> Result<(f64, f64)> {
    let (_, labels) = binary_labels(card, d)?;
    if labels.is_empty() {
        return input("accuracy of an empty dataset");
    }
    let k = d.num_categories;
    let (mut tight, mut loose) = (0usize, 0usize);
    for (inst, &positive) in d.instances.iter().zip(&labels) {
        let truth = if positive { k } else { 1 };
        let pred = card.categorize(&inst.features)?;
        if pred == truth {
            tight += 1;
            loose += 1;
        } else if pred > 1 && pred < k {
            loose += 1;
        }
    }
    let n = labels.len() as f64;
    Ok((tight as f64 / n, loose as f64 / n))
}

/// Precision and recall of predicting the highest category.
pub fn high_risk_pr(card: &Scorecard, d: &Dataset) -> Result<(Option<f64>, Option<f64>)> {
    let (_, labels) = binary_labels(card, d)?;
    let k = d.num_categories;
    let (mut tp, mut fp, mut pos) = (0usize, 0usize, 0usize);
    for (inst, &positive) in d.instances.iter().zip(&labels) {
        let predicted = card.categorize(&inst.features)? == k;
        pos += positive as usize;
        match (predicted, positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            _ => {}
        }
    }
    let precision = (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64);
    let recall = (pos > 0).then(|| tp as f64 / pos as f64);
    Ok((precision, recall))
}

/// Groups of tied scores in ascending order: `(score, positives, negatives)`.
fn tie_groups(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, u64, u64)>> {
    if scores.len() != labels.len() {
        return input(format!("{} scores but {} labels", scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return input("scores must not be NaN");
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut groups: Vec<(f64, u64, u64)> = Vec::new();
    for i in order {
        let (s, pos) = (scores[i], labels[i]);
        match groups.last_mut() {
            Some(g) if g.0 == s => {
                if pos {
                    g.1 += 1
                } else {
                    g.2 += 1
                }
            }
            _ => groups.push((s, pos as u64, (!pos) as u64)),
        }
    }
    Ok(groups)
}

/// `P(score+ > score-) + P(score+ == score-) / 2`, or `None` for a single class.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<Option<f64>> {
    let groups = tie_groups(scores, labels)?;
    let (pos, neg): (u64, u64) = groups.iter().fold((0, 0), |(p, n), g| (p + g.1, n + g.2));
    if pos == 0 || neg == 0 {
        return Ok(None);
    }
    // twice the Mann-Whitney count stays integral
    let mut twice_u: u64 = 0;
    let mut neg_below: u64 = 0;
    for &(_, p, n) in &groups {
        twice_u += 2 * p * neg_below + p * n;
        neg_below += n;
    }
    Ok(Some(twice_u as f64 / 2.0 / (pos as f64 * neg as f64)))
}

/// Step-interpolated area under the precision-recall curve, sweeping tied
/// groups from the highest score down. `None` without positives.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<Option<f64>> {
    let groups = tie_groups(scores, labels)?;
    let pos: u64 = groups.iter().map(|g| g.1).sum();
    if pos == 0 {
        return Ok(None);
    }
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut area = 0.0;
    for &(_, p, n) in groups.iter().rev() {
        tp += p;
        fp += n;
        if p > 0 {
            area += p as f64 / pos as f64 * (tp as f64 / (tp + fp) as f64);
        }
    }
    Ok(Some(area))
}

/// A point of an ROC or precision-recall curve at cutoff `score >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub true_positives: u64,
    pub false_positives: u64,
    pub fpr: Option<f64>,
    pub recall: Option<f64>,
    pub precision: f64,
}

/// Curve points for every distinct score, from the highest cutoff down.
pub fn curve_points(scores: &[f64], labels: &[bool]) -> Result<Vec<CurvePoint>> {
    let groups = tie_groups(scores, labels)?;
    let (pos, neg): (u64, u64) = groups.iter().fold((0, 0), |(p, n), g| (p + g.1, n + g.2));
    let (mut tp, mut fp) = (0u64, 0u64);
    Ok(groups
        .iter()
        .rev()
        .map(|&(s, p, n)| {
            tp += p;
            fp += n;
            CurvePoint {
                threshold: s,
                true_positives: tp,
                false_positives: fp,
                fpr: (neg > 0).then(|| fp as f64 / neg as f64),
                recall: (pos > 0).then(|| tp as f64 / pos as f64),
                precision: tp as f64 / (tp + fp) as f64,
            }
        })
        .collect())
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Largest gap between the empirical CDFs over the pooled sample.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return input("KS test needs two non-empty samples");
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return input("KS samples must not contain NaN");
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as u64, b.len() as u64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut widest: u64 = 0;
    while i < a.len() || j < b.len() {
        let v = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        widest = widest.max((i as u64 * nb).abs_diff(j as u64 * na));
    }
    let statistic = widest as f64 / (na as f64 * nb as f64);
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * statistic;
    Ok(KsResult { statistic, p_value: kolmogorov_q(lambda) })
}

/// Kolmogorov survival function `Q(x) = 2 sum_{j>=1} (-1)^(j-1) exp(-2 j^2 x^2)`.
pub fn kolmogorov_q(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let q = if x < 1.18 {
        // Jacobi-transformed series, fast for small arguments
        let t = std::f64::consts::PI.powi(2) / (8.0 * x * x);
        let s: f64 = (1..=20).map(|j| (-((2 * j - 1) as f64).powi(2) * t).exp()).sum();
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s
    } else {
        let s: f64 = (1..=100)
            .map(|j| {
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (j * j) as f64 * x * x).exp()
            })
            .sum();
        2.0 * s
    };
    q.clamp(0.0, 1.0)
}
