use serde::Serialize;

use super::{config_big_m, MipConfig, ThresholdMode};
use crate::cso::thresholds_feasible;
use crate::dataset::Dataset;
use crate::error::{input, Result};
use crate::scorecard::Scorecard;

const TOL: f64 = 1e-9;

/// Outcome of one constraint family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub name: String,
    pub passed: bool,
    /// Number of violated rows.
    pub violations: usize,
    /// Unenforced checks are reported but do not affect [`ConstraintReport::all_pass`].
    pub enforced: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub checks: Vec<ConstraintCheck>,
}

impl ConstraintReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.enforced)
    }

    pub fn get(&self, name: &str) -> Option<&ConstraintCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&ConstraintCheck> {
        self.checks.iter().filter(|c| c.enforced && !c.passed).collect()
    }

    fn push(&mut self, name: impl Into<String>, violations: usize, enforced: bool, detail: String) {
        self.checks.push(ConstraintCheck { name: name.into(), passed: violations == 0, violations, enforced, detail });
    }
}

/// Evaluates every constraint of `cfg` against `card` on `d`.
pub fn check_feasible(cfg: &MipConfig, card: &Scorecard, d: &Dataset) -> Result<ConstraintReport> {
    let p = d.dim();
    if card.dim() != p || cfg.dim() != p {
        return input(format!("scorecard dimension {} / config dimension {} vs dataset {p}", card.dim(), cfg.dim()));
    }
    if card.num_categories() != d.num_categories {
        return input("scorecard and dataset disagree on the number of categories");
    }
    let beta = &card.beta;
    let tau = &card.tau;
    let mut r = ConstraintReport { checks: Vec::new() };

    let bad: Vec<usize> =
        (0..p).filter(|&j| beta[j] < cfg.lower[j] - TOL || beta[j] > cfg.upper[j] + TOL).collect();
    r.push("bounds", bad.len(), true, format!("coordinates {bad:?}"));

    let bad: Vec<usize> =
        if cfg.integer_weights { (0..p).filter(|&j| beta[j] != beta[j].round()).collect() } else { Vec::new() };
    r.push("integrality", bad.len(), cfg.integer_weights, format!("coordinates {bad:?}"));

    let bad: Vec<usize> = cfg
        .risk
        .iter()
        .copied()
        .filter(|&j| j >= p || beta[j] < -TOL)
        .chain(cfg.protective.iter().copied().filter(|&j| j >= p || beta[j] > TOL))
        .collect();
    r.push("signs", bad.len(), true, format!("coordinates {bad:?}"));

    let bad: Vec<(usize, usize)> = cfg
        .effective_pairs(d)
        .into_iter()
        .filter(|&(a, b)| a >= p || b >= p || beta[a] > beta[b] + TOL)
        .collect();
    r.push("monotone", bad.len(), true, format!("pairs {bad:?}"));

    let bad: Vec<(usize, usize)> = cfg
        .groups
        .iter()
        .copied()
        .filter(|&(a, b)| a >= p || b >= p || (beta[a] - beta[b]).abs() > TOL)
        .collect();
    r.push("groups", bad.len(), true, format!("pairs {bad:?}"));

    let nonzero = beta.iter().filter(|b| b.abs() > TOL).count();
    let over = cfg.sparsity.map_or(0, |s| nonzero.saturating_sub(s));
    r.push("sparsity", over, cfg.sparsity.is_some(), format!("{nonzero} nonzero weights, limit {:?}", cfg.sparsity));

    let bad: Vec<usize> = match cfg.minimal_edit.as_ref().and_then(|m| m.max_change.as_ref().map(|c| (m, c))) {
        Some((m, caps)) => (0..p).filter(|&j| (beta[j] - m.reference[j]).abs() > caps[j] + TOL).collect(),
        None => Vec::new(),
    };
    r.push("minimal_edit", bad.len(), true, format!("coordinates {bad:?}"));

    match &cfg.thresholds {
        ThresholdMode::Fixed { tau: fixed } => {
            let bad = fixed.len() != tau.len() || fixed.iter().zip(tau).any(|(a, b)| (a - b).abs() > TOL);
            r.push("thresholds", bad as usize, true, format!("expected {fixed:?}, got {tau:?}"));
        }
        ThresholdMode::Free { min_gap, total_gap, lower, upper } => {
            let out = tau.iter().filter(|&&t| t < lower - TOL || t > upper + TOL).count();
            let gaps = !thresholds_feasible(tau, *min_gap, *total_gap, TOL) as usize;
            r.push("thresholds", out + gaps, true, format!("{tau:?} in [{lower}, {upper}], gap {min_gap}, span {total_gap}"));
        }
    }

    let scores = card.scores(d)?;
    let eps = cfg.epsilon;
    let inside = scores.iter().filter(|&&s| tau.iter().any(|&t| (s - t).abs() < eps)).count();
    r.push("margin", inside, cfg.enforce_margin, format!("{inside} scores within {eps} of a threshold"));

    let m = config_big_m(cfg, d)?;
    // linking rows: s - tau + eps <= M when crossing, tau - s <= M otherwise
    let far = scores
        .iter()
        .filter(|&&s| tau.iter().any(|&t| if s >= t { s - t + eps > m + TOL } else { t - s > m + TOL }))
        .count();
    r.push("big_m", far, false, format!("M = {m}"));

    for (c, cap) in cfg.caps.iter().enumerate() {
        let limit = cap.resolve(d)?;
        let n = cap.count(card, d)? as f64;
        let bad = n > limit.max_count || n < limit.min_count;
        r.push(
            format!("cap[{c}]"),
            bad as usize,
            true,
            format!(
                "{} -> {}: {n} of {} in [{}, {}]",
                cap.truth, cap.predicted, limit.cohort_size, limit.min_count, limit.max_count
            ),
        );
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Instance;
    use crate::loss::LossParams;
    use crate::mip::{CapBound, CapReference, MinimalEdit, PerformanceCap};

    fn data() -> Dataset {
        Dataset::unnamed(
            vec![
                Instance::labeled(vec![1.0, 0.0], 1),
                Instance::labeled(vec![1.0, 1.0], 2),
                Instance::labeled(vec![0.0, 1.0], 1),
            ],
            2,
            2,
        )
        .unwrap()
    }

    #[test]
    fn flags_each_family() {
        let d = data();
        let mut cfg = MipConfig::new(2, 0.0, 3.0, vec![1.5], LossParams::default());
        cfg.monotone_pairs = vec![(1, 0)];
        cfg.sparsity = Some(1);
        cfg.minimal_edit = Some(MinimalEdit { reference: vec![0.0, 0.0], max_change: Some(vec![1.0, 1.0]), penalty: 0.0 });
        let card = Scorecard::new(vec![2.0, 1.0], vec![1.5]).unwrap();
        let r = check_feasible(&cfg, &card, &d).unwrap();
        assert!(r.get("bounds").unwrap().passed);
        assert!(r.get("monotone").unwrap().passed);
        assert_eq!(r.get("sparsity").unwrap().violations, 1);
        assert_eq!(r.get("minimal_edit").unwrap().violations, 1);
        assert!(!r.all_pass());

        let card = Scorecard::new(vec![0.0, 1.5], vec![1.5]).unwrap();
        let r = check_feasible(&cfg, &card, &d).unwrap();
        assert!(!r.get("integrality").unwrap().passed);
        assert!(!r.get("monotone").unwrap().passed);
    }

    #[test]
    fn margin_reported_but_optional() {
        let d = data();
        let mut cfg = MipConfig::new(2, 0.0, 3.0, vec![1.25], LossParams::default());
        let card = Scorecard::new(vec![1.0, 1.0], vec![1.25]).unwrap();
        let r = check_feasible(&cfg, &card, &d).unwrap();
        assert_eq!(r.get("margin").unwrap().violations, 2);
        assert!(r.all_pass());
        cfg.enforce_margin = true;
        assert!(!check_feasible(&cfg, &card, &d).unwrap().all_pass());
    }

    #[test]
    fn caps_against_incumbent() {
        let d = data();
        let inc = Scorecard::new(vec![1.0, 1.0], vec![1.5]).unwrap();
        let mut cfg = MipConfig::new(2, 0.0, 3.0, vec![1.5], LossParams::default());
        cfg.caps.push(PerformanceCap {
            truth: 1,
            predicted: 2,
            bound: CapBound::MaxCount(0.0),
            reference: CapReference::Incumbent(inc.clone()),
        });
        assert!(check_feasible(&cfg, &inc, &d).unwrap().all_pass());
        let worse = Scorecard::new(vec![2.0, 2.0], vec![1.5]).unwrap();
        let r = check_feasible(&cfg, &worse, &d).unwrap();
        assert!(!r.get("cap[0]").unwrap().passed);
    }
}
