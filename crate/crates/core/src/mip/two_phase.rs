use serde::Serialize;

use super::{check_feasible, solve_exact, MipConfig, Solution, ThresholdMode};
use crate::cso::{fit_cso, project_thresholds, project_weights, CsoParams, FitTrace};
use crate::dataset::Dataset;
use crate::error::{config, Result};
use crate::scorecard::Scorecard;

/// Where the exact phase's warm start came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmSource {
    /// The rounded relaxation was feasible.
    Relaxation,
    /// The rounded relaxation failed a constraint; the incumbent was feasible.
    Incumbent,
    None,
}

#[derive(Debug, Clone)]
pub struct TwoPhaseResult {
    pub relaxed: Scorecard,
    pub trace: FitTrace,
    /// The rounded relaxation, whether or not it was feasible.
    pub rounded: Scorecard,
    pub warm_start: Option<Scorecard>,
    pub warm_source: WarmSource,
    pub solution: Solution,
}

/// Relaxation, rounding, then exact search warm-started from the rounded
/// point (or from the incumbent when rounding breaks a constraint).
///
/// The relaxation runs under the convex part of `cfg` (bounds, signs, order,
/// groups, edit caps); in fixed-threshold mode the thresholds stay fixed.
pub fn fit_two_phase(
    d: &Dataset,
    cso: &CsoParams,
    cfg: &MipConfig,
    incumbent: Option<&Scorecard>,
) -> Result<TwoPhaseResult> {
    cfg.validate(d)?;
    let k = d.num_categories;
    if let Some(inc) = incumbent {
        if inc.dim() != d.dim() || inc.num_categories() != k {
            return config("incumbent shape does not match the dataset");
        }
    }
    let wc = cfg.weight_constraints(d);
    let mut params = cso.clone();
    params.constraints = Some(wc.clone());
    let start_tau = match &cfg.thresholds {
        ThresholdMode::Fixed { tau } => {
            params.fix_thresholds = true;
            let smallest = tau.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
            params.min_gap = params.min_gap.min(smallest);
            params.total_gap = 0.0;
            tau.clone()
        }
        ThresholdMode::Free { min_gap, total_gap, .. } => {
            params.fix_thresholds = false;
            params.min_gap = *min_gap;
            params.total_gap = *total_gap;
            match incumbent {
                Some(inc) => inc.tau.clone(),
                None => match cfg.threshold_candidates(k).into_iter().next() {
                    Some(t) => t,
                    None => return config("no threshold vector satisfies the gap constraints"),
                },
            }
        }
    };
    let start_beta = incumbent.map_or_else(|| vec![0.0; d.dim()], |inc| inc.beta.clone());
    let init = Scorecard::new(start_beta, start_tau)?;
    let (relaxed, trace) = fit_cso(d, &params, &init)?;

    let rounded = round(cfg, &wc, &relaxed)?;
    let (warm_start, warm_source) = if check_feasible(cfg, &rounded, d)?.all_pass() {
        (Some(rounded.clone()), WarmSource::Relaxation)
    } else {
        match incumbent {
            Some(inc) if check_feasible(cfg, inc, d)?.all_pass() => (Some(inc.clone()), WarmSource::Incumbent),
            _ => (None, WarmSource::None),
        }
    };
    log::info!("two-phase warm start: {warm_source:?}");
    let solution = solve_exact(cfg, d, warm_start.as_ref())?;
    Ok(TwoPhaseResult { relaxed, trace, rounded, warm_start, warm_source, solution })
}

/// Projects, then rounds weights to integers and thresholds onto the half-integer grid.
fn round(cfg: &MipConfig, wc: &crate::cso::WeightConstraints, relaxed: &Scorecard) -> Result<Scorecard> {
    let mut beta = project_weights(&relaxed.beta, wc)?;
    if cfg.integer_weights {
        for b in beta.iter_mut() {
            *b = b.round();
        }
    }
    let tau = match &cfg.thresholds {
        ThresholdMode::Fixed { tau } => tau.clone(),
        ThresholdMode::Free { min_gap, total_gap, lower, upper } => {
            let mut t = project_thresholds(&relaxed.tau, *min_gap, *total_gap);
            for v in t.iter_mut() {
                *v = ((*v - 0.5).round() + 0.5).clamp((lower - 0.5).ceil() + 0.5, (upper - 0.5).floor() + 0.5);
            }
            // rounding may collapse neighbours; the feasibility check decides
            for i in 1..t.len() {
                if t[i] <= t[i - 1] {
                    t[i] = t[i - 1] + 1.0;
                }
            }
            t
        }
    };
    Scorecard::new(beta, tau)
}
