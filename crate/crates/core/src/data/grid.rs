use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cso::{fit_cso, CsoParams};
use crate::dataset::Dataset;
use crate::error::{config, Result};
use crate::loss::{empirical_risk, LossParams};
use crate::scorecard::Scorecard;

/// Hyperparameter grid for three categories; the boundary weights are `(lambda1, 1 - lambda1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub alpha_under: Vec<f64>,
    pub alpha_over: Vec<f64>,
    pub lambda1: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            alpha_under: vec![0.5, 1.0, 2.0, 4.0],
            alpha_over: vec![0.5, 1.0, 2.0, 4.0],
            lambda1: vec![0.2, 0.5, 0.8],
        }
    }
}

impl Grid {
    /// Points in row-major order: `alpha_under`, then `alpha_over`, then `lambda1`.
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &u in &self.alpha_under {
            for &o in &self.alpha_over {
                for &l in &self.lambda1 {
                    out.push((u, o, l));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub alpha_under: f64,
    pub alpha_over: f64,
    pub lambda1: f64,
    /// Fold-averaged scorecard.
    pub scorecard: Scorecard,
    /// Target-loss risk of the averaged scorecard on the pooled validation folds.
    pub validation_risk: f64,
    pub rank: usize,
}

/// Trains the relaxation on every fold for every grid point, averages the
/// fitted scorecards across folds, and ranks grid points by the target risk
/// of the averaged scorecard on the union of validation folds. Ties keep grid order.
pub fn grid_search(
    folds: &[(Dataset, Dataset)],
    grid: &Grid,
    cso: &CsoParams,
    init: &Scorecard,
    target: &LossParams,
) -> Result<Vec<GridResult>> {
    if folds.is_empty() {
        return config("grid search needs at least one fold");
    }
    if folds[0].0.num_categories != 3 {
        return config("the (lambda1, 1 - lambda1) grid is defined for three categories");
    }
    if grid.lambda1.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
        return config("lambda1 values must lie strictly between 0 and 1");
    }
    let validation = {
        let first = &folds[0].1;
        first.with_instances(folds.iter().flat_map(|(_, v)| v.instances.iter().cloned()).collect())
    };
    let points = grid.points();
    let mut results = points
        .par_iter()
        .map(|&(u, o, l)| -> Result<GridResult> {
            let loss = LossParams::new(u, o, 1.0)?;
            let params = cso.clone().with_loss(&loss, &[l, 1.0 - l]);
            let mut beta = vec![0.0; init.dim()];
            let mut tau = vec![0.0; init.tau.len()];
            for (train, _) in folds {
                let (card, _) = fit_cso(train, &params, init)?;
                beta.iter_mut().zip(&card.beta).for_each(|(a, b)| *a += b);
                tau.iter_mut().zip(&card.tau).for_each(|(a, b)| *a += b);
            }
            let n = folds.len() as f64;
            let card = Scorecard::new(beta.iter().map(|b| b / n).collect(), tau.iter().map(|t| t / n).collect())?;
            let validation_risk = empirical_risk(&card, &validation, target)?;
            Ok(GridResult { alpha_under: u, alpha_over: o, lambda1: l, scorecard: card, validation_risk, rank: 0 })
        })
        .collect::<Result<Vec<_>>>()?;
    results.sort_by(|a, b| a.validation_risk.total_cmp(&b.validation_risk));
    for (r, res) in results.iter_mut().enumerate() {
        res.rank = r + 1;
    }
    Ok(results)
}
