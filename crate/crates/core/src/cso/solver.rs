use std::io::Write;

use serde::{Deserialize, Serialize};

use super::projection::{project_reduced, project_thresholds, thresholds_feasible, WeightConstraints};
use super::{objective_and_gradient, objective_unchecked, CsoParams, Regularizer};
use crate::dataset::Dataset;
use crate::error::{input, Error, Result};
use crate::scorecard::{Crossing, Scorecard};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
}

/// One line of the streamed optimizer trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub objective: f64,
    pub step: f64,
    pub proj_active: bool,
}

/// Per-iteration history of [`fit_cso`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub objectives: Vec<f64>,
    pub steps: Vec<f64>,
    pub projection_active: Vec<bool>,
    pub final_iterate: Scorecard,
    pub best_objective: f64,
    /// Iteration (1-based) whose starting point was best; `iterations + 1` means the final iterate.
    pub best_iteration: usize,
    pub termination: Termination,
}

impl FitTrace {
    pub fn iterations(&self) -> usize {
        self.objectives.len()
    }

    pub fn records(&self) -> impl Iterator<Item = TraceRecord> + '_ {
        (0..self.objectives.len()).map(|t| TraceRecord {
            iter: t + 1,
            objective: self.objectives[t],
            step: self.steps[t],
            proj_active: self.projection_active[t],
        })
    }

    /// Line-delimited JSON, one [`TraceRecord`] per iteration.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for rec in self.records() {
            serde_json::to_writer(&mut w, &rec).map_err(|e| Error::Io(e.into()))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Projected subgradient descent on the relaxed objective.
///
/// Each iteration takes a step of size `step0 / sqrt(t)`, applies lasso
/// shrinkage if configured, and projects weights and thresholds back onto
/// their constraint sets. The best iterate seen is returned, not the last.
pub fn fit_cso(d: &Dataset, p: &CsoParams, init: &Scorecard) -> Result<(Scorecard, FitTrace)> {
    p.check()?;
    let dim = d.dim();
    if init.beta.len() != dim || init.tau.len() + 1 != d.num_categories || init.tau.len() != p.num_thresholds() {
        return input("initial scorecard does not match the dataset shape");
    }
    let mut constraints = p.constraints.clone().unwrap_or_else(|| WeightConstraints::unbounded(dim));
    if constraints.dim() != dim {
        return input("weight constraints do not match the dataset dimension");
    }
    for pair in &d.monotone_pairs {
        if !constraints.monotone_pairs.contains(pair) {
            constraints.monotone_pairs.push(*pair);
        }
    }
    let reduced = constraints.reduce()?;

    let mut beta = project_reduced(&init.beta, &reduced)?;
    let mut tau = if p.fix_thresholds {
        if !thresholds_feasible(&init.tau, p.min_gap, p.total_gap, 1e-9) {
            return input(format!("fixed thresholds {:?} violate the gap constraints", init.tau));
        }
        init.tau.clone()
    } else {
        project_thresholds(&init.tau, p.min_gap, p.total_gap)
    };

    let mut objectives = Vec::new();
    let mut steps = Vec::new();
    let mut active = Vec::new();
    let mut best = (f64::INFINITY, beta.clone(), tau.clone(), 0usize);
    let mut termination = Termination::MaxIters;

    for t in 1..=p.max_iters {
        let (value, grad) = objective_and_gradient(&beta, &tau, d, p);
        if !value.is_finite() || grad.beta.iter().chain(&grad.tau).any(|g| !g.is_finite()) {
            return Err(Error::Numeric { iteration: t, message: format!("objective {value} is not finite") });
        }
        objectives.push(value);
        if value < best.0 {
            best = (value, beta.clone(), tau.clone(), t);
        }
        let eta = p.step0 / (t as f64).sqrt();
        steps.push(eta);

        let mut raw_beta: Vec<f64> = beta.iter().zip(&grad.beta).map(|(b, g)| b - eta * g).collect();
        if let Regularizer::Lasso { mu } = p.regularizer {
            let shrink = eta * mu;
            for b in raw_beta.iter_mut() {
                *b = b.signum() * (b.abs() - shrink).max(0.0);
            }
        }
        let new_beta = project_reduced(&raw_beta, &reduced)?;
        let mut moved = new_beta != raw_beta;
        let new_tau = if p.fix_thresholds {
            tau.clone()
        } else {
            let raw_tau: Vec<f64> = tau.iter().zip(&grad.tau).map(|(v, g)| v - eta * g).collect();
            let projected = project_thresholds(&raw_tau, p.min_gap, p.total_gap);
            moved |= projected != raw_tau;
            projected
        };
        active.push(moved);

        let change = l2(&new_beta, &beta) + l2(&new_tau, &tau);
        beta = new_beta;
        tau = new_tau;
        if change < p.tol {
            termination = Termination::Converged;
            break;
        }
    }

    let final_value = objective_unchecked(&beta, &tau, d, p);
    if !final_value.is_finite() {
        return Err(Error::Numeric { iteration: objectives.len() + 1, message: "final objective is not finite".into() });
    }
    if final_value < best.0 {
        best = (final_value, beta.clone(), tau.clone(), objectives.len() + 1);
    }
    let final_iterate = Scorecard { beta, tau, crossing: Crossing::AtOrAbove };
    let card = Scorecard { beta: best.1, tau: best.2, crossing: Crossing::AtOrAbove };
    let trace = FitTrace {
        objectives,
        steps,
        projection_active: active,
        final_iterate,
        best_objective: best.0,
        best_iteration: best.3,
        termination,
    };
    Ok((card, trace))
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
