//! Smooth convex relaxation of the scorecard program.
//!
//! Each indicator "score crosses threshold k" is replaced by a softplus margin
//! penalty. The per-instance loss is the cheapest feasible category's sum of
//! boundary penalties, and the whole objective is minimized by projected
//! subgradient descent over weights and thresholds.

mod projection;
mod solver;

pub use projection::{
    pav, project_reduced, project_thresholds, project_weights, thresholds_feasible, weights_feasible, EditCaps,
    ReducedConstraints, WeightConstraints,
};
pub use solver::{fit_cso, FitTrace, Termination, TraceRecord};

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeasibleSet};
use crate::error::{input, Result};
use crate::loss::LossParams;
use crate::numeric::{dot, sigmoid, KahanSum};

/// Absolute tolerance when collecting tied minimizing categories.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Regularizer {
    #[default]
    None,
    /// `mu * ||beta||_2^2`, differentiated directly.
    Ridge { mu: f64 },
    /// `mu * ||beta||_1`, applied as a proximal shrinkage step.
    Lasso { mu: f64 },
}

impl Regularizer {
    pub fn value(&self, beta: &[f64]) -> f64 {
        match *self {
            Regularizer::None => 0.0,
            Regularizer::Ridge { mu } => mu * beta.iter().map(|b| b * b).sum::<f64>(),
            Regularizer::Lasso { mu } => mu * beta.iter().map(|b| b.abs()).sum::<f64>(),
        }
    }
}

/// Settings of the relaxation and its solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsoParams {
    /// Softplus sharpness; larger values approach the hinge.
    pub temperature: f64,
    /// Weight for failing to reach threshold `j` (length `K - 1`).
    pub lambda_minus: Vec<f64>,
    /// Weight for wrongly crossing threshold `j` (length `K - 1`).
    pub lambda_plus: Vec<f64>,
    pub regularizer: Regularizer,
    /// Initial step; iteration `t` uses `step0 / sqrt(t)`.
    pub step0: f64,
    pub max_iters: usize,
    /// Stop once `||d beta|| + ||d tau||` falls below this.
    pub tol: f64,
    /// Minimum gap between consecutive thresholds.
    pub min_gap: f64,
    /// Minimum distance between the outer thresholds.
    pub total_gap: f64,
    /// Keep the initial thresholds and optimize weights only.
    pub fix_thresholds: bool,
    /// Convex weight constraints; `None` leaves weights free apart from the
    /// dataset's monotone pairs.
    pub constraints: Option<WeightConstraints>,
}

impl CsoParams {
    /// Defaults for `K` categories: temperature 4, unit boundary weights,
    /// `step0 = 0.1`, 5000 iterations, tolerance 1e-6, unit gaps.
    pub fn new(num_categories: usize) -> Self {
        let m = num_categories.saturating_sub(1);
        CsoParams {
            temperature: 4.0,
            lambda_minus: vec![1.0; m],
            lambda_plus: vec![1.0; m],
            regularizer: Regularizer::None,
            step0: 0.1,
            max_iters: 5000,
            tol: 1e-6,
            min_gap: 1.0,
            total_gap: 0.0,
            fix_thresholds: false,
            constraints: None,
        }
    }

    /// Boundary weights derived from an ordinal loss and positional weights.
    pub fn with_loss(mut self, loss: &LossParams, positional: &[f64]) -> Self {
        let (minus, plus) = lambda_from_loss(loss, positional);
        self.lambda_minus = minus;
        self.lambda_plus = plus;
        self
    }

    pub fn num_thresholds(&self) -> usize {
        self.lambda_minus.len()
    }

    pub fn check(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return input("temperature must be positive");
        }
        if self.lambda_minus.len() != self.lambda_plus.len() || self.lambda_minus.is_empty() {
            return input("lambda vectors must both have length K-1");
        }
        if self.lambda_minus.iter().chain(&self.lambda_plus).any(|l| !(*l > 0.0)) {
            return input("boundary weights must be positive");
        }
        if !(self.step0 > 0.0) || self.max_iters == 0 || !(self.tol > 0.0) {
            return input("step0, max_iters and tol must be positive");
        }
        if !(self.min_gap > 0.0) || !(self.total_gap >= 0.0) {
            return input("min_gap must be positive and total_gap non-negative");
        }
        match self.regularizer {
            Regularizer::Ridge { mu } | Regularizer::Lasso { mu } if !(mu >= 0.0) => {
                input("regularizer strength must be non-negative")
            }
            _ => Ok(()),
        }
    }
}

/// `lambda_minus_j = alpha_under * w_j`, `lambda_plus_j = alpha_over * w_j`.
pub fn lambda_from_loss(loss: &LossParams, positional: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        positional.iter().map(|w| loss.alpha_under * w).collect(),
        positional.iter().map(|w| loss.alpha_over * w).collect(),
    )
}

/// `(1/a) log(1 + exp(a t))` without overflow.
#[inline]
fn softplus(t: f64, alpha: f64) -> f64 {
    t.max(0.0) + (-(alpha * t).abs()).exp().ln_1p() / alpha
}

/// Penalty for a score sitting below threshold `tau_k`.
pub fn softplus_below(s: f64, tau_k: f64, alpha: f64) -> f64 {
    softplus(tau_k - s, alpha)
}

/// Penalty for a score sitting above threshold `tau_k`.
pub fn softplus_above(s: f64, tau_k: f64, alpha: f64) -> f64 {
    softplus(s - tau_k, alpha)
}

/// Bracket values for every category `1..=K` at score `s`.
fn brackets(s: f64, tau: &[f64], p: &CsoParams) -> Vec<f64> {
    let m = tau.len();
    let alpha = p.temperature;
    // Category k must clear thresholds j < k and stay under thresholds j >= k:
    // out[k-1] = sum_{j<k} lambda-_j phi-_j + sum_{j>=k} lambda+_j phi+_j.
    let mut out = vec![0.0; m + 1];
    let mut prefix = 0.0;
    for k in 0..=m {
        out[k] = prefix;
        if k < m {
            prefix += p.lambda_minus[k] * softplus_below(s, tau[k], alpha);
        }
    }
    let mut suffix = 0.0;
    for k in (0..=m).rev() {
        if k < m {
            suffix += p.lambda_plus[k] * softplus_above(s, tau[k], alpha);
        }
        out[k] += suffix;
    }
    out
}

/// Relaxed loss of one instance and the categories attaining it.
pub fn cso_instance_loss(s: f64, tau: &[f64], set: FeasibleSet, p: &CsoParams) -> Result<(f64, FeasibleSet)> {
    if set.is_empty() {
        return input("feasible set is empty");
    }
    if tau.len() != p.num_thresholds() || set.max().unwrap() > tau.len() + 1 {
        return input("feasible set or thresholds do not match the number of categories");
    }
    Ok(instance_loss_unchecked(s, tau, set, p))
}

fn instance_loss_unchecked(s: f64, tau: &[f64], set: FeasibleSet, p: &CsoParams) -> (f64, FeasibleSet) {
    let b = brackets(s, tau, p);
    let best = set.iter().map(|k| b[k - 1]).fold(f64::INFINITY, f64::min);
    let argmin = FeasibleSet::from_bits(
        set.iter().filter(|&k| b[k - 1] - best <= TIE_TOLERANCE).fold(0u64, |acc, k| acc | 1u64 << (k - 1)),
    );
    (best, argmin)
}

fn check_point(beta: &[f64], tau: &[f64], d: &Dataset, p: &CsoParams) -> Result<()> {
    p.check()?;
    if beta.len() != d.dim() {
        return input(format!("beta has length {}, dataset dimension {}", beta.len(), d.dim()));
    }
    if tau.len() + 1 != d.num_categories || tau.len() != p.num_thresholds() {
        return input("threshold count does not match K-1");
    }
    if !thresholds_feasible(tau, p.min_gap, p.total_gap, 1e-9) {
        return input(format!("thresholds {tau:?} violate the ordering/gap constraints"));
    }
    Ok(())
}

/// `sum_i w_i L_i(beta, tau) + R(beta)`.
pub fn cso_objective(beta: &[f64], tau: &[f64], d: &Dataset, p: &CsoParams) -> Result<f64> {
    check_point(beta, tau, d, p)?;
    Ok(objective_unchecked(beta, tau, d, p))
}

pub(crate) fn objective_unchecked(beta: &[f64], tau: &[f64], d: &Dataset, p: &CsoParams) -> f64 {
    let mut acc = KahanSum::new();
    for inst in &d.instances {
        let s = dot(beta, &inst.features);
        acc.add(inst.weight * instance_loss_unchecked(s, tau, inst.feasible, p).0);
    }
    acc.total() + p.regularizer.value(beta)
}

/// Gradient of the smooth part; tied minimizing categories share weight equally.
/// The lasso term is left to the proximal step of the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub beta: Vec<f64>,
    pub tau: Vec<f64>,
}

pub fn cso_gradient(beta: &[f64], tau: &[f64], d: &Dataset, p: &CsoParams) -> Result<Gradient> {
    check_point(beta, tau, d, p)?;
    Ok(objective_and_gradient(beta, tau, d, p).1)
}

pub(crate) fn objective_and_gradient(beta: &[f64], tau: &[f64], d: &Dataset, p: &CsoParams) -> (f64, Gradient) {
    let m = tau.len();
    let alpha = p.temperature;
    let mut g_beta = vec![KahanSum::new(); beta.len()];
    let mut g_tau = vec![KahanSum::new(); m];
    let mut value = KahanSum::new();
    let mut sig_up = vec![0.0; m];
    let mut sig_down = vec![0.0; m];
    for inst in &d.instances {
        let s = dot(beta, &inst.features);
        let (loss, argmin) = instance_loss_unchecked(s, tau, inst.feasible, p);
        value.add(inst.weight * loss);
        for j in 0..m {
            sig_up[j] = sigmoid(alpha * (s - tau[j]));
            sig_down[j] = sigmoid(alpha * (tau[j] - s));
        }
        let share = inst.weight / argmin.len() as f64;
        let mut ds = 0.0;
        for k in argmin.iter() {
            for j in 0..m {
                if j + 1 < k {
                    // threshold must be cleared
                    ds -= share * p.lambda_minus[j] * sig_down[j];
                    g_tau[j].add(share * p.lambda_minus[j] * sig_down[j]);
                } else {
                    ds += share * p.lambda_plus[j] * sig_up[j];
                    g_tau[j].add(-share * p.lambda_plus[j] * sig_up[j]);
                }
            }
        }
        if ds != 0.0 {
            for (g, x) in g_beta.iter_mut().zip(&inst.features) {
                g.add(ds * x);
            }
        }
    }
    let mut grad_beta: Vec<f64> = g_beta.iter().map(|g| g.total()).collect();
    if let Regularizer::Ridge { mu } = p.regularizer {
        for (g, b) in grad_beta.iter_mut().zip(beta) {
            *g += 2.0 * mu * b;
        }
    }
    (
        value.total() + p.regularizer.value(beta),
        Gradient { beta: grad_beta, tau: g_tau.iter().map(|g| g.total()).collect() },
    )
}
