use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::EncounterRecord;
use crate::error::{config, Result};
use crate::numeric::{dot, sigmoid};
use crate::scorecard::Scorecard;

/// Generator for synthetic encounters with binary risk-factor features.
///
/// The latent score is `true_beta . x` plus Gaussian noise. A fall occurs with
/// probability `sigmoid(fall_intercept + fall_slope * latent)`, and a targeted
/// intervention with probability
/// `sigmoid(policy_intercept + policy_slope * incumbent score)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n: usize,
    pub p: usize,
    /// Probability that each feature is present.
    pub feature_prob: Vec<f64>,
    pub true_beta: Vec<f64>,
    pub true_tau: Vec<f64>,
    pub fall_slope: f64,
    pub fall_intercept: f64,
    pub policy_slope: f64,
    pub policy_intercept: f64,
    /// Weights behind the intervention policy; defaults to `true_beta`.
    #[serde(default)]
    pub incumbent_beta: Option<Vec<f64>>,
    pub noise_sd: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn check(&self) -> Result<()> {
        if self.true_beta.len() != self.p || self.feature_prob.len() != self.p {
            return config(format!("true_beta and feature_prob must have length p = {}", self.p));
        }
        if self.incumbent_beta.as_ref().is_some_and(|b| b.len() != self.p) {
            return config("incumbent_beta must have length p");
        }
        if self.feature_prob.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return config("feature probabilities must lie in [0, 1]");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return config("noise_sd must be finite and non-negative");
        }
        let finite = [self.fall_slope, self.fall_intercept, self.policy_slope, self.policy_intercept];
        if finite.iter().chain(&self.true_beta).any(|v| !v.is_finite()) {
            return config("model coefficients must be finite");
        }
        Scorecard::new(self.true_beta.clone(), self.true_tau.clone()).map(|_| ())
    }

    pub fn true_scorecard(&self) -> Result<Scorecard> {
        Scorecard::new(self.true_beta.clone(), self.true_tau.clone())
    }
}

/// Draws `spec.n` records; identical specs give identical output.
pub fn synth_generate(spec: &SynthSpec) -> Result<Vec<EncounterRecord>> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| crate::error::Error::Config(e.to_string()))?;
    let policy_beta = spec.incumbent_beta.as_ref().unwrap_or(&spec.true_beta);
    let width = spec.n.max(1).to_string().len();
    let mut out = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let x: Vec<f64> = spec.feature_prob.iter().map(|&q| if rng.random_bool(q) { 1.0 } else { 0.0 }).collect();
        let latent = dot(&spec.true_beta, &x) + noise.sample(&mut rng);
        let fell = rng.random_bool(sigmoid(spec.fall_intercept + spec.fall_slope * latent));
        let targeted = rng.random_bool(sigmoid(spec.policy_intercept + spec.policy_slope * dot(policy_beta, &x)));
        out.push(EncounterRecord::new(format!("e{i:0width$}"), x, fell, targeted));
    }
    Ok(out)
}
