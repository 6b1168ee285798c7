use std::time::Instant;

use super::{check_feasible, MipConfig, Solution, Status};
use crate::dataset::Dataset;
use crate::error::{config, Error, Result};
use crate::scorecard::Scorecard;

/// Largest search space (weight points times threshold candidates) the oracle enumerates.
pub const ORACLE_LIMIT: f64 = 1e7;

/// Exhaustive enumeration of integer weights in their bounding box and of
/// every threshold candidate, keeping the lexicographically first minimizer.
pub fn brute_force_oracle(cfg: &MipConfig, d: &Dataset) -> Result<Solution> {
    let start = Instant::now();
    cfg.validate(d)?;
    if !cfg.integer_weights {
        return config("enumeration requires integer weights");
    }
    let p = d.dim();
    let (lo, hi) = match cfg.weight_constraints(d).effective_box() {
        Ok(b) => b,
        Err(Error::Config(msg)) => return Ok(empty(format!("empty weight box: {msg}"), 0, start)),
        Err(e) => return Err(e),
    };
    let mut lo_i = Vec::with_capacity(p);
    let mut hi_i = Vec::with_capacity(p);
    for j in 0..p {
        if !lo[j].is_finite() || !hi[j].is_finite() {
            return config("enumeration requires finite weight bounds");
        }
        lo_i.push((lo[j] - 1e-9).ceil() as i64);
        hi_i.push((hi[j] + 1e-9).floor() as i64);
    }
    let candidates = cfg.threshold_candidates(d.num_categories);
    let estimate = lo_i.iter().zip(&hi_i).map(|(l, h)| (h - l + 1).max(0) as f64).product::<f64>()
        * candidates.len() as f64;
    if estimate > ORACLE_LIMIT {
        return Err(Error::SearchSpace { estimate, limit: ORACLE_LIMIT });
    }
    if lo_i.iter().zip(&hi_i).any(|(l, h)| l > h) || candidates.is_empty() {
        return Ok(empty("search space is empty".into(), 0, start));
    }
    let pairs = cfg.effective_pairs(d);
    let mut best: Option<(f64, Scorecard)> = None;
    let mut points = 0u64;
    let mut beta_i = lo_i.clone();
    loop {
        let beta: Vec<f64> = beta_i.iter().map(|&v| v as f64).collect();
        let structural = pairs.iter().all(|&(a, b)| beta[a] <= beta[b])
            && cfg.groups.iter().all(|&(a, b)| beta[a] == beta[b])
            && cfg.sparsity.is_none_or(|s| beta.iter().filter(|&&b| b != 0.0).count() <= s);
        if structural {
            for tau in &candidates {
                points += 1;
                let card = Scorecard::new(beta.clone(), tau.clone())?;
                if !check_feasible(cfg, &card, d)?.all_pass() {
                    continue;
                }
                let obj = cfg.objective(&card, d)?;
                if best.as_ref().is_none_or(|(b, _)| obj < b - 1e-9 * b.abs().max(1.0)) {
                    best = Some((obj, card));
                }
            }
        }
        // odometer, last coordinate fastest
        let mut j = p;
        loop {
            if j == 0 {
                let wall_ms = start.elapsed().as_millis() as u64;
                return Ok(match best {
                    Some((objective, card)) => Solution {
                        scorecard: Some(card),
                        objective,
                        status: Status::ProvenOptimal,
                        gap: 0.0,
                        nodes_explored: points,
                        wall_ms,
                        diagnostic: None,
                    },
                    None => empty("no enumerated point is feasible".into(), points, start),
                });
            }
            j -= 1;
            if beta_i[j] < hi_i[j] {
                beta_i[j] += 1;
                break;
            }
            beta_i[j] = lo_i[j];
        }
    }
}

fn empty(why: String, points: u64, start: Instant) -> Solution {
    Solution {
        scorecard: None,
        objective: f64::INFINITY,
        status: Status::Infeasible,
        gap: f64::INFINITY,
        nodes_explored: points,
        wall_ms: start.elapsed().as_millis() as u64,
        diagnostic: Some(why),
    }
}
