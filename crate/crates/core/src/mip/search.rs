use std::time::Instant;

use super::{check_feasible, costs, MipConfig, Solution, Status};
use crate::dataset::Dataset;
use crate::error::{config, Error, Result};
use crate::numeric::dot;
use crate::scorecard::Scorecard;

const TIME_CHECK_INTERVAL: u64 = 256;

struct CapRows {
    predicted: usize,
    min_count: f64,
    max_count: f64,
    member: Vec<bool>,
}

struct Problem<'a> {
    d: &'a Dataset,
    cfg: &'a MipConfig,
    k: usize,
    members: Vec<Vec<usize>>,
    /// `column[g][i]`: summed features of group `g` for instance `i`.
    column: Vec<Vec<f64>>,
    pairs: Vec<(usize, usize)>,
    cost: Vec<Vec<f64>>,
    caps: Vec<CapRows>,
    candidates: Vec<Vec<f64>>,
    fixed_tau: Option<Vec<f64>>,
    /// Lower bound on the per-instance cost when thresholds are free.
    free_floor: f64,
    penalty: Option<(f64, Vec<f64>)>,
}

struct Search<'a> {
    pb: Problem<'a>,
    best: Option<(f64, Vec<f64>, usize)>,
    nodes: u64,
    node_limit: u64,
    deadline: Option<Instant>,
    stopped: bool,
    warm_tau: Option<Vec<f64>>,
}

/// Exact minimization of the empirical risk (plus soft penalties) over
/// integer weights by depth-first branch-and-bound.
///
/// Groups of aliased weights are branched in index order with values
/// ascending, so without a warm start the returned optimum is the
/// lexicographically smallest one. A feasible warm start seeds the incumbent;
/// when its objective meets the root bound, optimality is proved at the root.
pub fn solve_exact(cfg: &MipConfig, d: &Dataset, warm: Option<&Scorecard>) -> Result<Solution> {
    let start = Instant::now();
    cfg.validate(d)?;
    if !cfg.integer_weights {
        return config("exact search requires integer weights");
    }
    let p = d.dim();
    let mut wc = cfg.weight_constraints(d);
    if let Some(w) = warm {
        if w.dim() != p || w.num_categories() != d.num_categories {
            return config("warm start shape does not match the dataset");
        }
        if let Some(r) = cfg.trust_radius {
            for j in 0..p {
                wc.lower[j] = wc.lower[j].max(w.beta[j] - r);
                wc.upper[j] = wc.upper[j].min(w.beta[j] + r);
            }
        }
    }
    let infeasible = |why: String, start: Instant| Solution {
        scorecard: None,
        objective: f64::INFINITY,
        status: Status::Infeasible,
        gap: f64::INFINITY,
        nodes_explored: 0,
        wall_ms: start.elapsed().as_millis() as u64,
        diagnostic: Some(why),
    };
    let reduced = match wc.reduce() {
        Ok(r) => r,
        Err(Error::Config(msg)) => return Ok(infeasible(format!("weight constraints are empty: {msg}"), start)),
        Err(e) => return Err(e),
    };
    let g = reduced.num_groups();
    let mut lo = Vec::with_capacity(g);
    let mut hi = Vec::with_capacity(g);
    for i in 0..g {
        let (l, h) = (reduced.implied_lower[i], reduced.implied_upper[i]);
        if !l.is_finite() || !h.is_finite() {
            return config("exact search requires finite weight bounds");
        }
        lo.push((l - 1e-9).ceil() as i64);
        hi.push((h + 1e-9).floor() as i64);
        if lo[i] > hi[i] {
            return Ok(infeasible(format!("no integer value for weight group {:?}", reduced.members[i]), start));
        }
    }
    let candidates = cfg.threshold_candidates(d.num_categories);
    if candidates.is_empty() {
        return Ok(infeasible("no threshold vector satisfies the gap constraints".into(), start));
    }
    let column = reduced
        .members
        .iter()
        .map(|m| d.instances.iter().map(|inst| m.iter().map(|&j| inst.features[j]).sum()).collect())
        .collect();
    let cost = costs(cfg, d);
    let mut caps = Vec::new();
    for cap in &cfg.caps {
        let limit = cap.resolve(d)?;
        let mut member = vec![false; d.len()];
        for i in cap.cohort(d) {
            member[i] = true;
        }
        caps.push(CapRows { predicted: cap.predicted, min_count: limit.min_count, max_count: limit.max_count, member });
    }
    let free_floor = cost.iter().map(|row| row.iter().copied().fold(f64::INFINITY, f64::min)).sum();
    let penalty = cfg.minimal_edit.as_ref().filter(|m| m.penalty > 0.0).map(|m| (m.penalty, m.reference.clone()));
    let pb = Problem {
        d,
        cfg,
        k: d.num_categories,
        members: reduced.members.clone(),
        column,
        pairs: reduced.pairs.clone(),
        cost,
        caps,
        fixed_tau: cfg.num_thresholds().map(|_| candidates[0].clone()),
        candidates,
        free_floor,
        penalty,
    };

    let mut search = Search {
        pb,
        best: None,
        nodes: 0,
        node_limit: cfg.budget.node_limit.unwrap_or(u64::MAX),
        deadline: cfg.budget.time_limit_ms.map(|ms| start + std::time::Duration::from_millis(ms)),
        stopped: false,
        warm_tau: None,
    };
    if let Some(w) = warm {
        if check_feasible(cfg, w, d)?.all_pass() {
            let obj = cfg.objective(w, d)?;
            search.best = Some((obj, w.beta.clone(), usize::MAX));
            search.warm_tau = Some(w.tau.clone());
        }
    }
    let partial = vec![0.0; d.len()];
    let root_bound = search.bound(&partial, 0, &lo, &hi).unwrap_or(f64::INFINITY);
    search.branch(0, &partial, lo, hi);

    let wall_ms = start.elapsed().as_millis() as u64;
    let nodes = search.nodes;
    let stopped = search.stopped;
    let warm_tau = search.warm_tau.take();
    match search.best {
        None => {
            let (status, why) = if stopped {
                (Status::BudgetExhausted, "budget exhausted before a feasible point was found".to_string())
            } else {
                (Status::Infeasible, "no integer weight vector satisfies the constraint set".to_string())
            };
            Ok(Solution {
                scorecard: None,
                objective: f64::INFINITY,
                status,
                gap: f64::INFINITY,
                nodes_explored: nodes,
                wall_ms,
                diagnostic: Some(why),
            })
        }
        Some((_, beta, t)) => {
            let tau = if t == usize::MAX { warm_tau.expect("warm incumbent") } else { search.pb.candidates[t].clone() };
            let card = Scorecard::new(beta, tau)?;
            let objective = cfg.objective(&card, d)?;
            let (status, gap) = if stopped {
                (Status::FeasibleHeuristic, (objective - root_bound).max(0.0))
            } else {
                (Status::ProvenOptimal, 0.0)
            };
            Ok(Solution { scorecard: Some(card), objective, status, gap, nodes_explored: nodes, wall_ms, diagnostic: None })
        }
    }
}

impl Search<'_> {
    fn cutoff(&self) -> f64 {
        match &self.best {
            Some((obj, _, _)) => obj - 1e-9 * obj.abs().max(1.0),
            None => f64::INFINITY,
        }
    }

    /// Lower bound over the subtree with domains `[lo, hi]`, groups before
    /// `depth` fixed and already summed into `partial`. `None` if the subtree
    /// provably violates sparsity or a cap.
    fn bound(&self, partial: &[f64], depth: usize, lo: &[i64], hi: &[i64]) -> Option<f64> {
        let pb = &self.pb;
        let g = pb.members.len();
        if let Some(limit) = pb.cfg.sparsity {
            let forced: usize = (0..g).filter(|&i| lo[i] > 0 || hi[i] < 0).map(|i| pb.members[i].len()).sum();
            if forced > limit {
                return None;
            }
        }
        let mut total = 0.0;
        if let Some((rho, reference)) = &pb.penalty {
            for i in 0..g {
                total += rho * group_penalty_floor(&pb.members[i], reference, lo[i], hi[i]);
            }
        }
        let Some(tau) = &pb.fixed_tau else {
            return Some(total + pb.free_floor);
        };
        let mut forced = vec![0usize; pb.caps.len()];
        let mut possible = vec![0usize; pb.caps.len()];
        for i in 0..pb.d.len() {
            let (mut smin, mut smax) = (partial[i], partial[i]);
            for gi in depth..g {
                let x = pb.column[gi][i];
                if x >= 0.0 {
                    smin += lo[gi] as f64 * x;
                    smax += hi[gi] as f64 * x;
                } else {
                    smin += hi[gi] as f64 * x;
                    smax += lo[gi] as f64 * x;
                }
            }
            // absorb rounding differences against the exact leaf scores
            let slack = 1e-9 * (1.0 + smin.abs().max(smax.abs()));
            let ka = 1 + tau.partition_point(|&t| t <= smin - slack);
            let kb = 1 + tau.partition_point(|&t| t <= smax + slack);
            total += pb.cost[i][ka - 1..kb].iter().copied().fold(f64::INFINITY, f64::min);
            for (c, cap) in pb.caps.iter().enumerate() {
                if cap.member[i] {
                    if ka == kb && ka == cap.predicted {
                        forced[c] += 1;
                    }
                    if ka <= cap.predicted && cap.predicted <= kb {
                        possible[c] += 1;
                    }
                }
            }
        }
        for (c, cap) in pb.caps.iter().enumerate() {
            if forced[c] as f64 > cap.max_count || (possible[c] as f64) < cap.min_count {
                return None;
            }
        }
        Some(total)
    }

    fn branch(&mut self, depth: usize, partial: &[f64], lo: Vec<i64>, hi: Vec<i64>) {
        if self.stopped {
            return;
        }
        if self.nodes >= self.node_limit {
            self.stopped = true;
            return;
        }
        if let Some(deadline) = self.deadline {
            if self.nodes % TIME_CHECK_INTERVAL == 0 && Instant::now() >= deadline {
                self.stopped = true;
                return;
            }
        }
        self.nodes += 1;
        let Some(bound) = self.bound(partial, depth, &lo, &hi) else {
            return;
        };
        if bound >= self.cutoff() {
            return;
        }
        if depth == self.pb.members.len() {
            self.leaf(&lo);
            return;
        }
        for v in lo[depth]..=hi[depth] {
            let (mut clo, mut chi) = (lo.clone(), hi.clone());
            clo[depth] = v;
            chi[depth] = v;
            if !propagate(&self.pb.pairs, &mut clo, &mut chi) {
                continue;
            }
            let col = &self.pb.column[depth];
            let child: Vec<f64> = partial.iter().zip(col).map(|(s, x)| s + v as f64 * x).collect();
            self.branch(depth + 1, &child, clo, chi);
            if self.stopped {
                return;
            }
        }
    }

    /// Evaluates every threshold candidate at fully fixed weights.
    fn leaf(&mut self, values: &[i64]) {
        let pb = &self.pb;
        let n = pb.d.len();
        let k = pb.k;
        let mut beta = vec![0.0; pb.d.dim()];
        for (gi, m) in pb.members.iter().enumerate() {
            for &j in m {
                beta[j] = values[gi] as f64;
            }
        }
        let scores: Vec<f64> = pb.d.instances.iter().map(|inst| dot(&beta, &inst.features)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
        let sorted: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
        let mut prefix = vec![vec![0.0; n + 1]; k];
        for (kk, row) in prefix.iter_mut().enumerate() {
            for (m, &i) in order.iter().enumerate() {
                row[m + 1] = row[m] + pb.cost[i][kk];
            }
        }
        let cap_prefix: Vec<Vec<usize>> = pb
            .caps
            .iter()
            .map(|cap| {
                let mut row = vec![0; n + 1];
                for (m, &i) in order.iter().enumerate() {
                    row[m + 1] = row[m] + cap.member[i] as usize;
                }
                row
            })
            .collect();
        let penalty = pb.cfg.penalty(&beta);
        let eps = pb.cfg.epsilon;
        let mut here: Option<(f64, usize)> = None;
        let mut cuts = vec![0usize; k + 1];
        cuts[k] = n;
        'candidates: for (t, tau) in pb.candidates.iter().enumerate() {
            for (kk, &tk) in tau.iter().enumerate() {
                cuts[kk + 1] = sorted.partition_point(|&s| s < tk);
                if pb.cfg.enforce_margin
                    && sorted.partition_point(|&s| s <= tk - eps) < sorted.partition_point(|&s| s < tk + eps)
                {
                    continue 'candidates;
                }
            }
            for (cap, row) in pb.caps.iter().zip(&cap_prefix) {
                let count = (row[cuts[cap.predicted]] - row[cuts[cap.predicted - 1]]) as f64;
                if count > cap.max_count || count < cap.min_count {
                    continue 'candidates;
                }
            }
            let mut obj = penalty;
            for (kk, row) in prefix.iter().enumerate() {
                obj += row[cuts[kk + 1]] - row[cuts[kk]];
            }
            if here.is_none_or(|(best, _)| obj < best) {
                here = Some((obj, t));
            }
        }
        if let Some((obj, t)) = here {
            if obj < self.cutoff() {
                self.best = Some((obj, beta, t));
            }
        }
    }
}

/// Tightens domains along order pairs; false if some domain empties.
fn propagate(pairs: &[(usize, usize)], lo: &mut [i64], hi: &mut [i64]) -> bool {
    loop {
        let mut changed = false;
        for &(a, b) in pairs {
            if lo[b] < lo[a] {
                lo[b] = lo[a];
                changed = true;
            }
            if hi[a] > hi[b] {
                hi[a] = hi[b];
                changed = true;
            }
        }
        if !changed {
            return lo.iter().zip(hi.iter()).all(|(l, h)| l <= h);
        }
    }
}

/// `min_{v in [lo, hi] integer} sum_{j in members} |v - reference_j|`.
fn group_penalty_floor(members: &[usize], reference: &[f64], lo: i64, hi: i64) -> f64 {
    let eval = |v: i64| members.iter().map(|&j| (v as f64 - reference[j]).abs()).sum::<f64>();
    let mut best = eval(lo).min(eval(hi));
    for &j in members {
        for v in [reference[j].floor(), reference[j].ceil()] {
            let v = (v as i64).clamp(lo, hi);
            best = best.min(eval(v));
        }
    }
    best
}
