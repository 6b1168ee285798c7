//! Feasibility projections for weights and thresholds.

use serde::{Deserialize, Serialize};

use crate::dataset::find_cycle;
use crate::error::{config, Result};
use crate::qp::{project_polyhedron, Halfspace};

/// Hard caps `|beta_j - reference_j| <= max_change_j` around an incumbent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditCaps {
    pub reference: Vec<f64>,
    pub max_change: Vec<f64>,
}

/// The convex part of the governance constraint set on weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConstraints {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Coordinates restricted to `beta_j >= 0`.
    #[serde(default)]
    pub risk: Vec<usize>,
    /// Coordinates restricted to `beta_j <= 0`.
    #[serde(default)]
    pub protective: Vec<usize>,
    /// `(i, j)` requires `beta_i <= beta_j`.
    #[serde(default)]
    pub monotone_pairs: Vec<(usize, usize)>,
    /// `(i, j)` requires `beta_i == beta_j`.
    #[serde(default)]
    pub groups: Vec<(usize, usize)>,
    #[serde(default)]
    pub minimal_edit: Option<EditCaps>,
}

impl WeightConstraints {
    pub fn unbounded(p: usize) -> Self {
        WeightConstraints::boxed(p, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn boxed(p: usize, lo: f64, hi: f64) -> Self {
        WeightConstraints {
            lower: vec![lo; p],
            upper: vec![hi; p],
            risk: Vec::new(),
            protective: Vec::new(),
            monotone_pairs: Vec::new(),
            groups: Vec::new(),
            minimal_edit: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Per-coordinate interval after intersecting bounds, signs and edit caps.
    pub fn effective_box(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let p = self.dim();
        if self.upper.len() != p {
            return config("lower and upper bound vectors differ in length");
        }
        let mut lo = self.lower.clone();
        let mut hi = self.upper.clone();
        for &j in &self.risk {
            check_index(j, p)?;
            lo[j] = lo[j].max(0.0);
        }
        for &j in &self.protective {
            check_index(j, p)?;
            hi[j] = hi[j].min(0.0);
        }
        if let Some(caps) = &self.minimal_edit {
            if caps.reference.len() != p || caps.max_change.len() != p {
                return config("minimal-edit reference/max_change must match the weight dimension");
            }
            for j in 0..p {
                if caps.max_change[j] < 0.0 {
                    return config(format!("negative minimal-edit cap on coordinate {j}"));
                }
                lo[j] = lo[j].max(caps.reference[j] - caps.max_change[j]);
                hi[j] = hi[j].min(caps.reference[j] + caps.max_change[j]);
            }
        }
        for j in 0..p {
            if lo[j].is_nan() || hi[j].is_nan() || lo[j] > hi[j] {
                return config(format!("coordinate {j} has empty interval [{}, {}]", lo[j], hi[j]));
            }
        }
        Ok((lo, hi))
    }

    /// Collapses equality groups into aliases and checks the whole set is non-empty.
    pub fn reduce(&self) -> Result<ReducedConstraints> {
        let p = self.dim();
        let (lo, hi) = self.effective_box()?;
        for &(a, b) in self.monotone_pairs.iter().chain(&self.groups) {
            check_index(a, p)?;
            check_index(b, p)?;
        }
        let mut uf = UnionFind::new(p);
        for &(a, b) in &self.groups {
            uf.union(a, b);
        }
        // groups numbered by their smallest member
        let mut group_of = vec![usize::MAX; p];
        let mut members: Vec<Vec<usize>> = Vec::new();
        for j in 0..p {
            let root = uf.find(j);
            if group_of[root] == usize::MAX {
                group_of[root] = members.len();
                members.push(Vec::new());
            }
            group_of[j] = group_of[root];
            members[group_of[j]].push(j);
        }
        let g = members.len();
        let mut glo = vec![f64::NEG_INFINITY; g];
        let mut ghi = vec![f64::INFINITY; g];
        for j in 0..p {
            let k = group_of[j];
            glo[k] = glo[k].max(lo[j]);
            ghi[k] = ghi[k].min(hi[j]);
        }
        let mut pairs: Vec<(usize, usize)> = self
            .monotone_pairs
            .iter()
            .map(|&(a, b)| (group_of[a], group_of[b]))
            .filter(|(a, b)| a != b)
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        if let Some(nodes) = find_cycle(g, &pairs) {
            return config(format!("monotone pairs form a cycle among weight groups {nodes:?}"));
        }
        let order = crate::dataset::topological_order(g, &pairs).expect("acyclic");
        // propagate bounds along the order; an empty interval means no feasible weights
        let mut plo = glo.clone();
        let mut phi = ghi.clone();
        for &v in &order {
            for &(a, b) in &pairs {
                if a == v {
                    plo[b] = plo[b].max(plo[a]);
                }
            }
        }
        for &v in order.iter().rev() {
            for &(a, b) in &pairs {
                if b == v {
                    phi[a] = phi[a].min(phi[b]);
                }
            }
        }
        for k in 0..g {
            if plo[k] > phi[k] {
                return config(format!(
                    "weight constraints are infeasible: group {:?} needs a value in [{}, {}]",
                    members[k], plo[k], phi[k]
                ));
            }
        }
        Ok(ReducedConstraints { group_of, members, lower: glo, upper: ghi, pairs, order, implied_lower: plo, implied_upper: phi })
    }
}

fn check_index(j: usize, p: usize) -> Result<()> {
    if j >= p {
        return config(format!("constraint index {j} out of range for {p} weights"));
    }
    Ok(())
}

/// Constraint set over alias groups of coordinates.
#[derive(Debug, Clone)]
pub struct ReducedConstraints {
    pub group_of: Vec<usize>,
    pub members: Vec<Vec<usize>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Order pairs between distinct groups.
    pub pairs: Vec<(usize, usize)>,
    /// Topological order of groups.
    pub order: Vec<usize>,
    /// Bounds tightened by propagation along `pairs`.
    pub implied_lower: Vec<f64>,
    pub implied_upper: Vec<f64>,
}

impl ReducedConstraints {
    pub fn num_groups(&self) -> usize {
        self.members.len()
    }

    /// Chains of groups when every group has at most one predecessor and one
    /// successor and each chain shares a single interval.
    fn uniform_chains(&self) -> Option<Vec<Vec<usize>>> {
        let g = self.num_groups();
        let mut next = vec![usize::MAX; g];
        let mut has_prev = vec![false; g];
        for &(a, b) in &self.pairs {
            if next[a] != usize::MAX || has_prev[b] {
                return None;
            }
            next[a] = b;
            has_prev[b] = true;
        }
        let mut chains = Vec::new();
        for start in 0..g {
            if has_prev[start] {
                continue;
            }
            let mut chain = vec![start];
            let mut v = start;
            while next[v] != usize::MAX {
                v = next[v];
                if self.lower[v] != self.lower[start] || self.upper[v] != self.upper[start] {
                    return None;
                }
                chain.push(v);
            }
            chains.push(chain);
        }
        Some(chains)
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut c = x;
        while self.parent[c] != r {
            let n = self.parent[c];
            self.parent[c] = r;
            c = n;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Weighted pool-adjacent-violators: nondecreasing least-squares fit.
pub fn pav(values: &[f64], weights: &[f64]) -> Vec<f64> {
    debug_assert_eq!(values.len(), weights.len());
    // blocks of (weighted mean, total weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let n = blocks.len();
            if blocks[n - 2].0 <= blocks[n - 1].0 {
                break;
            }
            let (m2, w2, l2) = blocks.pop().unwrap();
            let (m1, w1, l1) = blocks.pop().unwrap();
            let w = w1 + w2;
            blocks.push(((m1 * w1 + m2 * w2) / w, w, l1 + l2));
        }
    }
    blocks.iter().flat_map(|&(m, _, len)| std::iter::repeat_n(m, len)).collect()
}

/// Euclidean projection of `beta` onto the weight constraint set.
///
/// Equality groups are pooled first. Disjoint chains with a shared interval use
/// weighted PAV followed by clipping; any other order structure goes through
/// the general polyhedral projection.
pub fn project_weights(beta: &[f64], constraints: &WeightConstraints) -> Result<Vec<f64>> {
    if beta.len() != constraints.dim() {
        return config(format!("weights have length {}, constraints {}", beta.len(), constraints.dim()));
    }
    let reduced = constraints.reduce()?;
    project_reduced(beta, &reduced)
}

/// [`project_weights`] with the constraint reduction done once by the caller.
pub fn project_reduced(beta: &[f64], reduced: &ReducedConstraints) -> Result<Vec<f64>> {
    let g = reduced.num_groups();
    let weight: Vec<f64> = reduced.members.iter().map(|m| m.len() as f64).collect();
    let mean: Vec<f64> = reduced
        .members
        .iter()
        .map(|m| m.iter().map(|&j| beta[j]).sum::<f64>() / m.len() as f64)
        .collect();

    let values = if let Some(chains) = reduced.uniform_chains() {
        let mut out = vec![0.0; g];
        for chain in chains {
            let y: Vec<f64> = chain.iter().map(|&k| mean[k]).collect();
            let w: Vec<f64> = chain.iter().map(|&k| weight[k]).collect();
            let fit = pav(&y, &w);
            for (&k, v) in chain.iter().zip(fit) {
                out[k] = v.clamp(reduced.lower[k], reduced.upper[k]);
            }
        }
        out
    } else {
        // scale each group variable by sqrt(size) so the objective is unweighted
        let s: Vec<f64> = weight.iter().map(|w| w.sqrt()).collect();
        let y: Vec<f64> = (0..g).map(|k| mean[k] * s[k]).collect();
        let mut hs = Vec::new();
        for k in 0..g {
            if reduced.lower[k].is_finite() {
                let mut a = vec![0.0; g];
                a[k] = 1.0 / s[k];
                hs.push(Halfspace { a, b: reduced.lower[k] });
            }
            if reduced.upper[k].is_finite() {
                let mut a = vec![0.0; g];
                a[k] = -1.0 / s[k];
                hs.push(Halfspace { a, b: -reduced.upper[k] });
            }
        }
        for &(a, b) in &reduced.pairs {
            let mut row = vec![0.0; g];
            row[b] = 1.0 / s[b];
            row[a] = -1.0 / s[a];
            hs.push(Halfspace { a: row, b: 0.0 });
        }
        let u = project_polyhedron(&y, &hs)
            .ok_or_else(|| crate::Error::Config("weight constraints are infeasible".into()))?;
        let mut v: Vec<f64> = (0..g).map(|k| u[k] / s[k]).collect();
        repair(&mut v, reduced);
        v
    };

    let mut out = vec![0.0; beta.len()];
    for (j, o) in out.iter_mut().enumerate() {
        *o = values[reduced.group_of[j]];
    }
    Ok(out)
}

/// Removes round-off violations left by the iterative solver.
fn repair(v: &mut [f64], reduced: &ReducedConstraints) {
    for k in 0..v.len() {
        v[k] = v[k].clamp(reduced.implied_lower[k], reduced.implied_upper[k]);
    }
    for &node in &reduced.order {
        for &(a, b) in &reduced.pairs {
            if a == node && v[b] < v[a] {
                v[b] = v[a];
            }
        }
    }
}

/// True when `beta` satisfies every constraint up to `tol`.
pub fn weights_feasible(beta: &[f64], constraints: &WeightConstraints, tol: f64) -> bool {
    let Ok((lo, hi)) = constraints.effective_box() else { return false };
    beta.len() == lo.len()
        && beta.iter().zip(lo.iter().zip(&hi)).all(|(&b, (&l, &h))| b >= l - tol && b <= h + tol)
        && constraints.monotone_pairs.iter().all(|&(i, j)| beta[i] <= beta[j] + tol)
        && constraints.groups.iter().all(|&(i, j)| (beta[i] - beta[j]).abs() <= tol)
}

/// Euclidean projection onto `{tau : tau[k+1] - tau[k] >= delta, tau[last] - tau[0] >= total_gap}`.
///
/// Shifting by `k * delta` turns the gap constraints into plain monotonicity,
/// solved by PAV. A violated span constraint is handled through its Lagrange
/// multiplier: for a fixed multiplier the solution is the isotonic fit of the
/// shifted targets with the end points pushed apart, and the span is monotone
/// in the multiplier, so it is located by bisection.
pub fn project_thresholds(tau: &[f64], delta: f64, total_gap: f64) -> Vec<f64> {
    let m = tau.len();
    if m <= 1 {
        return tau.to_vec();
    }
    let shifted: Vec<f64> = tau.iter().enumerate().map(|(k, t)| t - k as f64 * delta).collect();
    let ones = vec![1.0; m];
    let need = total_gap - (m - 1) as f64 * delta;
    let span_at = |nu: f64| -> Vec<f64> {
        let mut y = shifted.clone();
        y[0] -= nu;
        y[m - 1] += nu;
        pav(&y, &ones)
    };
    let mut u = span_at(0.0);
    if need > 0.0 && u[m - 1] - u[0] < need {
        let mut hi = need.max(1.0);
        while {
            let v = span_at(hi);
            v[m - 1] - v[0] < need
        } {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let v = span_at(mid);
            if v[m - 1] - v[0] < need {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        u = span_at(hi);
    }
    u.iter().enumerate().map(|(k, v)| v + k as f64 * delta).collect()
}

/// True when `tau` meets the gap constraints up to `tol`.
pub fn thresholds_feasible(tau: &[f64], delta: f64, total_gap: f64, tol: f64) -> bool {
    tau.windows(2).all(|w| w[1] - w[0] >= delta - tol)
        && (tau.len() < 2 || tau[tau.len() - 1] - tau[0] >= total_gap - tol)
}
