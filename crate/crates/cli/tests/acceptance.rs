//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use ordscore_core::cso::{
    cso_gradient, cso_instance_loss, cso_objective, project_thresholds, project_weights, CsoParams, EditCaps,
    Regularizer, WeightConstraints,
};
use ordscore_core::data::{partition_cohorts, synth_generate, SynthSpec};
use ordscore_core::eval::{auprc, auroc, ks_two_sample};
use ordscore_core::mip::{
    brute_force_oracle, check_feasible, fit_two_phase, solve_exact, variant_preset, CapBound, CapReference, MinimalEdit,
    MipConfig, PerformanceCap, Status, ThresholdMode, Variant,
};
use ordscore_core::{Dataset, FeasibleSet, Instance, LossParams, Scorecard};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("gradient correctness", gradient_correctness),
        ("convexity on singleton labels", convexity),
        ("relaxation limit on separable data", relaxation_limit),
        ("projection correctness", projection_correctness),
        ("metric oracles", metric_oracles),
        ("asymmetry behavior", asymmetry_behavior),
        ("cap semantics", cap_semantics),
        ("cohort partition totals", partition_totals),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {:>2} {name} [{secs:.1}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:>2} {name} [{secs:.1}s]: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

// ---------------------------------------------------------------- 1

const SETS: [&[usize]; 5] = [&[1], &[3], &[1, 2], &[2, 3], &[1, 2, 3]];

fn pick<T: Copy>(rng: &mut ChaCha8Rng, items: &[T]) -> T {
    items[rng.random_range(0..items.len())]
}

fn two_distinct(rng: &mut ChaCha8Rng, p: usize) -> (usize, usize) {
    let i = rng.random_range(0..p);
    let j = (i + rng.random_range(1..p)) % p;
    (i, j)
}

fn random_case(rng: &mut ChaCha8Rng) -> (MipConfig, Dataset, bool) {
    loop {
        let free = rng.random_bool(0.2);
        let p = if free { rng.random_range(1..=3) } else { rng.random_range(1..=5) };
        let n = rng.random_range(5..=60);
        let wide = !free && rng.random_bool(0.2);
        let instances = (0..n)
            .map(|_| {
                let x = (0..p).map(|_| rng.random_range(0..if wide { 3 } else { 2 }) as f64).collect();
                let set = FeasibleSet::from_categories(pick(rng, &SETS).iter().copied()).unwrap();
                Instance::new(x, set, 1.0).unwrap()
            })
            .collect();
        let mut d = Dataset::unnamed(instances, p, 3).unwrap();
        let loss = LossParams::new(pick(rng, &[1.0, 2.0, 3.0]), pick(rng, &[1.0, 2.0]), pick(rng, &[1.0, 2.0])).unwrap();
        let t1 = rng.random_range(1..=8) as f64 + pick(rng, &[0.0, 0.5]);
        let tau = vec![t1, t1 + rng.random_range(1..=6) as f64];
        let mut cfg = MipConfig::new(p, 0.0, 4.0, tau.clone(), loss);
        if free {
            cfg.thresholds = ThresholdMode::Free {
                min_gap: 1.0,
                total_gap: pick(rng, &[1.0, 2.0, 3.0]),
                lower: -0.5,
                upper: 4.0 * p as f64 + 0.5,
            };
        }
        if p >= 2 && rng.random_bool(0.3) {
            let pair = two_distinct(rng, p);
            if rng.random_bool(0.5) {
                d.monotone_pairs.push(pair);
            } else {
                cfg.monotone_pairs.push(pair);
            }
        }
        if p >= 2 && rng.random_bool(0.3) {
            cfg.groups.push(two_distinct(rng, p));
        }
        if rng.random_bool(0.3) {
            cfg.sparsity = Some(rng.random_range(0..=p));
        }
        if rng.random_bool(0.15) {
            cfg.protective.push(rng.random_range(0..p));
        }
        if rng.random_bool(0.2) {
            cfg.minimal_edit = Some(MinimalEdit {
                reference: (0..p).map(|_| rng.random_range(0..=4) as f64).collect(),
                max_change: rng.random_bool(0.5).then(|| vec![2.0; p]),
                penalty: pick(rng, &[0.0, 0.25, 0.5]),
            });
        }
        if rng.random_bool(0.2) {
            cfg.enforce_margin = true;
            cfg.epsilon = pick(rng, &[0.5, 1.0]);
        }
        if rng.random_bool(0.4) {
            for _ in 0..rng.random_range(1..=2) {
                let truth = rng.random_range(1..=3);
                let predicted = (truth + rng.random_range(0..2)) % 3 + 1;
                let bound = match rng.random_range(0..3) {
                    0 => CapBound::MaxCount(rng.random_range(0..=5) as f64),
                    1 => CapBound::MaxRate(pick(rng, &[0.1, 0.25, 0.5])),
                    _ => CapBound::MinRate(pick(rng, &[0.0, 0.1, 0.3])),
                };
                let reference = if matches!(bound, CapBound::MaxCount(_)) && rng.random_bool(0.5) {
                    let beta = (0..p).map(|_| rng.random_range(0..=4) as f64).collect();
                    CapReference::Incumbent(Scorecard::new(beta, tau.clone()).unwrap())
                } else {
                    CapReference::Absolute
                };
                cfg.caps.push(PerformanceCap { truth, predicted, bound, reference });
            }
        }
        if cfg.validate(&d).is_ok() {
            return (cfg, d, free);
        }
    }
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0_5eed_0001);
    let (mut free_n, mut capped, mut infeasible) = (0, 0, 0);
    for case in 0..200 {
        let (cfg, d, free) = random_case(&mut rng);
        let exact = solve_exact(&cfg, &d, None).map_err(|e| format!("case {case}: {e}"))?;
        let oracle = brute_force_oracle(&cfg, &d).map_err(|e| format!("case {case}: {e}"))?;
        free_n += free as usize;
        capped += !cfg.caps.is_empty() as usize;
        match (exact.status, oracle.status) {
            (Status::Infeasible, Status::Infeasible) => infeasible += 1,
            (Status::ProvenOptimal, Status::ProvenOptimal) => {
                let tol = 1e-9 * oracle.objective.abs().max(1.0);
                ensure((exact.objective - oracle.objective).abs() <= tol, || {
                    format!("case {case}: exact {} vs oracle {}", exact.objective, oracle.objective)
                })?;
                let card = exact.scorecard.as_ref().unwrap();
                ensure(check_feasible(&cfg, card, &d).unwrap().all_pass(), || format!("case {case}: infeasible output"))?;
            }
            (a, b) => return Err(format!("case {case}: status {a:?} vs oracle {b:?}")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 300.0, || format!("took {secs:.1}s"))?;
    Ok(format!("200/200 agree ({free_n} free-threshold, {capped} capped, {infeasible} infeasible) in {secs:.1}s"))
}

// ---------------------------------------------------------------- 2, 3

fn softplus(t: f64, alpha: f64) -> f64 {
    // ln(1 + e^{alpha t}) / alpha, written to avoid overflow
    t.max(0.0) + (-(alpha * t).abs()).exp().ln_1p() / alpha
}

/// Relaxed cost of category `k` (1-based) at score `s`.
fn bracket(k: usize, s: f64, tau: &[f64], p: &CsoParams) -> f64 {
    let a = p.temperature;
    tau.iter()
        .enumerate()
        .map(|(j, &t)| {
            if j + 1 < k {
                p.lambda_minus[j] * softplus(t - s, a)
            } else {
                p.lambda_plus[j] * softplus(s - t, a)
            }
        })
        .sum()
}

fn relaxed_objective(beta: &[f64], tau: &[f64], d: &Dataset, p: &CsoParams) -> f64 {
    let data: f64 = d
        .instances
        .iter()
        .map(|inst| {
            let s: f64 = beta.iter().zip(&inst.features).map(|(b, x)| b * x).sum();
            inst.weight * inst.feasible.iter().map(|k| bracket(k, s, tau, p)).fold(f64::INFINITY, f64::min)
        })
        .sum();
    let reg = match p.regularizer {
        Regularizer::Ridge { mu } => mu * beta.iter().map(|b| b * b).sum::<f64>(),
        _ => 0.0,
    };
    data + reg
}

/// Smallest gap between the best and second-best feasible bracket over all instances.
fn argmin_margin(beta: &[f64], tau: &[f64], d: &Dataset, p: &CsoParams) -> f64 {
    let mut margin = f64::INFINITY;
    for inst in &d.instances {
        let s: f64 = beta.iter().zip(&inst.features).map(|(b, x)| b * x).sum();
        let mut vals: Vec<f64> = inst.feasible.iter().map(|k| bracket(k, s, tau, p)).collect();
        vals.sort_by(f64::total_cmp);
        if vals.len() > 1 {
            margin = margin.min(vals[1] - vals[0]);
        }
    }
    margin
}

fn random_cso_data(rng: &mut ChaCha8Rng, n: usize, p: usize, singleton: bool) -> Dataset {
    let instances = (0..n)
        .map(|_| {
            let x = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            let set = if singleton {
                FeasibleSet::singleton(rng.random_range(1..=3))
            } else {
                FeasibleSet::from_categories(pick(rng, &SETS).iter().copied()).unwrap()
            };
            Instance::new(x, set, rng.random_range(0.5..2.0)).unwrap()
        })
        .collect();
    Dataset::unnamed(instances, p, 3).unwrap()
}

fn random_cso_params(rng: &mut ChaCha8Rng, max_temp: f64) -> CsoParams {
    let mut p = CsoParams::new(3);
    p.temperature = rng.random_range(0.5..max_temp);
    p.lambda_minus = (0..2).map(|_| rng.random_range(0.5..3.0)).collect();
    p.lambda_plus = (0..2).map(|_| rng.random_range(0.5..3.0)).collect();
    p
}

fn random_tau(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let t1 = rng.random_range(-2.0..2.0);
    vec![t1, t1 + rng.random_range(1.0..4.0)]
}

fn gradient_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0_5eed_0002);
    let h = 1e-5;
    let (mut accepted, mut tries, mut worst) = (0, 0, 0.0f64);
    while accepted < 100 {
        tries += 1;
        let d = random_cso_data(&mut rng, 25, 3, false);
        let mut p = random_cso_params(&mut rng, 8.0);
        if rng.random_bool(0.3) {
            p.regularizer = Regularizer::Ridge { mu: 0.1 };
        }
        let beta: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let tau = random_tau(&mut rng);
        // every instance needs a strict, stable minimizer
        if argmin_margin(&beta, &tau, &d, &p) < 1e-3 {
            continue;
        }
        let unique = d.instances.iter().all(|inst| {
            let s: f64 = beta.iter().zip(&inst.features).map(|(b, x)| b * x).sum();
            cso_instance_loss(s, &tau, inst.feasible, &p).unwrap().1.len() == 1
        });
        ensure(unique, || "library reports a tied argmin where the oracle sees a clear gap".into())?;
        let lib = cso_objective(&beta, &tau, &d, &p).unwrap();
        let mine = relaxed_objective(&beta, &tau, &d, &p);
        ensure((lib - mine).abs() <= 1e-12 * mine.abs().max(1.0), || format!("objective {lib} vs {mine}"))?;

        let g = cso_gradient(&beta, &tau, &d, &p).unwrap();
        let analytic: Vec<f64> = g.beta.iter().chain(&g.tau).copied().collect();
        let point: Vec<f64> = beta.iter().chain(&tau).copied().collect();
        let f = |v: &[f64]| relaxed_objective(&v[..3], &v[3..], &d, &p);
        let numeric: Vec<f64> = (0..point.len())
            .map(|i| {
                let (mut up, mut dn) = (point.clone(), point.clone());
                up[i] += h;
                dn[i] -= h;
                (f(&up) - f(&dn)) / (2.0 * h)
            })
            .collect();
        let diff = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = numeric.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel = diff / norm;
        worst = worst.max(rel);
        ensure(rel <= 1e-5, || format!("relative error {rel:e} at beta {beta:?} tau {tau:?}"))?;
        accepted += 1;
    }
    Ok(format!("100 points ({tries} drawn), worst relative error {worst:.2e}"))
}

fn convexity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0_5eed_0003);
    let mut worst = f64::NEG_INFINITY;
    for probe in 0..1000 {
        let d = random_cso_data(&mut rng, 30, 3, true);
        let mut p = random_cso_params(&mut rng, 50.0);
        p.min_gap = 0.5;
        p.regularizer = match rng.random_range(0..3) {
            0 => Regularizer::None,
            1 => Regularizer::Ridge { mu: 0.3 },
            _ => Regularizer::Lasso { mu: 0.3 },
        };
        let a: Vec<f64> = (0..3).map(|_| rng.random_range(-4.0..4.0)).collect();
        let ta = random_tau(&mut rng);
        let (b, tb) = if probe % 2 == 0 {
            ((0..3).map(|_| rng.random_range(-4.0..4.0)).collect(), random_tau(&mut rng))
        } else {
            // nearby pairs probe curvature at a finer scale
            let b: Vec<f64> = a.iter().map(|v| v + rng.random_range(-0.05..0.05)).collect();
            (b, ta.iter().map(|t| t + rng.random_range(-0.05..0.05)).collect())
        };
        let mid = |u: &[f64], v: &[f64]| -> Vec<f64> { u.iter().zip(v).map(|(x, y)| 0.5 * (x + y)).collect() };
        let fa = cso_objective(&a, &ta, &d, &p).unwrap();
        let fb = cso_objective(&b, &tb, &d, &p).unwrap();
        let fm = cso_objective(&mid(&a, &b), &mid(&ta, &tb), &d, &p).unwrap();
        let excess = fm - 0.5 * (fa + fb);
        worst = worst.max(excess);
        ensure(excess <= 1e-9, || format!("probe {probe}: midpoint exceeds chord by {excess:e}"))?;
    }
    Ok(format!("1000 probes, largest midpoint-minus-chord {worst:.3e}"))
}

// ---------------------------------------------------------------- 4

fn relaxation_limit() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0_5eed_0004);
    let truth = Scorecard::new(vec![2.0, 3.0, 5.0, 8.0], vec![6.0, 14.0]).unwrap();
    let instances: Vec<Instance> = (0..400)
        .map(|_| {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(0..2) as f64).collect();
            let k = truth.categorize(&x).unwrap();
            Instance::labeled(x, k)
        })
        .collect();
    let d = Dataset::unnamed(instances, 4, 3).unwrap();
    let cfg = MipConfig::new(4, 0.0, 13.0, vec![6.0, 14.0], LossParams::default());
    let mut cso = CsoParams::new(3).with_loss(&cfg.loss, &[1.0, 1.0]);
    cso.temperature = 50.0;
    cso.step0 = 1.0;
    let out = fit_two_phase(&d, &cso, &cfg, None).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let rounded = cfg.objective(&out.rounded, &d).unwrap();
    let sol = &out.solution;
    ensure(rounded == 0.0, || format!("rounded relaxation has objective {rounded}"))?;
    ensure(sol.status == Status::ProvenOptimal && sol.objective == 0.0, || format!("{:?} {}", sol.status, sol.objective))?;
    ensure(sol.nodes_explored == 1, || format!("{} nodes, expected certification at the root", sol.nodes_explored))?;
    ensure(secs < 30.0, || format!("took {secs:.1}s"))?;
    Ok(format!("rounded beta {:?}, objective 0, 1 node, {secs:.2}s", out.rounded.beta))
}

// ---------------------------------------------------------------- 5

/// Euclidean projection onto `{x : A x <= b}` by enumerating active sets.
fn qp_project(y: &[f64], rows: &[(Vec<f64>, f64)]) -> Option<Vec<f64>> {
    let n = y.len();
    let yv = DVector::from_column_slice(y);
    let feasible = |x: &DVector<f64>| rows.iter().all(|(a, b)| DVector::from_column_slice(a).dot(x) <= b + 1e-9);
    let mut best: Option<(f64, DVector<f64>)> = None;
    let m = rows.len();
    let mut subset: Vec<usize> = Vec::new();
    fn visit(
        start: usize,
        subset: &mut Vec<usize>,
        m: usize,
        n: usize,
        f: &mut dyn FnMut(&[usize]),
    ) {
        f(subset);
        if subset.len() == n {
            return;
        }
        for i in start..m {
            subset.push(i);
            visit(i + 1, subset, m, n, f);
            subset.pop();
        }
    }
    visit(0, &mut subset, m, n, &mut |s: &[usize]| {
        let x = if s.is_empty() {
            yv.clone()
        } else {
            let a = DMatrix::from_fn(s.len(), n, |r, c| rows[s[r]].0[c]);
            let b = DVector::from_fn(s.len(), |r, _| rows[s[r]].1);
            let gram = &a * a.transpose();
            if gram.determinant().abs() < 1e-10 {
                return;
            }
            let Some(mu) = gram.lu().solve(&(&a * &yv - &b)) else { return };
            if mu.iter().any(|&v| v < -1e-10) {
                return;
            }
            &yv - a.transpose() * mu
        };
        if feasible(&x) {
            let dist = (&x - &yv).norm();
            if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                best = Some((dist, x));
            }
        }
    });
    best.map(|(_, x)| x.iter().copied().collect())
}

fn unit(n: usize, i: usize, v: f64) -> Vec<f64> {
    let mut a = vec![0.0; n];
    a[i] = v;
    a
}

fn weight_rows(c: &WeightConstraints) -> Vec<(Vec<f64>, f64)> {
    let n = c.dim();
    let mut rows = Vec::new();
    for j in 0..n {
        if c.upper[j].is_finite() {
            rows.push((unit(n, j, 1.0), c.upper[j]));
        }
        if c.lower[j].is_finite() {
            rows.push((unit(n, j, -1.0), -c.lower[j]));
        }
    }
    for &j in &c.risk {
        rows.push((unit(n, j, -1.0), 0.0));
    }
    for &j in &c.protective {
        rows.push((unit(n, j, 1.0), 0.0));
    }
    let diff = |i: usize, j: usize| {
        let mut a = vec![0.0; n];
        a[i] += 1.0;
        a[j] -= 1.0;
        a
    };
    for &(i, j) in &c.monotone_pairs {
        rows.push((diff(i, j), 0.0));
    }
    for &(i, j) in &c.groups {
        rows.push((diff(i, j), 0.0));
        rows.push((diff(j, i), 0.0));
    }
    if let Some(e) = &c.minimal_edit {
        for j in 0..n {
            rows.push((unit(n, j, 1.0), e.reference[j] + e.max_change[j]));
            rows.push((unit(n, j, -1.0), e.max_change[j] - e.reference[j]));
        }
    }
    rows
}

fn threshold_rows(m: usize, delta: f64, span: f64) -> Vec<(Vec<f64>, f64)> {
    let mut rows = Vec::new();
    for k in 0..m.saturating_sub(1) {
        let mut a = vec![0.0; m];
        a[k] = 1.0;
        a[k + 1] = -1.0;
        rows.push((a, -delta));
    }
    if m >= 2 {
        let mut a = vec![0.0; m];
        a[0] = 1.0;
        a[m - 1] = -1.0;
        rows.push((a, -span));
    }
    rows
}

/// A valid constraint set: acyclic once groups are merged, and the origin is feasible.
fn random_weight_constraints(rng: &mut ChaCha8Rng, n: usize) -> WeightConstraints {
    loop {
        let c = draw_weight_constraints(rng, n);
        if c.reduce().is_ok() {
            return c;
        }
    }
}

fn draw_weight_constraints(rng: &mut ChaCha8Rng, n: usize) -> WeightConstraints {
    let mut c = WeightConstraints::unbounded(n);
    for j in 0..n {
        if rng.random_bool(0.8) {
            c.lower[j] = rng.random_range(-3.0..0.0);
        }
        if rng.random_bool(0.8) {
            c.upper[j] = rng.random_range(0.0..3.0);
        }
    }
    if rng.random_bool(0.25) {
        c.risk.push(rng.random_range(0..n));
    }
    if rng.random_bool(0.15) {
        c.protective.push(rng.random_range(0..n));
    }
    if n >= 2 {
        // orient pairs along a random permutation so the order stays acyclic
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        for _ in 0..rng.random_range(0..=n) {
            let (a, b) = two_distinct(rng, n);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let pair = (perm[lo], perm[hi]);
            if !c.monotone_pairs.contains(&pair) {
                c.monotone_pairs.push(pair);
            }
        }
        if rng.random_bool(0.25) {
            c.groups.push(two_distinct(rng, n));
        }
    }
    if rng.random_bool(0.3) {
        let reference: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let max_change = reference.iter().map(|r: &f64| r.abs() + rng.random_range(0.0..2.0)).collect();
        c.minimal_edit = Some(EditCaps { reference, max_change });
    }
    c
}

fn projection_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0_5eed_0005);
    let (mut worst, mut worst_idem) = (0.0f64, 0.0f64);
    let max_abs = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    for case in 0..200 {
        let n = rng.random_range(1..=4);
        let c = random_weight_constraints(&mut rng, n);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-6.0..6.0)).collect();
        let got = project_weights(&y, &c).map_err(|e| format!("weights case {case}: {e}"))?;
        let want = qp_project(&y, &weight_rows(&c)).ok_or(format!("weights case {case}: oracle found nothing"))?;
        let err = max_abs(&got, &want);
        worst = worst.max(err);
        ensure(err <= 1e-8, || format!("weights case {case}: {got:?} vs {want:?} for {y:?} under {c:?}"))?;
        let again = project_weights(&got, &c).unwrap();
        let idem = max_abs(&again, &got);
        worst_idem = worst_idem.max(idem);
        ensure(idem <= 1e-12, || format!("weights case {case}: not idempotent ({idem:e})"))?;

        let m = rng.random_range(1..=4);
        let tau: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
        let delta = rng.random_range(0.0..2.0);
        let span = if rng.random_bool(0.5) { rng.random_range(0.0..8.0) } else { 0.0 };
        let got = project_thresholds(&tau, delta, span);
        let want = qp_project(&tau, &threshold_rows(m, delta, span)).ok_or(format!("thresholds case {case}: oracle"))?;
        let err = max_abs(&got, &want);
        worst = worst.max(err);
        ensure(err <= 1e-8, || format!("thresholds case {case}: {got:?} vs {want:?} for {tau:?}, {delta}, {span}"))?;
        let idem = max_abs(&project_thresholds(&got, delta, span), &got);
        worst_idem = worst_idem.max(idem);
        ensure(idem <= 1e-12, || format!("thresholds case {case}: not idempotent ({idem:e})"))?;
    }
    Ok(format!("200 weight + 200 threshold inputs, max error {worst:.1e}, idempotence {worst_idem:.1e}"))
}

// ---------------------------------------------------------------- 6

fn brute_auroc(s: &[f64], y: &[bool]) -> Option<f64> {
    let (mut twice, mut pos, mut neg) = (0u64, 0u64, 0u64);
    for (i, &a) in s.iter().enumerate() {
        if y[i] {
            pos += 1;
        } else {
            neg += 1;
        }
        for (j, &b) in s.iter().enumerate() {
            if y[i] && !y[j] {
                twice += if a > b { 2 } else if a == b { 1 } else { 0 };
            }
        }
    }
    (pos > 0 && neg > 0).then(|| twice as f64 / 2.0 / (pos as f64 * neg as f64))
}

/// Average precision by sweeping every distinct cutoff `score >= t` from the top.
fn brute_auprc(s: &[f64], y: &[bool]) -> Option<f64> {
    let pos = y.iter().filter(|&&b| b).count() as u64;
    if pos == 0 {
        return None;
    }
    let mut cuts: Vec<f64> = s.to_vec();
    cuts.sort_by(|a, b| b.total_cmp(a));
    cuts.dedup();
    let mut prev_tp = 0u64;
    let mut area = 0.0;
    for t in cuts {
        let tp = s.iter().zip(y).filter(|(v, l)| **v >= t && **l).count() as u64;
        let fp = s.iter().zip(y).filter(|(v, l)| **v >= t && !**l).count() as u64;
        if tp > prev_tp {
            let recall_step = (tp - prev_tp) as f64 / pos as f64;
            area += recall_step * (tp as f64 / (tp + fp) as f64);
        }
        prev_tp = tp;
    }
    Some(area)
}

/// Supremum of the ECDF gap over every pooled value, in integer units of 1/(na nb).
fn brute_ks(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as u64, b.len() as u64);
    let mut widest = 0u64;
    for &t in a.iter().chain(b) {
        let fa = a.iter().filter(|&&v| v <= t).count() as u64;
        let fb = b.iter().filter(|&&v| v <= t).count() as u64;
        widest = widest.max((fa * nb).abs_diff(fb * na));
    }
    widest as f64 / (na as f64 * nb as f64)
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0_5eed_0006);
    let mut ties = 0;
    for case in 0..100 {
        let n = rng.random_range(2..=200);
        let levels = rng.random_range(2..=12);
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 * 0.5).collect();
        let rate = rng.random_range(0.05..0.95);
        let y: Vec<bool> = (0..n).map(|_| rng.random_bool(rate)).collect();
        let mut sorted = s.clone();
        sorted.sort_by(f64::total_cmp);
        ties += sorted.windows(2).any(|w| w[0] == w[1]) as usize;

        let (a, b) = (auroc(&s, &y).unwrap(), brute_auroc(&s, &y));
        ensure(a == b, || format!("case {case}: auroc {a:?} vs {b:?}"))?;
        let (a, b) = (auprc(&s, &y).unwrap(), brute_auprc(&s, &y));
        ensure(a == b, || format!("case {case}: auprc {a:?} vs {b:?}"))?;
        let neg: Vec<f64> = s.iter().zip(&y).filter(|(_, l)| !**l).map(|(v, _)| *v).collect();
        let posv: Vec<f64> = s.iter().zip(&y).filter(|(_, l)| **l).map(|(v, _)| *v).collect();
        if !neg.is_empty() && !posv.is_empty() {
            let (a, b) = (ks_two_sample(&neg, &posv).unwrap().statistic, brute_ks(&neg, &posv));
            ensure(a == b, || format!("case {case}: ks {a} vs {b}"))?;
        }
    }
    Ok(format!("100 inputs ({ties} with ties), AUROC/AUPRC/KS bit-identical to brute force"))
}

// ---------------------------------------------------------------- 7, 8

fn synthetic_training() -> (Dataset, Scorecard) {
    let spec = SynthSpec {
        n: 1200,
        p: 4,
        feature_prob: vec![0.35, 0.3, 0.25, 0.2],
        true_beta: vec![3.0, 4.0, 6.0, 8.0],
        true_tau: vec![6.0, 14.0],
        fall_slope: 0.45,
        fall_intercept: -5.5,
        policy_slope: 0.5,
        policy_intercept: -4.0,
        incumbent_beta: Some(vec![2.0, 3.0, 4.0, 7.0]),
        noise_sd: 1.5,
        seed: 0x0_5eed_0007,
    };
    let records = synth_generate(&spec).unwrap();
    let names: Vec<String> = (0..4).map(|j| format!("x{j}")).collect();
    let part = partition_cohorts(&records, &names, 3).unwrap();
    let inc = Scorecard::new(spec.incumbent_beta.clone().unwrap(), spec.true_tau.clone()).unwrap();
    (part.train, inc)
}

fn fit_variant(v: Variant, d: &Dataset, inc: &Scorecard) -> Result<(MipConfig, Scorecard), String> {
    let cfg = variant_preset(v, Some(inc), d).map_err(|e| e.to_string())?;
    let cso = CsoParams::new(3).with_loss(&cfg.loss, &[1.0, 1.0]);
    let out = fit_two_phase(d, &cso, &cfg, Some(inc)).map_err(|e| e.to_string())?;
    let s = out.solution;
    ensure(s.status == Status::ProvenOptimal, || format!("{}: status {:?}", v.name(), s.status))?;
    Ok((cfg, s.scorecard.unwrap()))
}

/// `(truth, predicted)` counts over singleton-labelled instances, indexed `[truth-1][pred-1]`.
fn confusion(card: &Scorecard, d: &Dataset) -> [[usize; 3]; 3] {
    let mut m = [[0; 3]; 3];
    for inst in &d.instances {
        if let Some(t) = inst.feasible.as_singleton() {
            let s: f64 = card.beta.iter().zip(&inst.features).map(|(b, x)| b * x).sum();
            let k = 1 + card.tau.iter().filter(|&&t| s >= t).count();
            m[t - 1][k - 1] += 1;
        }
    }
    m
}

fn asymmetry_behavior() -> Outcome {
    let (d, inc) = synthetic_training();
    let (_, sym) = fit_variant(Variant::Symmetric, &d, &inc)?;
    let (_, asym) = fit_variant(Variant::Asymmetric, &d, &inc)?;
    let under = |m: [[usize; 3]; 3]| m[1][0] + m[2][0] + m[2][1];
    let (us, ua) = (under(confusion(&sym, &d)), under(confusion(&asym, &d)));
    let diffs: Vec<f64> = d
        .instances
        .iter()
        .map(|i| asym.score(&i.features).unwrap() - sym.score(&i.features).unwrap())
        .collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    ensure(ua <= us, || format!("under-triage asymmetric {ua} > symmetric {us}"))?;
    ensure(mean > 0.0, || format!("mean score differential {mean}"))?;
    Ok(format!(
        "n={}, under-triage {ua} (asym) vs {us} (sym), mean differential {mean:.3}, beta {:?} vs {:?}",
        d.len(),
        asym.beta,
        sym.beta
    ))
}

fn cap_semantics() -> Outcome {
    let (d, inc) = synthetic_training();
    let base = confusion(&inc, &d);
    let cohort1 = base[0].iter().sum::<usize>() as f64;

    let (cfg, fp) = fit_variant(Variant::FpCap, &d, &inc)?;
    ensure(check_feasible(&cfg, &fp, &d).unwrap().all_pass(), || "fp_cap solution fails check_feasible".into())?;
    let m = confusion(&fp, &d);
    ensure(m[0][1] <= base[0][1] && m[0][2] <= base[0][2], || {
        format!("fp_cap low->mod {} / low->high {} vs incumbent {} / {}", m[0][1], m[0][2], base[0][1], base[0][2])
    })?;

    let (cfg, fnfp) = fit_variant(Variant::FnfpCap, &d, &inc)?;
    ensure(check_feasible(&cfg, &fnfp, &d).unwrap().all_pass(), || "fnfp_cap solution fails check_feasible".into())?;
    let f = confusion(&fnfp, &d);
    ensure(f[2][0] <= base[2][0] && f[2][1] <= base[2][1], || "fnfp_cap under-triage exceeds incumbent".into())?;
    let (r12, r13) = (f[0][1] as f64 / cohort1, f[0][2] as f64 / cohort1);
    ensure(r12 <= 0.30 && r13 <= 0.05, || format!("fnfp_cap rates {r12:.3} / {r13:.3}"))?;
    Ok(format!(
        "fp_cap low->mod/high {}/{} (incumbent {}/{}); fnfp_cap high->low/mod {}/{} (incumbent {}/{}), rates {r12:.3}/{r13:.3}",
        m[0][1], m[0][2], base[0][1], base[0][2], f[2][0], f[2][1], base[2][0], base[2][1]
    ))
}

// ---------------------------------------------------------------- 9

fn partition_totals() -> Outcome {
    let spec = SynthSpec {
        n: 5000,
        p: 5,
        feature_prob: vec![0.3, 0.2, 0.25, 0.35, 0.1],
        true_beta: vec![2.0, 4.0, 6.0, 3.0, 7.0],
        true_tau: vec![6.0, 14.0],
        fall_slope: 0.45,
        fall_intercept: -5.0,
        policy_slope: 0.5,
        policy_intercept: -4.0,
        incumbent_beta: None,
        noise_sd: 1.0,
        seed: 0x0_5eed_0009,
    };
    let records = synth_generate(&spec).unwrap();
    let names: Vec<String> = (0..5).map(|j| format!("x{j}")).collect();
    let part = partition_cohorts(&records, &names, 3).unwrap();
    let c = part.counts;
    let fall = records.iter().filter(|r| r.fell).count();
    let reference = records.iter().filter(|r| !r.fell && !r.targeted_intervention).count();
    let intervention = records.iter().filter(|r| !r.fell && r.targeted_intervention).count();
    ensure((c.fall, c.reference, c.intervention) == (fall, reference, intervention), || format!("{c:?}"))?;
    ensure(c.total() == spec.n && fall + reference + intervention == spec.n, || "counts do not sum to n".into())?;
    ensure(part.train.len() == fall + reference && part.holdout.len() == intervention, || "cohort sizes".into())?;
    let held: std::collections::BTreeSet<&str> = records
        .iter()
        .filter(|r| !r.fell && r.targeted_intervention)
        .map(|r| r.id.as_str())
        .collect();
    ensure(part.train_ids.iter().all(|id| !held.contains(id.as_str())), || "intervention record in training".into())?;
    let mut all: Vec<&str> = part.train_ids.iter().chain(&part.holdout_ids).map(String::as_str).collect();
    all.sort();
    all.dedup();
    ensure(all.len() == spec.n, || "ids not an exact cover".into())?;
    ensure(part.holdout.instances.iter().all(|i| i.feasible == FeasibleSet::full(3)), || "holdout labels".into())?;
    Ok(format!("n={} -> fall {fall}, reference {reference}, intervention {intervention}", spec.n))
}

// ---------------------------------------------------------------- 10

const RUN: &str = r#"
seed = 5

[data]
records = "data/records.csv"
train = "data/train.csv"
test = "data/test.csv"
monotone_pairs = [[0, 1]]

[simulate]
n = 400
feature_prob = [0.4, 0.3, 0.3, 0.2]
true_beta = [3, 4, 6, 7]
true_tau = [6, 14]
fall_slope = 0.5
fall_intercept = -5.5
policy_slope = 0.5
policy_intercept = -4.0
incumbent_beta = [2, 3, 5, 7]
noise_sd = 1.0

[fit]
variant = "fp_cap"
incumbent = { path = "data/incumbent.json" }

[evaluate]
scorecard = { name = "fitted", path = "fit/scorecard.json" }
reference = { name = "incumbent", path = "data/incumbent.json" }

[report]
scorecards = [{ name = "incumbent", path = "data/incumbent.json" }, { name = "fitted", path = "fit/scorecard.json" }]

[grid]
folds = 3
alpha_under = [1, 3]
alpha_over = [1]
lambda1 = [0.3, 0.7]
cso = { max_iters = 200 }
"#;

fn ordscore(dir: &Path, cmd: &str, out: &str) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_ordscore"))
        .arg(cmd)
        .arg("--config")
        .arg(dir.join("run.toml"))
        .arg("--out")
        .arg(dir.join(out))
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.success(), || format!("{cmd} failed: {}", String::from_utf8_lossy(&o.stderr)))
}

/// Element names and attributes in document order, ignoring whitespace and comments.
fn svg_structure(text: &str) -> Vec<String> {
    text.split('<')
        .skip(1)
        .filter(|t| !t.starts_with("!--"))
        .map(|t| t.split('>').next().unwrap_or("").split_whitespace().collect::<Vec<_>>().join(" "))
        .collect()
}

fn compare_dirs(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = fs::read_dir(a).map_err(|e| e.to_string())?.map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let mut other: Vec<_> = fs::read_dir(b).map_err(|e| e.to_string())?.map(|e| e.unwrap().file_name()).collect();
    other.sort();
    ensure(names == other, || format!("file sets differ: {names:?} vs {other:?}"))?;
    for name in &names {
        let (x, y) = (fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
        let name = name.to_string_lossy();
        if name.ends_with(".svg") {
            let (sx, sy) = (String::from_utf8_lossy(&x), String::from_utf8_lossy(&y));
            ensure(svg_structure(&sx) == svg_structure(&sy), || format!("{name} differs structurally"))?;
        } else {
            ensure(x == y, || format!("{name} differs between reruns"))?;
        }
    }
    Ok(names.len())
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    fs::write(dir.join("run.toml"), RUN).unwrap();
    // inputs for later stages live at fixed paths; reruns go to sibling dirs
    let stages = [
        ("simulate", "data", "data_rerun"),
        ("partition", "part", "part_rerun"),
        ("fit", "fit", "fit_rerun"),
        ("evaluate", "eval", "eval_rerun"),
        ("report", "report", "report_rerun"),
        ("grid", "grid", "grid_rerun"),
    ];
    let mut files = 0;
    let mut digest = None;
    for (cmd, a, b) in stages {
        ordscore(dir, cmd, a)?;
        ordscore(dir, cmd, b)?;
        files += compare_dirs(&dir.join(a), &dir.join(b)).map_err(|e| format!("{cmd}: {e}"))?;
        for entry in fs::read_dir(dir.join(a)).unwrap() {
            let text = fs::read_to_string(entry.unwrap().path()).unwrap();
            let d = text.split("config_digest").nth(1).map(|t| {
                t.trim_start_matches(|c: char| !c.is_ascii_hexdigit()).chars().take(64).collect::<String>()
            });
            ensure(d.is_some(), || format!("{cmd}: an output lacks the config digest"))?;
            ensure(digest.is_none() || digest == d, || format!("{cmd}: digest mismatch"))?;
            digest = d;
        }
    }
    Ok(format!("6 commands, {files} files identical across reruns, all carrying the digest"))
}
