//! Euclidean projection onto a polyhedron `{x : A x >= b}`.
//!
//! Solved as a least-distance program through Lawson–Hanson non-negative least
//! squares, which terminates in finitely many active-set steps.

use nalgebra::{DMatrix, DVector};

/// One inequality `a . x >= b`.
#[derive(Debug, Clone)]
pub struct Halfspace {
    pub a: Vec<f64>,
    pub b: f64,
}

/// Closest point to `y` satisfying every half-space, or `None` if they are inconsistent.
pub fn project_polyhedron(y: &[f64], constraints: &[Halfspace]) -> Option<Vec<f64>> {
    let n = y.len();
    let m = constraints.len();
    // h = b - A y; the problem becomes min ||z|| s.t. A z >= h with x = y + z.
    let h: Vec<f64> = constraints
        .iter()
        .map(|c| c.b - c.a.iter().zip(y).map(|(a, v)| a * v).sum::<f64>())
        .collect();
    if h.iter().all(|&v| v <= 0.0) {
        return Some(y.to_vec());
    }
    let mut e = DMatrix::<f64>::zeros(n + 1, m);
    for (col, c) in constraints.iter().enumerate() {
        for (row, &a) in c.a.iter().enumerate() {
            e[(row, col)] = a;
        }
        e[(n, col)] = h[col];
    }
    let mut f = DVector::<f64>::zeros(n + 1);
    f[n] = 1.0;
    let u = nnls(&e, &f);
    let r = &e * &u - &f;
    if r.norm() < 1e-12 || r[n].abs() < 1e-300 {
        return None;
    }
    Some((0..n).map(|j| y[j] - r[j] / r[n]).collect())
}

/// `argmin ||E u - f||` subject to `u >= 0`.
pub(crate) fn nnls(e: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    let m = e.ncols();
    let mut u = DVector::<f64>::zeros(m);
    let mut passive = vec![false; m];
    let scale = e.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0) * f.norm().max(1.0);
    let tol = 1e-13 * scale * (m.max(1) as f64);
    let max_outer = 3 * m + 10;

    for _ in 0..max_outer {
        let w = e.transpose() * (f - e * &u);
        let candidate = (0..m)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&a, &b| w[a].partial_cmp(&w[b]).unwrap());
        let Some(t) = candidate else { break };
        passive[t] = true;

        loop {
            let idx: Vec<usize> = (0..m).filter(|&j| passive[j]).collect();
            let z_p = least_squares(e, f, &idx);
            let mut z = DVector::<f64>::zeros(m);
            for (k, &j) in idx.iter().enumerate() {
                z[j] = z_p[k];
            }
            if idx.iter().all(|&j| z[j] > 0.0) {
                u = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for &j in &idx {
                if z[j] <= 0.0 {
                    let denom = u[j] - z[j];
                    if denom > 0.0 {
                        alpha = alpha.min(u[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            u += (z - &u) * alpha;
            let mut moved = false;
            for &j in &idx {
                if u[j] <= tol * 1e-3 {
                    passive[j] = false;
                    u[j] = 0.0;
                    moved = true;
                }
            }
            if !moved {
                // numerically stuck: drop the smallest passive entry
                if let Some(&j) = idx.iter().min_by(|&&a, &&b| u[a].partial_cmp(&u[b]).unwrap()) {
                    passive[j] = false;
                    u[j] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    u
}

fn least_squares(e: &DMatrix<f64>, f: &DVector<f64>, cols: &[usize]) -> DVector<f64> {
    let sub = e.select_columns(cols);
    let svd = sub.svd(true, true);
    svd.solve(f, 1e-14).unwrap_or_else(|_| DVector::zeros(cols.len()))
}
