//! Brute-force LP reference used only by tests.
//!
//! Enumerates every basis of the slack-augmented system, keeps the feasible
//! basic solutions and takes the best objective. Unboundedness is detected by
//! running the same enumeration on the dual feasibility system.

#![allow(dead_code)]

#[derive(Debug, Clone, PartialEq)]
pub enum OracleResult {
    Optimal { objective: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

/// `max c'x s.t. Ax <= b, x >= 0` by vertex enumeration.
pub fn enumerate(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> OracleResult {
    let best = best_vertex(c, a, b);
    let Some((objective, x)) = best else {
        return OracleResult::Infeasible;
    };
    // Dual: min b'y s.t. A'y >= c, y >= 0, i.e. -A'y <= -c.
    let m = a.len();
    let n = c.len();
    let dual_rows: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| -a[i][j]).collect()).collect();
    let dual_b: Vec<f64> = c.iter().map(|v| -v).collect();
    if best_vertex(&vec![0.0; m], &dual_rows, &dual_b).is_none() {
        return OracleResult::Unbounded;
    }
    OracleResult::Optimal { objective, x }
}

fn best_vertex(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<(f64, Vec<f64>)> {
    let m = a.len();
    let n = c.len();
    if m == 0 {
        // Only x = 0 is a vertex of the nonnegative orthant.
        return Some((0.0, vec![0.0; n]));
    }
    let total = n + m;
    let column = |j: usize| -> Vec<f64> {
        if j < n {
            (0..m).map(|i| a[i][j]).collect()
        } else {
            (0..m).map(|i| if i == j - n { 1.0 } else { 0.0 }).collect()
        }
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut subset: Vec<usize> = (0..m).collect();
    loop {
        let mut mat: Vec<Vec<f64>> = vec![vec![0.0; m]; m];
        for (k, &j) in subset.iter().enumerate() {
            for (i, v) in column(j).into_iter().enumerate() {
                mat[i][k] = v;
            }
        }
        if let Some(xb) = gauss_solve(mat, b.to_vec()) {
            if xb.iter().all(|&v| v >= -1e-9) {
                let mut x = vec![0.0; n];
                for (k, &j) in subset.iter().enumerate() {
                    if j < n {
                        x[j] = xb[k];
                    }
                }
                let obj: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                if best.as_ref().is_none_or(|(bo, _)| obj > *bo) {
                    best = Some((obj, x));
                }
            }
        }
        if !next_combination(&mut subset, total) {
            break;
        }
    }
    best
}

fn next_combination(s: &mut [usize], total: usize) -> bool {
    let k = s.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if s[i] < total - k + i {
            s[i] += 1;
            for j in i + 1..k {
                s[j] = s[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[r][k] -= f * a[col][k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Random integer LP with `m, n <= 6`, entries in `[-5, 5]`.
pub fn random_integer_lp(rng: &mut impl rand::Rng) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let m = rng.random_range(1..=6);
    let n = rng.random_range(1..=6);
    let mut draw = || rng.random_range(-5i32..=5) as f64;
    let c: Vec<f64> = (0..n).map(|_| draw()).collect();
    let a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| draw()).collect()).collect();
    let b: Vec<f64> = (0..m).map(|_| draw()).collect();
    (c, a, b)
}
