#![allow(dead_code)]

use incentive_core::algorithms::Plant;
use incentive_core::grid::{SafetyMode, SafetySpec, SensitivityModel};
use incentive_core::linalg::Matrix;
use incentive_core::response::{ResponseFamily, ResponseModel, ResponseParams};

/// Plant with `R` given, `X = 0`, flat offset and a lower voltage bound.
pub fn plant(r: &[Vec<f64>], v_tilde: f64, v_lower: f64, params: ResponseParams<f64>, family: ResponseFamily<f64>) -> Plant<f64> {
    let n = r.len();
    let sens = SensitivityModel::from_parts(Matrix::from_rows(r), Matrix::zeros(n, n), vec![v_tilde; n], vec![0.0; n], vec![0.0; n]).unwrap();
    let spec = SafetySpec::uniform(n, v_lower, 2.0, SafetyMode::LowerOnly).unwrap();
    Plant::new(sens, spec, ResponseModel::new(params, family).unwrap(), vec![0.0; n]).unwrap()
}

fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    Some((0..n).map(|k| b[k] / a[k][k]).collect())
}

/// Smallest `cᵀx` over the vertices of `{x : aᵀx ≤ b for every row}`.
pub fn vertex_optimum(c: &[f64], rows: &[(Vec<f64>, f64)]) -> Option<f64> {
    let n = c.len();
    let m = rows.len();
    if m < n {
        return None;
    }
    let mut pick: Vec<usize> = (0..n).collect();
    let mut best: Option<f64> = None;
    loop {
        let a = pick.iter().map(|&r| rows[r].0.clone()).collect();
        let b = pick.iter().map(|&r| rows[r].1).collect();
        if let Some(x) = solve_small(a, b) {
            if rows.iter().all(|(a, b)| a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-9) {
                let v: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = Some(best.map_or(v, |w| w.min(v)));
            }
        }
        let Some(k) = (0..n).rev().find(|&k| pick[k] < m - n + k) else { break };
        pick[k] += 1;
        for j in k + 1..n {
            pick[j] = pick[j - 1] + 1;
        }
    }
    best
}
