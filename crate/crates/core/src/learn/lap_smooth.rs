//! Laplacian-space smooth-signal graph learning, solved in edge-weight space.
//!
//! With `L = D - W`, `tr(X'LX) = w'z` and `|L|_F^2 = |Sw|^2 + 2|w|^2`, so the
//! problem becomes
//!
//! ```text
//! min  w'z + beta1 (|Sw|^2 + 2|w|^2)   s.t.  w >= 0,  1'w = n/2
//! ```
//!
//! (the trace constraint `tr(L) = n` fixes the total edge weight). It is solved
//! by projected gradient with exact projection onto the scaled simplex.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{apply_s, apply_st, EdgeWeightVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LapSmoothParams {
    pub beta1: f64,
    pub max_iters: usize,
    /// Stop once `|w_k+1 - w_k| <= tol * max(1, |w_k|)`.
    pub tol: f64,
}

impl Default for LapSmoothParams {
    fn default() -> Self {
        LapSmoothParams {
            beta1: 0.4,
            max_iters: 100_000,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LapSmoothResult {
    pub w: EdgeWeightVector,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
}

/// Euclidean projection onto `{x >= 0, sum x = total}` (sort-based).
pub fn project_scaled_simplex(v: &[f64], total: f64) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumsum += uk;
        let t = (cumsum - total) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

pub fn lap_smooth_objective(w: &[f64], z: &[f64], n: usize, beta1: f64) -> f64 {
    let mut d = vec![0.0; n];
    apply_s(w, n, &mut d);
    let lin: f64 = w.iter().zip(z).map(|(a, b)| a * b).sum();
    let dd: f64 = d.iter().map(|v| v * v).sum();
    let ww: f64 = w.iter().map(|v| v * v).sum();
    lin + beta1 * (dd + 2.0 * ww)
}

pub fn solve_lap_smooth(z: &EdgeWeightVector, params: &LapSmoothParams) -> Result<LapSmoothResult> {
    if !(params.beta1 > 0.0) {
        return Err(Error::config(format!(
            "beta1 must be > 0, got {}",
            params.beta1
        )));
    }
    if !(params.tol > 0.0) || params.max_iters == 0 {
        return Err(Error::config(
            "lap-smooth tol must be > 0 and max_iters >= 1",
        ));
    }
    let n = z.n();
    let len = z.len();
    let zs = z.as_slice();
    let total = 0.5 * n as f64;
    // Hessian 2 beta1 (S'S + 2I) has largest eigenvalue 2 beta1 (2(n-1) + 2).
    let step = 1.0 / (4.0 * params.beta1 * n as f64);

    let mut w = vec![total / len as f64; len];
    let mut d = vec![0.0; n];
    let mut std = vec![0.0; len];
    let mut trial = vec![0.0; len];
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=params.max_iters {
        apply_s(&w, n, &mut d);
        apply_st(&d, &mut std);
        for i in 0..len {
            let g = zs[i] + 2.0 * params.beta1 * (std[i] + 2.0 * w[i]);
            trial[i] = w[i] - step * g;
        }
        let next = project_scaled_simplex(&trial, total);
        let diff = next
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = w.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        w = next;
        iterations = k;
        if diff <= params.tol * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "lap-smooth reached {} iterations without converging",
            params.max_iters
        );
    }
    let objective = lap_smooth_objective(&w, zs, n, params.beta1);
    Ok(LapSmoothResult {
        w: EdgeWeightVector::from_raw(n, w),
        iterations,
        converged,
        objective,
    })
}
