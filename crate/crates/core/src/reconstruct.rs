//! Graph-regularized signal reconstruction.
//!
//! Denoising solves `min |Y - X|_F^2 + mu tr(X'LX)`, whose minimizer is
//! `X = (I + mu L)^-1 Y`, via a Cholesky factorization.
//!
//! Imputation solves `min 1/2 tr(X'LX)` subject to `J.X = Y` by gradient
//! projection, `X <- P_Y(X - xi L X)` with `P_Y(A) = Y + A - J.A`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{LaplacianMatrix, SignalMatrix};

/// Binary sampling pattern, `true` where a value was observed.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMask {
    observed: DMatrix<bool>,
}

impl ObservationMask {
    pub fn new(observed: DMatrix<bool>) -> Self {
        let m = ObservationMask { observed };
        let empty = m.empty_columns();
        if !empty.is_empty() {
            log::warn!(
                "observation mask has {} column(s) with no observed entry",
                empty.len()
            );
        }
        m
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        ObservationMask {
            observed: DMatrix::from_element(rows, cols, true),
        }
    }

    /// From a 0/1 matrix; any other value is rejected.
    pub fn from_f64(m: &DMatrix<f64>) -> Result<Self> {
        if let Some(v) = m.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::data(format!(
                "mask entries must be 0 or 1, found {v}"
            )));
        }
        Ok(Self::new(m.map(|v| v == 1.0)))
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        self.observed.map(|b| if b { 1.0 } else { 0.0 })
    }

    pub fn matrix(&self) -> &DMatrix<bool> {
        &self.observed
    }

    pub fn shape(&self) -> (usize, usize) {
        self.observed.shape()
    }

    pub fn is_observed(&self, i: usize, t: usize) -> bool {
        self.observed[(i, t)]
    }

    pub fn density(&self) -> f64 {
        let total = self.observed.len();
        if total == 0 {
            return 0.0;
        }
        self.observed.iter().filter(|&&b| b).count() as f64 / total as f64
    }

    pub fn empty_columns(&self) -> Vec<usize> {
        (0..self.observed.ncols())
            .filter(|&t| !self.observed.column(t).iter().any(|&b| b))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructionParams {
    /// Denoising regularization weight.
    pub mu: f64,
    /// Imputation step; `None` uses `1 / lambda_max(L)`.
    pub xi: Option<f64>,
    /// Relative-change tolerance for imputation (per snapshot).
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ReconstructionParams {
    fn default() -> Self {
        ReconstructionParams {
            mu: 1.0,
            xi: None,
            tol: 1e-8,
            max_iters: 20_000,
        }
    }
}

impl ReconstructionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::config(format!("mu must be > 0, got {}", self.mu)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config(format!("tol must be > 0, got {}", self.tol)));
        }
        if let Some(xi) = self.xi {
            if !(xi > 0.0) {
                return Err(Error::config(format!("xi must be > 0, got {xi}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_iters must be >= 1"));
        }
        Ok(())
    }
}

fn check_rows(y: &SignalMatrix, l: &LaplacianMatrix) -> Result<()> {
    if y.n_nodes() != l.n() {
        return Err(Error::dim(format!(
            "signal is {}x{} but graph has {} nodes",
            y.n_nodes(),
            y.n_snapshots(),
            l.n()
        )));
    }
    Ok(())
}

/// `X = (I + mu L)^-1 Y`.
pub fn denoise(y: &SignalMatrix, l: &LaplacianMatrix, mu: f64) -> Result<SignalMatrix> {
    if !(mu > 0.0) {
        return Err(Error::config(format!("mu must be > 0, got {mu}")));
    }
    check_rows(y, l)?;
    let n = l.n();
    let a = DMatrix::identity(n, n) + l.matrix() * mu;
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Matrix("I + mu L is not positive definite".into()))?;
    let x = chol.solve(&y.values);
    Ok(SignalMatrix::new(x, y.normalized))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputeReport {
    /// Largest iteration count over all snapshots.
    pub iterations: usize,
    /// Snapshots that hit `max_iters` before the tolerance.
    pub unconverged_columns: usize,
    /// Entries filled by the component-mean fallback.
    pub fallback_entries: usize,
    pub xi: f64,
    /// `tr(X'LX)/2` after each iteration, when requested. Snapshots that
    /// stopped early keep contributing their final value.
    pub objective_history: Option<Vec<f64>>,
}

pub fn impute(
    y: &SignalMatrix,
    mask: &ObservationMask,
    l: &LaplacianMatrix,
    params: &ReconstructionParams,
) -> Result<SignalMatrix> {
    impute_with_report(y, mask, l, params, false).map(|(x, _)| x)
}

/// Gradient-projection imputation. Snapshots are independent and processed
/// one after another.
pub fn impute_with_report(
    y: &SignalMatrix,
    mask: &ObservationMask,
    l: &LaplacianMatrix,
    params: &ReconstructionParams,
    track_objective: bool,
) -> Result<(SignalMatrix, ImputeReport)> {
    params.validate()?;
    check_rows(y, l)?;
    if mask.shape() != y.values.shape() {
        return Err(Error::dim(format!(
            "mask is {}x{} but signal is {}x{}",
            mask.shape().0,
            mask.shape().1,
            y.n_nodes(),
            y.n_snapshots()
        )));
    }
    let n = l.n();
    let m = y.n_snapshots();
    let lm = l.matrix();
    let xi = match params.xi {
        Some(v) => v,
        None => {
            let lmax = l.lambda_max(50, 1e-8);
            if lmax > 0.0 {
                1.0 / lmax
            } else {
                1.0
            }
        }
    };

    // Node components over the graph's off-diagonal support.
    let comp = l.components();
    let n_comp = comp.iter().max().map_or(0, |c| c + 1);

    let mut out = DMatrix::zeros(n, m);
    let mut report = ImputeReport {
        iterations: 0,
        unconverged_columns: 0,
        fallback_entries: 0,
        xi,
        objective_history: None,
    };
    let mut histories: Vec<Vec<f64>> = Vec::new();
    let mut x = DVector::zeros(n);
    let mut lx = DVector::zeros(n);
    let mut free: Vec<usize> = Vec::with_capacity(n);

    for t in 0..m {
        // Y <- J.Y, then seed unobserved entries.
        let mut obs_sum = 0.0;
        let mut obs_count = 0usize;
        let mut comp_observed = vec![false; n_comp];
        for i in 0..n {
            if mask.is_observed(i, t) {
                x[i] = y.values[(i, t)];
                obs_sum += x[i];
                obs_count += 1;
                comp_observed[comp[i]] = true;
            } else {
                x[i] = 0.0;
            }
        }
        let col_mean = if obs_count > 0 {
            obs_sum / obs_count as f64
        } else {
            0.0
        };
        free.clear();
        for i in 0..n {
            if mask.is_observed(i, t) {
                continue;
            }
            if comp_observed[comp[i]] {
                free.push(i);
            } else {
                // Under-determined: no observation anywhere in this component.
                x[i] = col_mean;
                report.fallback_entries += 1;
            }
        }

        let mut hist = Vec::new();
        let mut iters = 0;
        let mut converged = free.is_empty();
        if converged {
            iters = 1;
            if track_objective {
                lx.gemv(1.0, lm, &x, 0.0);
                hist.push(0.5 * x.dot(&lx));
            }
        }
        while !converged && iters < params.max_iters {
            lx.gemv(1.0, lm, &x, 0.0);
            let mut diff2 = 0.0;
            for &i in &free {
                let step = xi * lx[i];
                x[i] -= step;
                diff2 += step * step;
            }
            iters += 1;
            if track_objective {
                lx.gemv(1.0, lm, &x, 0.0);
                hist.push(0.5 * x.dot(&lx));
            }
            let base = x.norm();
            let rel = if base > 0.0 {
                diff2.sqrt() / base
            } else {
                diff2.sqrt()
            };
            if rel < params.tol {
                converged = true;
            }
        }
        if !converged {
            report.unconverged_columns += 1;
        }
        report.iterations = report.iterations.max(iters);
        out.set_column(t, &x);
        if track_objective {
            histories.push(hist);
        }
    }

    if report.fallback_entries > 0 {
        log::warn!(
            "{} entries lie in graph components with no observation in their snapshot; filled with the snapshot mean",
            report.fallback_entries
        );
    }
    if report.unconverged_columns > 0 {
        log::warn!(
            "imputation: {} snapshot(s) reached {} iterations before tolerance {}",
            report.unconverged_columns,
            params.max_iters,
            params.tol
        );
    }
    if track_objective {
        let len = histories.iter().map(Vec::len).max().unwrap_or(0);
        let mut total = vec![0.0; len];
        for h in &histories {
            let last = h.last().copied().unwrap_or(0.0);
            for (k, v) in total.iter_mut().enumerate() {
                *v += h.get(k).copied().unwrap_or(last);
            }
        }
        report.objective_history = Some(total);
    }
    Ok((SignalMatrix::new(out, y.normalized), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{laplacian, vector_to_adjacency, EdgeWeightVector, NodeLabel, SensorGraph};
    use nalgebra::dmatrix;

    fn path3() -> LaplacianMatrix {
        laplacian(&vector_to_adjacency(
            &EdgeWeightVector::new(3, vec![1.0, 0.0, 1.0]).unwrap(),
        ))
    }

    #[test]
    fn denoise_two_node_hand_solution() {
        let l = laplacian(&vector_to_adjacency(
            &EdgeWeightVector::new(2, vec![1.0]).unwrap(),
        ));
        let y = SignalMatrix::new(dmatrix![1.0; 0.0], true);
        let x = denoise(&y, &l, 1.0).unwrap();
        assert!((x.values[(0, 0)] - 2.0 / 3.0).abs() < 1e-12);
        assert!((x.values[(1, 0)] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn denoise_empty_graph_is_identity() {
        let l = laplacian(&SensorGraph::empty(NodeLabel::anonymous(3)));
        let y = SignalMatrix::new(dmatrix![1.0, 2.0; -3.0, 0.5; 7.0, 1.0], true);
        assert_eq!(denoise(&y, &l, 5.0).unwrap(), y);
    }

    #[test]
    fn denoise_tiny_mu_is_near_identity() {
        let y = SignalMatrix::new(dmatrix![1.0, 2.0; -3.0, 0.5; 7.0, 1.0], true);
        let x = denoise(&y, &path3(), 1e-12).unwrap();
        assert!((x.values - &y.values).amax() < 1e-9);
        assert!(denoise(&y, &path3(), 0.0).is_err());
        assert!(denoise(&y.columns(0..1), &path3(), 1.0).is_ok());
    }

    #[test]
    fn impute_path_harmonic_midpoint() {
        let y = SignalMatrix::new(dmatrix![1.0; 0.0; 3.0], true);
        let mask = ObservationMask::new(dmatrix![true; false; true]);
        let params = ReconstructionParams {
            tol: 1e-14,
            ..Default::default()
        };
        let x = impute(&y, &mask, &path3(), &params).unwrap();
        assert!((x.values[(1, 0)] - 2.0).abs() < 1e-10);
        assert_eq!(x.values[(0, 0)], 1.0);
        assert_eq!(x.values[(2, 0)], 3.0);
    }

    #[test]
    fn impute_full_mask_returns_input() {
        let y = SignalMatrix::new(dmatrix![1.0, 4.0; 0.5, -2.0; 3.0, 9.0], true);
        let (x, rep) = impute_with_report(
            &y,
            &ObservationMask::full(3, 2),
            &path3(),
            &ReconstructionParams::default(),
            false,
        )
        .unwrap();
        assert_eq!(x, y);
        assert_eq!(rep.iterations, 1);
    }

    #[test]
    fn impute_unobserved_component_falls_back_to_mean() {
        // nodes 0-1 connected, node 2 isolated and missing
        let l = laplacian(&vector_to_adjacency(
            &EdgeWeightVector::new(3, vec![1.0, 0.0, 0.0]).unwrap(),
        ));
        let y = SignalMatrix::new(dmatrix![2.0; 4.0; 100.0], true);
        let mask = ObservationMask::new(dmatrix![true; true; false]);
        let (x, rep) =
            impute_with_report(&y, &mask, &l, &ReconstructionParams::default(), false).unwrap();
        assert_eq!(x.values[(2, 0)], 3.0);
        assert_eq!(rep.fallback_entries, 1);
    }

    #[test]
    fn impute_zeroes_unobserved_input() {
        // garbage in missing slots must not leak into the result
        let y1 = SignalMatrix::new(dmatrix![1.0; 55.0; 3.0], true);
        let y2 = SignalMatrix::new(dmatrix![1.0; -8.0; 3.0], true);
        let mask = ObservationMask::new(dmatrix![true; false; true]);
        let p = ReconstructionParams::default();
        assert_eq!(
            impute(&y1, &mask, &path3(), &p).unwrap(),
            impute(&y2, &mask, &path3(), &p).unwrap()
        );
    }

    #[test]
    fn mask_shape_mismatch() {
        let y = SignalMatrix::new(dmatrix![1.0; 0.0; 3.0], true);
        let mask = ObservationMask::full(3, 2);
        assert!(impute(&y, &mask, &path3(), &ReconstructionParams::default()).is_err());
        assert!(ObservationMask::from_f64(&dmatrix![0.0, 0.5]).is_err());
    }
}
