use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{add_noise, denormalize, make_mask, Dataset};
use crate::error::{Error, Result};
use crate::graph::{
    laplacian, pairwise_distance_vector, vector_to_adjacency, EdgeWeightVector, SensorGraph,
    SignalMatrix,
};
use crate::learn::{solve_adj_smooth, solve_igl, solve_lap_smooth, IglParams, LapSmoothParams};
use crate::physics::PriorGraph;
use crate::reconstruct::{denoise, impute, ObservationMask, ReconstructionParams};

use super::metrics::{mae_selected, rmse_selected};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Physics,
    LapSmooth,
    AdjSmooth,
    Igl,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Physics,
        Method::LapSmooth,
        Method::AdjSmooth,
        Method::Igl,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Physics => "physics",
            Method::LapSmooth => "lap-smooth",
            Method::AdjSmooth => "adj-smooth",
            Method::Igl => "igl",
        }
    }

    /// Column title in result tables.
    pub fn title(&self) -> &'static str {
        match self {
            Method::Physics => "Physics",
            Method::LapSmooth => "Lap-Smooth",
            Method::AdjSmooth => "Adj-Smooth",
            Method::Igl => "IGL",
        }
    }

    /// Whether the graph is learned from data (everything but `Physics`).
    pub fn is_learned(&self) -> bool {
        !matches!(self, Method::Physics)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown method '{s}' (expected physics, lap-smooth, adj-smooth or igl)"
                ))
            })
    }
}

/// One hyperparameter setting. Parameters a method does not use are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hyper {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upsilon: Option<f64>,
    pub mu: f64,
}

impl Hyper {
    /// Tie-break order: `(upsilon, beta, mu, alpha)`.
    fn order_key(&self) -> [f64; 4] {
        let v = |o: Option<f64>| o.unwrap_or(0.0);
        [v(self.upsilon), v(self.beta), self.mu, v(self.alpha)]
    }

    fn same_graph(&self, other: &Hyper) -> bool {
        self.alpha == other.alpha && self.beta == other.beta && self.upsilon == other.upsilon
    }
}

impl std::fmt::Display for Hyper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some(a) = self.alpha {
            write!(f, "alpha={a} ")?;
        }
        if let Some(b) = self.beta {
            write!(f, "beta={b} ")?;
        }
        if let Some(u) = self.upsilon {
            write!(f, "upsilon={u} ")?;
        }
        write!(f, "mu={}", self.mu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvGrid {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub upsilon: Vec<f64>,
    pub mu: Vec<f64>,
}

impl Default for CvGrid {
    fn default() -> Self {
        let quad = vec![0.1, 0.2, 0.4, 0.8];
        CvGrid {
            alpha: vec![1.0],
            beta: quad.clone(),
            upsilon: quad,
            mu: vec![0.1, 0.5, 1.0, 5.0],
        }
    }
}

impl CvGrid {
    /// Grid points relevant to `method`, in tie-break order.
    pub fn points(&self, method: Method) -> Vec<Hyper> {
        let some = |v: &[f64]| v.iter().map(|&x| Some(x)).collect::<Vec<_>>();
        let none = vec![None];
        let (alphas, betas, upsilons) = match method {
            Method::Physics => (none.clone(), none.clone(), none),
            Method::LapSmooth => (none.clone(), some(&self.beta), none),
            Method::AdjSmooth => (some(&self.alpha), some(&self.beta), none),
            Method::Igl => (some(&self.alpha), some(&self.beta), some(&self.upsilon)),
        };
        let mut out = Vec::new();
        for &alpha in &alphas {
            for &beta in &betas {
                for &upsilon in &upsilons {
                    for &mu in &self.mu {
                        out.push(Hyper {
                            alpha,
                            beta,
                            upsilon,
                            mu,
                        });
                    }
                }
            }
        }
        out.sort_by(|a, b| {
            let (ka, kb) = (a.order_key(), b.order_key());
            ka.iter()
                .zip(&kb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        out.dedup();
        out
    }

    fn validate(&self, methods: &[Method]) -> Result<()> {
        let need = |name: &str, v: &[f64], used: bool| -> Result<()> {
            if used && v.is_empty() {
                return Err(Error::config(format!("cv_grid.{name} is empty")));
            }
            if let Some(x) = v.iter().find(|x| !x.is_finite()) {
                return Err(Error::config(format!("cv_grid.{name} contains {x}")));
            }
            Ok(())
        };
        let uses = |f: fn(&Method) -> bool| methods.iter().any(f);
        need(
            "alpha",
            &self.alpha,
            uses(|m| matches!(m, Method::AdjSmooth | Method::Igl)),
        )?;
        need("beta", &self.beta, uses(|m| m.is_learned()))?;
        need("upsilon", &self.upsilon, uses(|m| matches!(m, Method::Igl)))?;
        need("mu", &self.mu, true)?;
        if self.alpha.iter().any(|&a| a <= 0.0) {
            return Err(Error::config("cv_grid.alpha values must be > 0"));
        }
        if self.mu.iter().any(|&m| m <= 0.0) {
            return Err(Error::config("cv_grid.mu values must be > 0"));
        }
        if self.beta.iter().chain(&self.upsilon).any(|&v| v < 0.0) {
            return Err(Error::config(
                "cv_grid.beta and cv_grid.upsilon values must be >= 0",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MetricUnits {
    /// Sensor units (bar, degC), after undoing the min-max normalization.
    #[default]
    Physical,
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ImputationEntries {
    /// Score every entry, observed and imputed.
    #[default]
    All,
    /// Score only the entries hidden by the mask.
    Missing,
}

/// How squared distances are aggregated over snapshots before learning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DistanceScaling {
    #[default]
    Sum,
    /// Divide by the snapshot count, so hyperparameters do not depend on data length.
    Mean,
}

/// Pairwise squared distances of the rows of `x`, aggregated per `scaling`.
pub fn scaled_distances(x: &SignalMatrix, scaling: DistanceScaling) -> Result<EdgeWeightVector> {
    let z = pairwise_distance_vector(x)?;
    Ok(match scaling {
        DistanceScaling::Sum => z,
        DistanceScaling::Mean => scale_z(z, x.n_snapshots()),
    })
}

fn scale_z(z: EdgeWeightVector, snapshots: usize) -> EdgeWeightVector {
    let n = z.n();
    let c = 1.0 / snapshots as f64;
    EdgeWeightVector::from_raw(n, z.into_vec().into_iter().map(|v| v * c).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub eps0: f64,
    pub k_max: usize,
    /// Weights below this fraction of the largest are dropped from learned graphs.
    pub output_threshold: f64,
    /// Threshold applied to each block of the physics prior.
    pub prior_threshold: f64,
    pub lap_smooth_max_iters: usize,
    pub lap_smooth_tol: f64,
    pub impute_tol: f64,
    pub impute_max_iters: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let igl = IglParams::default();
        let lap = LapSmoothParams::default();
        let rec = ReconstructionParams::default();
        SolverSettings {
            eps0: igl.eps0,
            k_max: igl.k_max,
            output_threshold: igl.output_threshold,
            prior_threshold: 0.1,
            lap_smooth_max_iters: lap.max_iters,
            lap_smooth_tol: lap.tol,
            impute_tol: rec.tol,
            impute_max_iters: rec.max_iters,
        }
    }
}

/// Where the experiment's data comes from. With neither field set the bundled
/// default generator configuration is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DataSpec {
    /// Directory written by `igl generate`.
    pub dir: Option<PathBuf>,
    /// Generation config to run before the experiment.
    pub generate: Option<PathBuf>,
}

/// Experiment definition, read from TOML:
///
/// ```toml
/// methods = ["physics", "lap-smooth", "adj-smooth", "igl"]
/// denoise_sigma = 0.3
/// rhos = [0.3, 0.5, 0.7, 0.9]
/// cv_folds = 5
/// seed = 2024
/// distance_scaling = "mean"
///
/// [cv_grid]
/// alpha = [1.0]
/// beta = [0.1, 0.2, 0.4, 0.8]
/// upsilon = [0.1, 0.2, 0.4, 0.8]
/// mu = [0.1, 0.5, 1.0, 5.0]
///
/// [data]
/// generate = "generate.toml"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub methods: Vec<Method>,
    /// Std of the noise added to (normalized) test data for the denoising scenario.
    pub denoise_sigma: f64,
    pub rhos: Vec<f64>,
    pub cv_folds: usize,
    pub cv_grid: CvGrid,
    pub seed: u64,
    pub metric_units: MetricUnits,
    pub imputation_entries: ImputationEntries,
    pub distance_scaling: DistanceScaling,
    pub solver: SolverSettings,
    pub data: DataSpec,
    /// Network for the physics prior; the bundled network when absent.
    pub topology: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            methods: Method::ALL.to_vec(),
            denoise_sigma: 0.3,
            rhos: vec![0.3, 0.5, 0.7, 0.9],
            cv_folds: 5,
            cv_grid: CvGrid::default(),
            seed: 2024,
            metric_units: MetricUnits::Physical,
            imputation_entries: ImputationEntries::All,
            distance_scaling: DistanceScaling::Mean,
            solver: SolverSettings::default(),
            data: DataSpec::default(),
            topology: None,
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<ExperimentSpec> {
        let spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| Error::config(format!("experiment spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Parse and resolve relative paths against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<ExperimentSpec> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec = Self::from_toml_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        spec.data.dir.iter_mut().for_each(fix);
        spec.data.generate.iter_mut().for_each(fix);
        spec.topology.iter_mut().for_each(fix);
        fix(&mut spec.output_dir);
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::config("experiment needs at least one method"));
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(Error::config("methods lists a method twice"));
        }
        if !(self.denoise_sigma >= 0.0) {
            return Err(Error::config("denoise_sigma must be >= 0"));
        }
        if let Some(r) = self.rhos.iter().find(|&&r| !(r > 0.0 && r <= 1.0)) {
            return Err(Error::config(format!("rhos must lie in (0, 1], got {r}")));
        }
        if self.cv_folds < 2 {
            return Err(Error::config("cv_folds must be >= 2"));
        }
        if self.data.dir.is_some() && self.data.generate.is_some() {
            return Err(Error::config(
                "data.dir and data.generate are mutually exclusive",
            ));
        }
        let s = &self.solver;
        if !(s.output_threshold > 0.0 && s.output_threshold < 1.0) {
            return Err(Error::config("solver.output_threshold must lie in (0, 1)"));
        }
        if !(s.impute_tol > 0.0) || s.impute_max_iters == 0 {
            return Err(Error::config(
                "solver.impute_tol must be > 0 and impute_max_iters >= 1",
            ));
        }
        self.cv_grid.validate(&self.methods)
    }

    fn igl_params(&self, h: &Hyper) -> IglParams {
        IglParams {
            alpha: h.alpha.unwrap_or(1.0),
            beta: h.beta.unwrap_or(0.0),
            upsilon: h.upsilon.unwrap_or(0.0),
            gamma: None,
            eps0: self.solver.eps0,
            k_max: self.solver.k_max,
            normalize_output: true,
            output_threshold: self.solver.output_threshold,
        }
    }

    fn impute_params(&self) -> ReconstructionParams {
        ReconstructionParams {
            tol: self.solver.impute_tol,
            max_iters: self.solver.impute_max_iters,
            ..ReconstructionParams::default()
        }
    }
}

/// Build the graph `method` uses from distances `z` (already scaled).
/// Learned graphs are max-normalized and thresholded.
pub fn learn_graph(
    method: Method,
    z: &EdgeWeightVector,
    prior: &PriorGraph,
    h: &Hyper,
    spec: &ExperimentSpec,
) -> Result<SensorGraph> {
    let labels = prior.graph.labels().to_vec();
    let w = match method {
        Method::Physics => return Ok(prior.graph.clone()),
        Method::LapSmooth => {
            let params = LapSmoothParams {
                beta1: h.beta.unwrap_or(0.0),
                max_iters: spec.solver.lap_smooth_max_iters,
                tol: spec.solver.lap_smooth_tol,
            };
            solve_lap_smooth(z, &params)?
                .w
                .normalized_thresholded(spec.solver.output_threshold)
        }
        Method::AdjSmooth => solve_adj_smooth(z, &spec.igl_params(h))?.0,
        Method::Igl => solve_igl(z, Some(&prior.knowledge()), &spec.igl_params(h))?.0,
    };
    vector_to_adjacency(&w).with_labels(labels)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvOutcome {
    pub best: Hyper,
    pub best_score: f64,
    /// Mean held-out RMSE per grid point, in tie-break order.
    pub scores: Vec<(Hyper, f64)>,
}

fn to_units(x: &SignalMatrix, data: &Dataset, units: MetricUnits) -> Result<DMatrix<f64>> {
    match units {
        MetricUnits::Normalized => Ok(x.values.clone()),
        MetricUnits::Physical => Ok(denormalize(x, &data.labels, &data.norm_stats)?.values),
    }
}

fn fold_bounds(m: usize, folds: usize) -> Vec<std::ops::Range<usize>> {
    (0..folds)
        .map(|k| k * m / folds..(k + 1) * m / folds)
        .collect()
}

/// Select the grid point with the lowest mean held-out denoising RMSE over
/// contiguous folds of the training snapshots.
pub fn cross_validate(
    data: &Dataset,
    prior: &PriorGraph,
    method: Method,
    spec: &ExperimentSpec,
) -> Result<CvOutcome> {
    let points = spec.cv_grid.points(method);
    if points.is_empty() {
        return Err(Error::config(format!("empty cv grid for {method}")));
    }
    let m = data.train_noisy.n_snapshots();
    let folds = spec.cv_folds;
    if m < folds {
        return Err(Error::config(format!(
            "{m} training snapshots cannot form {folds} folds"
        )));
    }
    let bounds = fold_bounds(m, folds);
    let fold_z = bounds
        .iter()
        .map(|r| pairwise_distance_vector(&data.train_noisy.columns(r.clone())))
        .collect::<Result<Vec<_>>>()?;

    let mut totals = vec![0.0; points.len()];
    for (k, held) in bounds.iter().enumerate() {
        let mut z = vec![0.0; fold_z[k].len()];
        let mut count = 0;
        for (j, fz) in fold_z.iter().enumerate() {
            if j != k {
                z.iter_mut().zip(fz.as_slice()).for_each(|(a, b)| *a += b);
                count += bounds[j].len();
            }
        }
        let mut z = EdgeWeightVector::from_raw(data.n_nodes(), z);
        if spec.distance_scaling == DistanceScaling::Mean {
            z = scale_z(z, count);
        }
        let noisy = data.train_noisy.columns(held.clone());
        let clean = to_units(
            &data.train_clean.columns(held.clone()),
            data,
            spec.metric_units,
        )?;

        let mut graph: Option<(Hyper, Result<SensorGraph>)> = None;
        for (p, h) in points.iter().enumerate() {
            if !graph.as_ref().is_some_and(|(g, _)| g.same_graph(h)) {
                graph = Some((*h, learn_graph(method, &z, prior, h, spec)));
            }
            let score = match &graph.as_ref().unwrap().1 {
                Ok(g) => {
                    let x = denoise(&noisy, &laplacian(g), h.mu)?;
                    rmse_selected(&to_units(&x, data, spec.metric_units)?, &clean, None)?
                }
                Err(e) => {
                    log::warn!("{method} {h}: fold {k}: {e}");
                    f64::INFINITY
                }
            };
            totals[p] += score / folds as f64;
        }
    }

    let mut best = 0;
    for p in 1..points.len() {
        if totals[p] < totals[best] {
            best = p;
        }
    }
    if !totals[best].is_finite() {
        return Err(Error::Divergence {
            iteration: 0,
            reason: format!("{method}: graph learning failed at every grid point"),
        });
    }
    Ok(CvOutcome {
        best: points[best],
        best_score: totals[best],
        scores: points.into_iter().zip(totals).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum Scenario {
    Denoising { sigma: f64 },
    Imputation { rho: f64 },
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scenario::Denoising { sigma } => write!(f, "Denoising (sigma = {sigma})"),
            Scenario::Imputation { rho } => write!(f, "Imputation (rho = {rho})"),
        }
    }
}

/// One (scenario, method) cell; `rmse`/`mae` are absent when the method failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRecord {
    pub scenario: String,
    #[serde(flatten)]
    pub setting: Scenario,
    pub method: Method,
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
    pub best: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultsTable {
    pub methods: Vec<Method>,
    pub scenarios: Vec<Scenario>,
    /// Scenario-major, methods in column order.
    pub records: Vec<CellRecord>,
}

impl ResultsTable {
    fn new(methods: Vec<Method>, scenarios: Vec<Scenario>, cells: Vec<Result<(f64, f64)>>) -> Self {
        let k = methods.len();
        let mut records = Vec::with_capacity(cells.len());
        for (s, chunk) in scenarios.iter().zip(cells.chunks(k)) {
            let best = if k > 1 {
                chunk
                    .iter()
                    .enumerate()
                    .filter_map(|(i, c)| c.as_ref().ok().map(|(r, _)| (i, *r)))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(i, _)| i)
            } else {
                None
            };
            for (i, c) in chunk.iter().enumerate() {
                let (rmse, mae, error) = match c {
                    Ok((r, m)) => (Some(*r), Some(*m), None),
                    Err(e) => (None, None, Some(e.to_string())),
                };
                records.push(CellRecord {
                    scenario: s.to_string(),
                    setting: *s,
                    method: methods[i],
                    rmse,
                    mae,
                    best: best == Some(i),
                    error,
                });
            }
        }
        ResultsTable {
            methods,
            scenarios,
            records,
        }
    }

    pub fn get(&self, scenario: usize, method: Method) -> Option<&CellRecord> {
        let col = self.methods.iter().position(|&m| m == method)?;
        self.records.get(scenario * self.methods.len() + col)
    }

    /// Aligned plain-text table: one row per scenario, an RMSE and MAE column
    /// per method, `*` marking the lowest RMSE in each row.
    pub fn render(&self) -> String {
        let first: Vec<String> = std::iter::once("Scenario".to_owned())
            .chain(self.scenarios.iter().map(|s| s.to_string()))
            .collect();
        let w0 = first.iter().map(String::len).max().unwrap_or(0);
        let cell = |r: &CellRecord| match (r.rmse, r.mae) {
            (Some(a), Some(b)) => {
                let mark = if r.best { "*" } else { " " };
                (format!("{a:.4}{mark}"), format!("{b:.4}{mark}"))
            }
            _ => ("n/a ".to_owned(), "n/a ".to_owned()),
        };
        let k = self.methods.len();
        let mut cols: Vec<(String, Vec<String>, Vec<String>)> = self
            .methods
            .iter()
            .map(|m| (m.title().to_owned(), Vec::new(), Vec::new()))
            .collect();
        for (idx, r) in self.records.iter().enumerate() {
            let (a, b) = cell(r);
            cols[idx % k].1.push(a);
            cols[idx % k].2.push(b);
        }
        let widths: Vec<(usize, usize)> = cols
            .iter()
            .map(|(title, a, b)| {
                let wa = a.iter().map(String::len).chain([4]).max().unwrap();
                let wb = b.iter().map(String::len).chain([3]).max().unwrap();
                let span = wa + 2 + wb;
                if title.len() > span {
                    (wa + title.len() - span, wb)
                } else {
                    (wa, wb)
                }
            })
            .collect();

        let mut out = String::new();
        let _ = write!(out, "{:w0$}", "");
        for ((title, _, _), (wa, wb)) in cols.iter().zip(&widths) {
            let _ = write!(out, " | {:^w$}", title, w = wa + 2 + wb);
        }
        out.push('\n');
        let _ = write!(out, "{:w0$}", first[0]);
        for (wa, wb) in &widths {
            let _ = write!(out, " | {:>wa$}  {:>wb$}", "RMSE", "MAE");
        }
        out.push('\n');
        let total = w0 + widths.iter().map(|(a, b)| a + b + 5).sum::<usize>();
        out.push_str(&"-".repeat(total));
        out.push('\n');
        for (s, label) in first[1..].iter().enumerate() {
            let _ = write!(out, "{label:w0$}");
            for (c, (wa, wb)) in widths.iter().enumerate() {
                let _ = write!(out, " | {:>wa$}  {:>wb$}", cols[c].1[s], cols[c].2[s]);
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSelection {
    pub method: Method,
    pub hyper: Option<Hyper>,
    pub cv_rmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub table: ResultsTable,
    pub selections: Vec<MethodSelection>,
    /// Graph per method, `None` where learning failed.
    pub graphs: Vec<(Method, Option<SensorGraph>)>,
    /// `|W_igl - W_adj|` when both graphs are available.
    pub heatmap: Option<DMatrix<f64>>,
}

fn sub_seed(seed: u64, tag: u64) -> u64 {
    seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Cross-validate and learn one graph per method on the noisy training data,
/// then score denoising of noisy test data and imputation of masked test data.
pub fn run_experiment(
    spec: &ExperimentSpec,
    data: &Dataset,
    prior: &PriorGraph,
) -> Result<ExperimentReport> {
    spec.validate()?;
    let n = data.n_nodes();
    if prior.graph.n() != n {
        return Err(Error::dim(format!(
            "prior has {} nodes, data has {n}",
            prior.graph.n()
        )));
    }
    let prior_ids: Vec<u32> = prior.graph.labels().iter().map(|l| l.id).collect();
    let data_ids: Vec<u32> = data.labels.iter().map(|l| l.id).collect();
    if prior_ids != data_ids {
        return Err(Error::data("prior and data list different node ids"));
    }
    let z = scaled_distances(&data.train_noisy, spec.distance_scaling)?;

    let mut selections = Vec::new();
    let mut graphs = Vec::new();
    for &method in &spec.methods {
        let outcome = cross_validate(data, prior, method, spec).and_then(|cv| {
            log::info!(
                "{method}: selected {} (cv rmse {:.6})",
                cv.best,
                cv.best_score
            );
            let g = learn_graph(method, &z, prior, &cv.best, spec)?;
            Ok((cv, g))
        });
        match outcome {
            Ok((cv, g)) => {
                selections.push(MethodSelection {
                    method,
                    hyper: Some(cv.best),
                    cv_rmse: Some(cv.best_score),
                    error: None,
                });
                graphs.push((method, Some(g)));
            }
            Err(e) => {
                log::warn!("{method} failed: {e}");
                selections.push(MethodSelection {
                    method,
                    hyper: None,
                    cv_rmse: None,
                    error: Some(e.to_string()),
                });
                graphs.push((method, None));
            }
        }
    }

    let test_ref = to_units(&data.test, data, spec.metric_units)?;
    let mut scenarios = vec![Scenario::Denoising {
        sigma: spec.denoise_sigma,
    }];
    scenarios.extend(spec.rhos.iter().map(|&rho| Scenario::Imputation { rho }));
    let test_noisy = add_noise(&data.test, spec.denoise_sigma, sub_seed(spec.seed, 1))?;
    let (rows, cols) = data.test.values.shape();

    let mut cells = Vec::new();
    for (s, scenario) in scenarios.iter().enumerate() {
        let mask = match scenario {
            Scenario::Imputation { rho } => Some(make_mask(
                rows,
                cols,
                *rho,
                sub_seed(spec.seed, 100 + s as u64),
            )?),
            Scenario::Denoising { .. } => None,
        };
        for ((method, g), sel) in graphs.iter().zip(&selections) {
            let cell = match g {
                None => Err(Error::data(sel.error.clone().unwrap_or_default())),
                Some(g) => {
                    let mu = sel.hyper.map_or(1.0, |h| h.mu);
                    score_cell(spec, data, g, mu, &test_noisy, mask.as_ref(), &test_ref)
                        .inspect_err(|e| log::warn!("{method} on {scenario}: {e}"))
                }
            };
            cells.push(cell);
        }
    }

    let find = |m: Method| {
        graphs
            .iter()
            .find(|(k, _)| *k == m)
            .and_then(|(_, g)| g.as_ref())
    };
    let heatmap = match (find(Method::Igl), find(Method::AdjSmooth)) {
        (Some(a), Some(b)) => Some((a.weights() - b.weights()).abs()),
        _ => None,
    };

    Ok(ExperimentReport {
        table: ResultsTable::new(spec.methods.clone(), scenarios, cells),
        selections,
        graphs,
        heatmap,
    })
}

fn score_cell(
    spec: &ExperimentSpec,
    data: &Dataset,
    g: &SensorGraph,
    mu: f64,
    test_noisy: &SignalMatrix,
    mask: Option<&ObservationMask>,
    test_ref: &DMatrix<f64>,
) -> Result<(f64, f64)> {
    let l = laplacian(g);
    let (x, select) = match mask {
        None => (denoise(test_noisy, &l, mu)?, None),
        Some(mask) => {
            let x = impute(&data.test, mask, &l, &spec.impute_params())?;
            let select = match spec.imputation_entries {
                ImputationEntries::All => None,
                ImputationEntries::Missing => Some(mask.matrix().map(|o| !o)),
            };
            (x, select)
        }
    };
    let x = to_units(&x, data, spec.metric_units)?;
    Ok((
        rmse_selected(&x, test_ref, select.as_ref())?,
        mae_selected(&x, test_ref, select.as_ref())?,
    ))
}
