//! Graph primitives: the upper-triangular edge parametrization, adjacency and
//! Laplacian matrices, the degree operator `S: w -> W1` with its adjoint, and
//! the Laplacian smoothness functional.
//!
//! Edge layout is row-major over the strict upper triangle: `(0,1), (0,2), ...,
//! (0,n-1), (1,2), ...`. Every vector of length `n(n-1)/2` in this crate uses it.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical quantity measured by a sensor node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Pressure,
    Temperature,
}

impl SensorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SensorKind::Pressure => "pressure",
            SensorKind::Temperature => "temperature",
        }
    }
}

impl std::str::FromStr for SensorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pressure" => Ok(SensorKind::Pressure),
            "temperature" => Ok(SensorKind::Temperature),
            other => Err(Error::data(format!("unknown sensor kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for SensorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeLabel {
    pub id: u32,
    pub kind: Option<SensorKind>,
}

impl NodeLabel {
    /// Labels `0..n` with no sensor kind attached.
    pub fn anonymous(n: usize) -> Vec<NodeLabel> {
        (0..n as u32)
            .map(|id| NodeLabel { id, kind: None })
            .collect()
    }
}

/// Number of distinct node pairs, `n(n-1)/2`.
pub fn edge_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Inverse of [`edge_count`]; fails when `len` is not triangular.
pub fn node_count_for_edges(len: usize) -> Result<usize> {
    // n = (1 + sqrt(1 + 8 len)) / 2
    let n = ((1.0 + (1.0 + 8.0 * len as f64).sqrt()) / 2.0).round() as usize;
    if n >= 2 && edge_count(n) == len {
        Ok(n)
    } else {
        Err(Error::dim(format!(
            "edge vector length {len} is not n(n-1)/2 for any n >= 2"
        )))
    }
}

/// Position of the pair `(i, j)`, `i < j < n`, in the edge layout.
pub fn edge_index(i: usize, j: usize, n: usize) -> Result<usize> {
    if i >= j || j >= n {
        return Err(Error::Index(format!(
            "edge ({i}, {j}) invalid for n = {n}: need i < j < n"
        )));
    }
    Ok(edge_index_unchecked(i, j, n))
}

#[inline]
pub(crate) fn edge_index_unchecked(i: usize, j: usize, n: usize) -> usize {
    i * (n - 1) - i * i.saturating_sub(1) / 2 + j - i - 1
}

/// Iterate `(k, i, j)` over all pairs in layout order.
pub fn edge_pairs(n: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..n)
        .flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
        .enumerate()
        .map(|(k, (i, j))| (k, i, j))
}

/// Non-negative weights of an undirected simple graph in upper-triangular layout.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeightVector {
    n: usize,
    w: Vec<f64>,
}

impl EdgeWeightVector {
    pub fn new(n: usize, w: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::dim(format!("need at least 2 nodes, got {n}")));
        }
        if w.len() != edge_count(n) {
            return Err(Error::dim(format!(
                "edge vector for n = {n} must have length {}, got {}",
                edge_count(n),
                w.len()
            )));
        }
        if let Some((k, v)) = w
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0) || !v.is_finite())
        {
            return Err(Error::Domain(format!(
                "edge weight {k} must be finite and non-negative, got {v}"
            )));
        }
        Ok(EdgeWeightVector { n, w })
    }

    /// Builds from a vector whose length determines `n`.
    pub fn from_vec(w: Vec<f64>) -> Result<Self> {
        let n = node_count_for_edges(w.len())?;
        Self::new(n, w)
    }

    pub fn zeros(n: usize) -> Self {
        EdgeWeightVector {
            n,
            w: vec![0.0; edge_count(n)],
        }
    }

    pub(crate) fn from_raw(n: usize, w: Vec<f64>) -> Self {
        debug_assert_eq!(w.len(), edge_count(n));
        EdgeWeightVector { n, w }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> Result<f64> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        Ok(self.w[edge_index(a, b, self.n)?])
    }

    /// Divide by the largest weight and zero every entry below `threshold`.
    /// An all-zero vector is returned unchanged.
    pub fn normalized_thresholded(&self, threshold: f64) -> EdgeWeightVector {
        let max = self.w.iter().cloned().fold(0.0_f64, f64::max);
        if max <= 0.0 {
            return self.clone();
        }
        let w = self
            .w
            .iter()
            .map(|&v| {
                let s = v / max;
                if s < threshold {
                    0.0
                } else {
                    s
                }
            })
            .collect();
        EdgeWeightVector { n: self.n, w }
    }
}

/// Symmetric, non-negative, zero-diagonal adjacency matrix with node labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorGraph {
    weights: DMatrix<f64>,
    labels: Vec<NodeLabel>,
}

impl SensorGraph {
    /// Validates the adjacency invariants. Asymmetry up to `1e-12` relative
    /// (e.g. from text round-trips) is averaged away; anything larger is rejected.
    pub fn new(weights: DMatrix<f64>, labels: Vec<NodeLabel>) -> Result<Self> {
        let n = weights.nrows();
        if weights.ncols() != n {
            return Err(Error::dim(format!(
                "adjacency must be square, got {}x{}",
                n,
                weights.ncols()
            )));
        }
        if labels.len() != n {
            return Err(Error::dim(format!(
                "{} labels for {} nodes",
                labels.len(),
                n
            )));
        }
        let scale = weights.amax().max(1.0);
        let mut w = weights;
        for i in 0..n {
            if w[(i, i)] != 0.0 {
                return Err(Error::Domain(format!(
                    "adjacency diagonal must be zero, W({i},{i}) = {}",
                    w[(i, i)]
                )));
            }
            for j in (i + 1)..n {
                let (a, b) = (w[(i, j)], w[(j, i)]);
                if !a.is_finite() || !b.is_finite() || a < 0.0 || b < 0.0 {
                    return Err(Error::Domain(format!(
                        "adjacency entries must be finite and non-negative at ({i},{j})"
                    )));
                }
                if (a - b).abs() > 1e-12 * scale {
                    return Err(Error::Domain(format!(
                        "adjacency not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
                let m = 0.5 * (a + b);
                w[(i, j)] = m;
                w[(j, i)] = m;
            }
        }
        Ok(SensorGraph { weights: w, labels })
    }

    pub fn empty(labels: Vec<NodeLabel>) -> Self {
        let n = labels.len();
        SensorGraph {
            weights: DMatrix::zeros(n, n),
            labels,
        }
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn labels(&self) -> &[NodeLabel] {
        &self.labels
    }

    pub fn with_labels(mut self, labels: Vec<NodeLabel>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::dim(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.n()
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    /// Connected components over nonzero edges, as a component id per node.
    pub fn components(&self) -> Vec<usize> {
        support_components(&self.weights)
    }
}

/// Component id per node for the graph whose edges are the nonzero
/// off-diagonal entries of `m`.
pub(crate) fn support_components(m: &DMatrix<f64>) -> Vec<usize> {
    let n = m.nrows();
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = next;
        stack.push(start);
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if v != u && comp[v] == usize::MAX && m[(u, v)] != 0.0 {
                    comp[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Graph Laplacian `L = D - W`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix(DMatrix<f64>);

impl LaplacianMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn components(&self) -> Vec<usize> {
        support_components(&self.0)
    }

    /// Largest eigenvalue estimate by power iteration, floored at the largest
    /// diagonal entry (the Rayleigh quotient of a unit basis vector), which keeps
    /// the estimate within a factor two of the true value.
    pub fn lambda_max(&self, iterations: usize, tol: f64) -> f64 {
        let n = self.n();
        if n == 0 {
            return 0.0;
        }
        let diag_max = (0..n).map(|i| self.0[(i, i)]).fold(0.0_f64, f64::max);
        // Deterministic start vector with a component along every direction.
        let mut v = nalgebra::DVector::from_fn(n, |i, _| 1.0 + (i as f64 + 1.0).sqrt().fract());
        let mut prev = 0.0;
        let mut est = 0.0;
        for _ in 0..iterations {
            let nv = v.norm();
            if nv == 0.0 {
                break;
            }
            v /= nv;
            let lv = &self.0 * &v;
            est = v.dot(&lv);
            v = lv;
            if (est - prev).abs() <= tol * est.abs().max(1e-300) {
                break;
            }
            prev = est;
        }
        est.max(diag_max)
    }
}

/// Node-by-snapshot sensor readings.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    pub values: DMatrix<f64>,
    /// True once values have been min-max normalized.
    pub normalized: bool,
}

impl SignalMatrix {
    pub fn new(values: DMatrix<f64>, normalized: bool) -> Self {
        SignalMatrix { values, normalized }
    }

    pub fn n_nodes(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_snapshots(&self) -> usize {
        self.values.ncols()
    }

    /// Columns `range` as a new matrix.
    pub fn columns(&self, range: std::ops::Range<usize>) -> SignalMatrix {
        SignalMatrix {
            values: self.values.columns(range.start, range.len()).into_owned(),
            normalized: self.normalized,
        }
    }
}

pub fn vector_to_adjacency(w: &EdgeWeightVector) -> SensorGraph {
    let n = w.n;
    let mut m = DMatrix::zeros(n, n);
    for (k, i, j) in edge_pairs(n) {
        m[(i, j)] = w.w[k];
        m[(j, i)] = w.w[k];
    }
    SensorGraph {
        weights: m,
        labels: NodeLabel::anonymous(n),
    }
}

pub fn adjacency_to_vector(g: &SensorGraph) -> EdgeWeightVector {
    let n = g.n();
    let w = edge_pairs(n).map(|(_, i, j)| g.weights[(i, j)]).collect();
    EdgeWeightVector { n, w }
}

pub fn laplacian(g: &SensorGraph) -> LaplacianMatrix {
    let n = g.n();
    let mut l = -g.weights.clone();
    for i in 0..n {
        let d: f64 = g.weights.row(i).iter().sum();
        l[(i, i)] = d;
    }
    LaplacianMatrix(l)
}

/// Degrees `d = S w`, i.e. `W 1`.
pub fn degree_operator_apply(w: &EdgeWeightVector) -> Vec<f64> {
    let mut d = vec![0.0; w.n];
    apply_s(&w.w, w.n, &mut d);
    d
}

/// `S^T d`: entry `(i,j)` is `d[i] + d[j]`.
pub fn degree_operator_adjoint(d: &[f64]) -> Result<Vec<f64>> {
    let n = d.len();
    if n < 2 {
        return Err(Error::dim(format!(
            "degree vector needs length >= 2, got {n}"
        )));
    }
    let mut out = vec![0.0; edge_count(n)];
    apply_st(d, &mut out);
    Ok(out)
}

#[inline]
pub(crate) fn apply_s(w: &[f64], n: usize, d: &mut [f64]) {
    d.iter_mut().for_each(|x| *x = 0.0);
    let mut k = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = w[k];
            d[i] += v;
            d[j] += v;
            k += 1;
        }
    }
}

#[inline]
pub(crate) fn apply_st(d: &[f64], out: &mut [f64]) {
    let n = d.len();
    let mut k = 0;
    for i in 0..n {
        let di = d[i];
        for dj in &d[(i + 1)..n] {
            out[k] = di + dj;
            k += 1;
        }
    }
}

/// Spectral norm of the degree operator, `sqrt(2(n-1))`.
pub fn operator_norm_s(n: usize) -> f64 {
    (2.0 * (n.max(1) - 1) as f64).sqrt()
}

/// Squared Euclidean distances between node rows, summed over snapshots.
pub fn pairwise_distance_vector(x: &SignalMatrix) -> Result<EdgeWeightVector> {
    let (n, m) = x.values.shape();
    if m == 0 {
        return Err(Error::dim("signal matrix has no snapshots"));
    }
    if n < 2 {
        return Err(Error::dim(format!("need at least 2 nodes, got {n}")));
    }
    // Row-contiguous copy: nalgebra is column-major.
    let xt = x.values.transpose();
    let rows: Vec<&[f64]> = (0..n).map(|i| &xt.as_slice()[i * m..(i + 1) * m]).collect();
    let mut z = Vec::with_capacity(edge_count(n));
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = rows[i]
                .iter()
                .zip(rows[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            z.push(s);
        }
    }
    EdgeWeightVector::new(n, z)
}

/// `tr(X^T L X)`, the Laplacian quadratic form summed over snapshots.
pub fn smoothness(x: &SignalMatrix, l: &LaplacianMatrix) -> Result<f64> {
    if x.n_nodes() != l.n() {
        return Err(Error::dim(format!(
            "signal has {} rows but Laplacian is {}x{}",
            x.n_nodes(),
            l.n(),
            l.n()
        )));
    }
    let lx = l.matrix() * &x.values;
    Ok(x.values.component_mul(&lx).sum())
}
