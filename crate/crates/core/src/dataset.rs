//! Synthetic district-heating sensor data.
//!
//! A steady-state tree propagation stands in for a full hydraulic solve: every
//! hour a network-wide load factor scales pipe flows and heat rates, pressures
//! fall from the source by the Hazen-Williams head loss of each pipe, and
//! temperatures fall by the heat-balance drop. Each consumer node also carries
//! its own slowly varying demand fluctuation, which reaches every pipe upstream
//! of it, so sensors on the same branch move together.
//!
//! Signals are split in time, min-max normalized per sensor kind with training
//! statistics, and Gaussian noise is added to the training block.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeLabel, SensorKind, SignalMatrix};
use crate::physics::{hazen_williams, heat_balance_drop, spanning_tree, NetworkTopology};
use crate::reconstruct::ObservationMask;

/// Bar per meter of water head.
pub const BAR_PER_METER_HEAD: f64 = 0.098_066_5;

const LOAD_MIN: f64 = 0.3;
const LOAD_MAX: f64 = 1.5;
const HOURS_PER_YEAR: f64 = 8760.0;

// RNG stream ids; one ChaCha stream per purpose keeps each sequence stable
// when another is resized.
const STREAM_LOAD: u64 = 1;
const STREAM_LOCAL_PRESSURE: u64 = 2;
const STREAM_LOCAL_TEMPERATURE: u64 = 3;
const STREAM_TRAIN_NOISE: u64 = 4;

/// Seeded generator for one named stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Hourly load factor: `base + seasonal cos + daily sin + AR(1)`, clamped to [0.3, 1.5].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadProfile {
    pub base: f64,
    pub seasonal_amplitude: f64,
    pub daily_amplitude: f64,
    pub ar_coeff: f64,
    pub ar_sigma: f64,
    /// AR(1) coefficient of per-consumer demand fluctuations.
    pub local_ar_coeff: f64,
    /// Innovation std of per-consumer fluctuations (relative demand).
    pub local_ar_sigma: f64,
    /// Supply temperature change per unit of load deviation, degC.
    pub supply_temperature_gain: f64,
}

impl Default for LoadProfile {
    fn default() -> Self {
        LoadProfile {
            base: 0.9,
            seasonal_amplitude: 0.35,
            daily_amplitude: 0.15,
            ar_coeff: 0.95,
            ar_sigma: 0.03,
            local_ar_coeff: 0.97,
            local_ar_sigma: 0.04,
            supply_temperature_gain: 10.0,
        }
    }
}

impl LoadProfile {
    /// Constant unit load, no fluctuation.
    pub fn constant() -> Self {
        LoadProfile {
            base: 1.0,
            seasonal_amplitude: 0.0,
            daily_amplitude: 0.0,
            ar_coeff: 0.0,
            ar_sigma: 0.0,
            local_ar_coeff: 0.0,
            local_ar_sigma: 0.0,
            supply_temperature_gain: 0.0,
        }
    }

    /// Deterministic part of the load at hour `t`.
    pub fn deterministic(&self, t: usize) -> f64 {
        let tf = t as f64;
        self.base
            + self.seasonal_amplitude * (2.0 * std::f64::consts::PI * tf / HOURS_PER_YEAR).cos()
            + self.daily_amplitude
                * (2.0 * std::f64::consts::PI * ((t % 24) as f64 - 6.0) / 24.0).sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseUnits {
    /// Noise std is in min-max normalized units.
    #[default]
    Normalized,
    /// Noise std is in sensor units (bar / degC), added before normalization.
    Physical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub topology: NetworkTopology,
    pub n_samples: usize,
    pub train_size: usize,
    pub source_pressure_bar: f64,
    pub source_temperature_c: f64,
    pub load_profile: LoadProfile,
    pub noise_sigma_train: f64,
    pub noise_units: NoiseUnits,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            topology: NetworkTopology::default_network(),
            n_samples: 8760,
            train_size: 5000,
            source_pressure_bar: 6.0,
            source_temperature_c: 80.0,
            load_profile: LoadProfile::default(),
            noise_sigma_train: 0.25,
            noise_units: NoiseUnits::Normalized,
            seed: 42,
        }
    }
}

/// File form of [`GenerationConfig`]; `topology` is a path relative to the
/// config file, or absent for the bundled network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationFile {
    pub topology: Option<PathBuf>,
    pub n_samples: usize,
    pub train_size: usize,
    pub source_pressure_bar: f64,
    pub source_temperature_c: f64,
    pub load_profile: LoadProfile,
    pub noise_sigma_train: f64,
    pub noise_units: NoiseUnits,
    pub seed: u64,
}

impl Default for GenerationFile {
    fn default() -> Self {
        GenerationConfig::default().to_file(None)
    }
}

impl GenerationFile {
    pub fn resolve(&self, base_dir: &Path) -> Result<GenerationConfig> {
        let topology = match &self.topology {
            Some(p) => NetworkTopology::load(base_dir.join(p))?,
            None => NetworkTopology::default_network(),
        };
        let cfg = GenerationConfig {
            topology,
            n_samples: self.n_samples,
            train_size: self.train_size,
            source_pressure_bar: self.source_pressure_bar,
            source_temperature_c: self.source_temperature_c,
            load_profile: self.load_profile.clone(),
            noise_sigma_train: self.noise_sigma_train,
            noise_units: self.noise_units,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl GenerationConfig {
    /// File form of this config, with `topology` recorded as given.
    pub fn to_file(&self, topology: Option<PathBuf>) -> GenerationFile {
        GenerationFile {
            topology,
            n_samples: self.n_samples,
            train_size: self.train_size,
            source_pressure_bar: self.source_pressure_bar,
            source_temperature_c: self.source_temperature_c,
            load_profile: self.load_profile.clone(),
            noise_sigma_train: self.noise_sigma_train,
            noise_units: self.noise_units,
            seed: self.seed,
        }
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<GenerationConfig> {
        let file: GenerationFile =
            toml::from_str(text).map_err(|e| Error::config(format!("generation config: {e}")))?;
        file.resolve(base_dir)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<GenerationConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_size == 0 || self.train_size >= self.n_samples {
            return Err(Error::config(format!(
                "need 0 < train_size < n_samples, got {} and {}",
                self.train_size, self.n_samples
            )));
        }
        if !(self.noise_sigma_train >= 0.0) {
            return Err(Error::config("noise_sigma_train must be >= 0"));
        }
        let lp = &self.load_profile;
        if !(lp.ar_coeff.abs() < 1.0 || lp.ar_sigma == 0.0)
            || !(lp.local_ar_coeff.abs() < 1.0 || lp.local_ar_sigma == 0.0)
        {
            return Err(Error::config("AR coefficients must satisfy |phi| < 1"));
        }
        if lp.ar_sigma < 0.0 || lp.local_ar_sigma < 0.0 {
            return Err(Error::config("AR innovation std must be >= 0"));
        }
        self.topology.validate()
    }
}

/// Per-kind `(min, max)` used for min-max normalization.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NormStats {
    pub ranges: BTreeMap<SensorKind, (f64, f64)>,
}

impl NormStats {
    /// Per-kind extrema over all rows of that kind.
    pub fn from_signals(x: &SignalMatrix, labels: &[NodeLabel]) -> Result<NormStats> {
        check_labels(x, labels)?;
        let mut ranges: BTreeMap<SensorKind, (f64, f64)> = BTreeMap::new();
        for (i, lab) in labels.iter().enumerate() {
            let kind = lab
                .kind
                .ok_or_else(|| Error::data(format!("node {} has no sensor kind", lab.id)))?;
            let row = x.values.row(i);
            let e = ranges
                .entry(kind)
                .or_insert((f64::INFINITY, f64::NEG_INFINITY));
            e.0 = e.0.min(row.min());
            e.1 = e.1.max(row.max());
        }
        Ok(NormStats { ranges })
    }

    /// `(offset, scale)` for a kind; degenerate ranges map by identity.
    fn affine(&self, kind: SensorKind) -> Result<(f64, f64)> {
        let (lo, hi) = *self
            .ranges
            .get(&kind)
            .ok_or_else(|| Error::data(format!("no normalization stats for {kind}")))?;
        if hi > lo {
            Ok((lo, hi - lo))
        } else {
            log::warn!(
                "{kind} sensors are constant in training data; normalization is the identity"
            );
            Ok((0.0, 1.0))
        }
    }

    pub fn scale_of(&self, kind: SensorKind) -> Result<f64> {
        self.affine(kind).map(|(_, s)| s)
    }
}

fn check_labels(x: &SignalMatrix, labels: &[NodeLabel]) -> Result<()> {
    if labels.len() != x.n_nodes() {
        return Err(Error::dim(format!(
            "{} labels for {} signal rows",
            labels.len(),
            x.n_nodes()
        )));
    }
    Ok(())
}

fn row_affines(stats: &NormStats, labels: &[NodeLabel]) -> Result<Vec<(f64, f64)>> {
    labels
        .iter()
        .map(|l| {
            let kind = l
                .kind
                .ok_or_else(|| Error::data(format!("node {} has no sensor kind", l.id)))?;
            stats.affine(kind)
        })
        .collect()
}

pub fn normalize(
    x: &SignalMatrix,
    labels: &[NodeLabel],
    stats: &NormStats,
) -> Result<SignalMatrix> {
    check_labels(x, labels)?;
    let aff = row_affines(stats, labels)?;
    let mut v = x.values.clone();
    for (i, (lo, s)) in aff.into_iter().enumerate() {
        v.row_mut(i).iter_mut().for_each(|e| *e = (*e - lo) / s);
    }
    Ok(SignalMatrix::new(v, true))
}

/// Inverse of [`normalize`].
pub fn denormalize(
    x: &SignalMatrix,
    labels: &[NodeLabel],
    stats: &NormStats,
) -> Result<SignalMatrix> {
    check_labels(x, labels)?;
    let aff = row_affines(stats, labels)?;
    let mut v = x.values.clone();
    for (i, (lo, s)) in aff.into_iter().enumerate() {
        v.row_mut(i).iter_mut().for_each(|e| *e = *e * s + lo);
    }
    Ok(SignalMatrix::new(v, false))
}

/// `X + N(0, sigma^2)` i.i.d., drawn column by column from a seeded stream.
pub fn add_noise(x: &SignalMatrix, sigma: f64, seed: u64) -> Result<SignalMatrix> {
    add_noise_with(x, sigma, &mut stream_rng(seed, 0))
}

fn add_noise_with(x: &SignalMatrix, sigma: f64, rng: &mut ChaCha8Rng) -> Result<SignalMatrix> {
    if !(sigma >= 0.0) {
        return Err(Error::config(format!(
            "noise sigma must be >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let mut v = x.values.clone();
    for e in v.iter_mut() {
        let g: f64 = rng.sample(StandardNormal);
        *e += sigma * g;
    }
    Ok(SignalMatrix::new(v, x.normalized))
}

/// I.i.d. Bernoulli(rho) observation mask.
pub fn make_mask(rows: usize, cols: usize, rho: f64, seed: u64) -> Result<ObservationMask> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::config(format!(
            "sampling density must lie in (0, 1], got {rho}"
        )));
    }
    if rho == 1.0 {
        return Ok(ObservationMask::full(rows, cols));
    }
    let mut rng = stream_rng(seed, 0);
    let m = DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() < rho);
    Ok(ObservationMask::new(m))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train_clean: SignalMatrix,
    pub train_noisy: SignalMatrix,
    pub test: SignalMatrix,
    pub norm_stats: NormStats,
    pub labels: Vec<NodeLabel>,
}

impl Dataset {
    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }
}

fn ar1_series(rng: &mut ChaCha8Rng, len: usize, phi: f64, sigma: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    // stationary start
    let mut e = if sigma > 0.0 && phi.abs() < 1.0 {
        let g: f64 = rng.sample(StandardNormal);
        g * sigma / (1.0 - phi * phi).sqrt()
    } else {
        0.0
    };
    for _ in 0..len {
        out.push(e);
        let g: f64 = if sigma > 0.0 {
            rng.sample(StandardNormal)
        } else {
            0.0
        };
        e = phi * e + sigma * g;
    }
    out
}

/// Network-wide load factor for every hour.
pub fn load_series(profile: &LoadProfile, len: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, STREAM_LOAD);
    let ar = ar1_series(&mut rng, len, profile.ar_coeff, profile.ar_sigma);
    (0..len)
        .map(|t| (profile.deterministic(t) + ar[t]).clamp(LOAD_MIN, LOAD_MAX))
        .collect()
}

struct BlockPlan {
    /// `(parent row, child row, pipe index, subtree rows of child)` in BFS order.
    edges: Vec<(usize, usize, usize, Vec<usize>)>,
    source_row: usize,
}

fn plan_block(
    kind: SensorKind,
    nodes: &[u32],
    pipes: &[crate::physics::PipeSpec],
    index: &HashMap<u32, usize>,
) -> Result<BlockPlan> {
    let source = *nodes
        .first()
        .ok_or_else(|| Error::config(format!("{kind} block has no nodes")))?;
    let tree = spanning_tree(source, nodes, pipes).ok_or_else(|| {
        Error::config(format!(
            "{kind} pipes do not connect every {kind} node to source {source}"
        ))
    })?;
    let mut children: HashMap<u32, Vec<u32>> = HashMap::new();
    for &(p, c, _) in &tree {
        children.entry(p).or_default().push(c);
    }
    let subtree = |root: u32| -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            out.push(index[&u]);
            if let Some(cs) = children.get(&u) {
                stack.extend(cs.iter().copied());
            }
        }
        out.sort_unstable();
        out
    };
    let edges = tree
        .iter()
        .map(|&(p, c, k)| (index[&p], index[&c], k, subtree(c)))
        .collect();
    Ok(BlockPlan {
        edges,
        source_row: index[&source],
    })
}

/// Physical sensor readings (bar / degC) for every hour, rows in topology order.
pub fn simulate(config: &GenerationConfig) -> Result<SignalMatrix> {
    config.validate()?;
    let topo = &config.topology;
    let index = topo.index_map();
    let n = topo.n_nodes();
    let len = config.n_samples;
    let lp = &config.load_profile;
    let load = load_series(lp, len, config.seed);

    let pressure = plan_block(
        SensorKind::Pressure,
        &topo.pressure_nodes,
        &topo.pressure_pipes,
        &index,
    )?;
    let temperature = plan_block(
        SensorKind::Temperature,
        &topo.temperature_nodes,
        &topo.temperature_pipes,
        &index,
    )?;

    // Per-node relative demand fluctuation.
    let mut local = vec![Vec::new(); n];
    for (plan, stream) in [
        (&pressure, STREAM_LOCAL_PRESSURE),
        (&temperature, STREAM_LOCAL_TEMPERATURE),
    ] {
        let mut rng = stream_rng(config.seed, stream);
        for (_, child, _, _) in &plan.edges {
            local[*child] = ar1_series(&mut rng, len, lp.local_ar_coeff, lp.local_ar_sigma);
        }
    }

    let mut x = DMatrix::zeros(n, len);
    for t in 0..len {
        let l = load[t];
        let scale_of = |rows: &[usize]| -> f64 {
            let mean = rows.iter().map(|&r| 1.0 + local[r][t]).sum::<f64>() / rows.len() as f64;
            (l * mean).max(0.05)
        };

        x[(pressure.source_row, t)] = config.source_pressure_bar;
        for (parent, child, k, sub) in &pressure.edges {
            let p = &topo.pressure_pipes[*k];
            let head = hazen_williams(
                p.length_m,
                p.flow_m3s * scale_of(sub),
                p.roughness,
                p.diameter_m,
            )?;
            x[(*child, t)] = x[(*parent, t)] - head * BAR_PER_METER_HEAD;
        }

        x[(temperature.source_row, t)] =
            config.source_temperature_c + lp.supply_temperature_gain * (l - 1.0);
        for (parent, child, k, sub) in &temperature.edges {
            let p = &topo.temperature_pipes[*k];
            let dt = heat_balance_drop(
                p.heat_rate_w * scale_of(sub),
                p.mass_flow_kgs,
                p.heat_capacity,
            )?;
            x[(*child, t)] = x[(*parent, t)] - dt;
        }
    }
    Ok(SignalMatrix::new(x, false))
}

pub fn generate(config: &GenerationConfig) -> Result<Dataset> {
    let physical = simulate(config)?;
    let labels = config.topology.labels();
    let train_phys = physical.columns(0..config.train_size);
    let test_phys = physical.columns(config.train_size..config.n_samples);
    let norm_stats = NormStats::from_signals(&train_phys, &labels)?;
    let train_clean = normalize(&train_phys, &labels, &norm_stats)?;
    let test = normalize(&test_phys, &labels, &norm_stats)?;

    let mut rng = stream_rng(config.seed, STREAM_TRAIN_NOISE);
    let train_noisy = match config.noise_units {
        NoiseUnits::Normalized => add_noise_with(&train_clean, config.noise_sigma_train, &mut rng)?,
        NoiseUnits::Physical => {
            let noisy = add_noise_with(&train_phys, config.noise_sigma_train, &mut rng)?;
            normalize(&noisy, &labels, &norm_stats)?
        }
    };
    Ok(Dataset {
        train_clean,
        train_noisy,
        test,
        norm_stats,
        labels,
    })
}
