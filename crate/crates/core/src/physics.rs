//! Physics-informed prior graph for district heating sensor networks.
//!
//! Pressure sensors are linked with weight `1/|dP|` (Hazen-Williams head loss)
//! and temperature sensors with `1/|dT|` (heat balance). Each block is rescaled
//! by its own maximum, thresholded, and the two blocks are placed on the
//! diagonal of one adjacency matrix, pressure nodes first.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{adjacency_to_vector, NodeLabel, SensorGraph, SensorKind};

/// Specific heat of water, J/(kg K).
pub const WATER_HEAT_CAPACITY: f64 = 4186.0;

/// Hazen-Williams SI coefficient.
const HAZEN_WILLIAMS_K: f64 = 10.67;
const HW_FLOW_EXP: f64 = 1.852;
const HW_DIAMETER_EXP: f64 = 4.87;

fn default_heat_capacity() -> f64 {
    WATER_HEAT_CAPACITY
}

/// One pipe between two sensor nodes of the same kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipeSpec {
    pub from: u32,
    pub to: u32,
    pub length_m: f64,
    pub diameter_m: f64,
    /// Hazen-Williams roughness coefficient.
    pub roughness: f64,
    pub flow_m3s: f64,
    pub heat_rate_w: f64,
    pub mass_flow_kgs: f64,
    #[serde(default = "default_heat_capacity")]
    pub heat_capacity: f64,
}

impl PipeSpec {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.from == self.to {
            return Err("from and to must differ".into());
        }
        let positive = [
            ("length_m", self.length_m),
            ("diameter_m", self.diameter_m),
            ("roughness", self.roughness),
            ("flow_m3s", self.flow_m3s),
            ("mass_flow_kgs", self.mass_flow_kgs),
            ("heat_capacity", self.heat_capacity),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(self.heat_rate_w >= 0.0) || !self.heat_rate_w.is_finite() {
            return Err(format!(
                "heat_rate_w must be >= 0, got {}",
                self.heat_rate_w
            ));
        }
        Ok(())
    }

    fn key(&self) -> (u32, u32) {
        (self.from.min(self.to), self.from.max(self.to))
    }
}

/// Head loss along a pipe in meters, Hazen-Williams form.
pub fn pressure_drop(p: &PipeSpec) -> Result<f64> {
    hazen_williams(p.length_m, p.flow_m3s, p.roughness, p.diameter_m)
}

pub(crate) fn hazen_williams(length: f64, flow: f64, roughness: f64, diameter: f64) -> Result<f64> {
    for (name, v) in [
        ("length", length),
        ("flow", flow),
        ("roughness", roughness),
        ("diameter", diameter),
    ] {
        if !(v > 0.0) {
            return Err(Error::Domain(format!("pipe {name} must be > 0, got {v}")));
        }
    }
    Ok((HAZEN_WILLIAMS_K * length * flow.powf(HW_FLOW_EXP)
        / (roughness.powf(HW_FLOW_EXP) * diameter.powf(HW_DIAMETER_EXP)))
    .abs())
}

/// Temperature drop along a pipe in kelvin, `|q / (m c)|`.
pub fn temperature_drop(p: &PipeSpec) -> Result<f64> {
    heat_balance_drop(p.heat_rate_w, p.mass_flow_kgs, p.heat_capacity)
}

pub(crate) fn heat_balance_drop(heat_rate: f64, mass_flow: f64, heat_capacity: f64) -> Result<f64> {
    if !(mass_flow > 0.0) {
        return Err(Error::Domain(format!(
            "mass flow must be > 0, got {mass_flow}"
        )));
    }
    if !(heat_capacity > 0.0) {
        return Err(Error::Domain(format!(
            "heat capacity must be > 0, got {heat_capacity}"
        )));
    }
    Ok((heat_rate / (mass_flow * heat_capacity)).abs())
}

/// Sensor network layout: two node lists and the pipes joining nodes of each kind.
///
/// Text form (TOML):
///
/// ```toml
/// pressure_nodes = [0, 1, 2]
/// temperature_nodes = [3, 4]
///
/// [[pressure_pipes]]
/// from = 0
/// to = 1
/// length_m = 120.0
/// diameter_m = 0.2
/// roughness = 130.0
/// flow_m3s = 0.02
/// heat_rate_w = 3000.0
/// mass_flow_kgs = 20.0
/// heat_capacity = 4186.0   # optional
/// ```
///
/// The first node in each list is the supply source used by the data generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkTopology {
    pub pressure_nodes: Vec<u32>,
    pub temperature_nodes: Vec<u32>,
    #[serde(default)]
    pub pressure_pipes: Vec<PipeSpec>,
    #[serde(default)]
    pub temperature_pipes: Vec<PipeSpec>,
}

const DEFAULT_TOPOLOGY: &str = include_str!("../data/default_topology.toml");

impl NetworkTopology {
    /// The bundled 37-node network: 17 pressure sensors (ids 0-16) and
    /// 20 temperature sensors (ids 17-36).
    pub fn default_network() -> NetworkTopology {
        Self::from_toml_str(DEFAULT_TOPOLOGY).expect("bundled topology is valid")
    }

    pub fn default_network_toml() -> &'static str {
        DEFAULT_TOPOLOGY
    }

    pub fn from_toml_str(s: &str) -> Result<NetworkTopology> {
        let topo: NetworkTopology =
            toml::from_str(s).map_err(|e| Error::config(format!("topology: {e}")))?;
        topo.validate()?;
        Ok(topo)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<NetworkTopology> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for id in self.pressure_nodes.iter().chain(&self.temperature_nodes) {
            if !seen.insert(*id) {
                return Err(Error::config(format!(
                    "node id {id} listed more than once (node lists must be disjoint)"
                )));
            }
        }
        if self.pressure_nodes.len() + self.temperature_nodes.len() < 2 {
            return Err(Error::config("topology needs at least 2 nodes"));
        }
        for (kind, nodes, pipes) in self.blocks() {
            let members: HashSet<u32> = nodes.iter().copied().collect();
            let mut pairs = HashSet::new();
            for (idx, p) in pipes.iter().enumerate() {
                let tag = format!("{kind} pipe #{idx} ({} -> {})", p.from, p.to);
                p.validate()
                    .map_err(|m| Error::config(format!("{tag}: {m}")))?;
                for end in [p.from, p.to] {
                    if !members.contains(&end) {
                        return Err(Error::config(format!(
                            "{tag}: node {end} is not a {kind} node"
                        )));
                    }
                }
                if !pairs.insert(p.key()) {
                    return Err(Error::config(format!(
                        "{tag}: duplicate pipe for node pair ({}, {})",
                        p.key().0,
                        p.key().1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.pressure_nodes.len() + self.temperature_nodes.len()
    }

    /// Node labels in matrix order: pressure block first, then temperature.
    pub fn labels(&self) -> Vec<NodeLabel> {
        self.pressure_nodes
            .iter()
            .map(|&id| NodeLabel {
                id,
                kind: Some(SensorKind::Pressure),
            })
            .chain(self.temperature_nodes.iter().map(|&id| NodeLabel {
                id,
                kind: Some(SensorKind::Temperature),
            }))
            .collect()
    }

    /// Matrix row of every node id.
    pub fn index_map(&self) -> HashMap<u32, usize> {
        self.pressure_nodes
            .iter()
            .chain(&self.temperature_nodes)
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect()
    }

    pub(crate) fn blocks(&self) -> [(SensorKind, &[u32], &[PipeSpec]); 2] {
        [
            (
                SensorKind::Pressure,
                &self.pressure_nodes[..],
                &self.pressure_pipes[..],
            ),
            (
                SensorKind::Temperature,
                &self.temperature_nodes[..],
                &self.temperature_pipes[..],
            ),
        ]
    }
}

/// Prior adjacency `W_PI` and the binary knowledge mask `M` (1 where `W_PI != 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct PriorGraph {
    pub graph: SensorGraph,
    pub mask: DMatrix<f64>,
}

/// Prior in the solver's edge layout.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgePrior {
    pub mask: Vec<f64>,
    pub w_pi: Vec<f64>,
}

impl PriorGraph {
    pub fn from_graph(graph: SensorGraph) -> PriorGraph {
        let mask = graph.weights().map(|v| if v != 0.0 { 1.0 } else { 0.0 });
        PriorGraph { graph, mask }
    }

    pub fn knowledge(&self) -> KnowledgePrior {
        let w_pi = adjacency_to_vector(&self.graph).into_vec();
        let mask = w_pi
            .iter()
            .map(|&v| if v != 0.0 { 1.0 } else { 0.0 })
            .collect();
        KnowledgePrior { mask, w_pi }
    }
}

/// Divide by the largest finite weight (infinite weights become 1) and zero
/// everything below `threshold`.
pub fn rescale_and_threshold(weights: &[f64], threshold: f64) -> Vec<f64> {
    let max_finite = weights
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0_f64, f64::max);
    weights
        .iter()
        .map(|&v| {
            let s = if v.is_infinite() {
                1.0
            } else if max_finite > 0.0 {
                v / max_finite
            } else {
                0.0
            };
            if s < threshold {
                0.0
            } else {
                s
            }
        })
        .collect()
}

pub fn build_prior_graph(topo: &NetworkTopology, threshold: f64) -> Result<PriorGraph> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::config(format!(
            "prior threshold must lie in [0, 1), got {threshold}"
        )));
    }
    topo.validate()?;
    let n = topo.n_nodes();
    let index = topo.index_map();
    let mut w = DMatrix::zeros(n, n);

    for (kind, _, pipes) in topo.blocks() {
        if pipes.is_empty() {
            log::warn!("{kind} block has no pipes; its prior subgraph is edgeless");
            continue;
        }
        let raw: Vec<f64> = pipes
            .iter()
            .map(|p| {
                let drop = match kind {
                    SensorKind::Pressure => pressure_drop(p)?,
                    SensorKind::Temperature => temperature_drop(p)?,
                };
                Ok(if drop == 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / drop
                })
            })
            .collect::<Result<_>>()?;
        let scaled = rescale_and_threshold(&raw, threshold);
        if scaled.iter().all(|&v| v == 0.0) {
            log::warn!("{kind} block is edgeless after thresholding");
        }
        for (p, s) in pipes.iter().zip(scaled) {
            let (i, j) = (index[&p.from], index[&p.to]);
            w[(i, j)] = s;
            w[(j, i)] = s;
        }
    }

    let graph = SensorGraph::new(w, topo.labels())?;
    Ok(PriorGraph::from_graph(graph))
}

/// Ids reachable from `source` through `pipes`, as a BFS tree of
/// `(parent, child, pipe index)` triples in visit order.
pub(crate) fn spanning_tree(
    source: u32,
    nodes: &[u32],
    pipes: &[PipeSpec],
) -> Option<Vec<(u32, u32, usize)>> {
    let mut adj: HashMap<u32, Vec<(u32, usize)>> = HashMap::new();
    for (k, p) in pipes.iter().enumerate() {
        adj.entry(p.from).or_default().push((p.to, k));
        adj.entry(p.to).or_default().push((p.from, k));
    }
    let mut visited = BTreeSet::from([source]);
    let mut queue = std::collections::VecDeque::from([source]);
    let mut tree = Vec::new();
    while let Some(u) = queue.pop_front() {
        if let Some(nbrs) = adj.get(&u) {
            for &(v, k) in nbrs {
                if visited.insert(v) {
                    tree.push((u, v, k));
                    queue.push_back(v);
                }
            }
        }
    }
    if nodes.iter().all(|id| visited.contains(id)) {
        Some(tree)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pipe(from: u32, to: u32) -> PipeSpec {
        PipeSpec {
            from,
            to,
            length_m: 100.0,
            diameter_m: 0.1,
            roughness: 120.0,
            flow_m3s: 0.01,
            heat_rate_w: 10_000.0,
            mass_flow_kgs: 0.5,
            heat_capacity: WATER_HEAT_CAPACITY,
        }
    }

    #[test]
    fn hazen_williams_reference_value() {
        // 10.67 * 100 * 0.01^1.852 / (120^1.852 * 0.1^4.87), evaluated independently.
        let dp = pressure_drop(&pipe(0, 1)).unwrap();
        assert!((dp - 2.205_569_521_8).abs() < 1e-9, "{dp}");
    }

    #[test]
    fn hazen_williams_scaling() {
        let base = pressure_drop(&pipe(0, 1)).unwrap();
        let mut p = pipe(0, 1);
        p.length_m *= 2.0;
        assert!((pressure_drop(&p).unwrap() - 2.0 * base).abs() < 1e-12);
        let mut p = pipe(0, 1);
        p.flow_m3s *= 2.0;
        let ratio = pressure_drop(&p).unwrap() / base;
        assert!((ratio - 3.610_002_909_8).abs() < 1e-9, "{ratio}");
        let mut p = pipe(0, 1);
        p.roughness = 140.0;
        assert!(pressure_drop(&p).unwrap() < base);
        let mut p = pipe(0, 1);
        p.diameter_m = 0.0;
        assert!(pressure_drop(&p).is_err());
    }

    #[test]
    fn temperature_drop_values() {
        let dt = temperature_drop(&pipe(0, 1)).unwrap();
        assert!((dt - 4.777_830_864_8).abs() < 1e-9, "{dt}");
        let mut p = pipe(0, 1);
        p.heat_rate_w = 0.0;
        assert_eq!(temperature_drop(&p).unwrap(), 0.0);
        let mut p = pipe(0, 1);
        p.mass_flow_kgs = 1.0;
        assert!((temperature_drop(&p).unwrap() - dt / 2.0).abs() < 1e-12);
        p.mass_flow_kgs = 0.0;
        assert!(temperature_drop(&p).is_err());
        p.mass_flow_kgs = 1.0;
        p.heat_capacity = -1.0;
        assert!(temperature_drop(&p).is_err());
    }

    #[test]
    fn single_pressure_pipe_prior() {
        let topo = NetworkTopology {
            pressure_nodes: vec![0, 1],
            temperature_nodes: vec![2],
            pressure_pipes: vec![pipe(0, 1)],
            temperature_pipes: vec![],
        };
        let prior = build_prior_graph(&topo, 0.1).unwrap();
        let w = prior.graph.weights();
        assert_eq!(w[(0, 1)], 1.0);
        assert_eq!(w[(1, 0)], 1.0);
        assert_eq!(w.iter().filter(|&&v| v != 0.0).count(), 2);
    }

    #[test]
    fn rescale_threshold_drops_weak_edge() {
        // drops 1 and 100 -> weights 1 and 0.01
        assert_eq!(rescale_and_threshold(&[1.0, 0.01], 0.1), vec![1.0, 0.0]);
        assert_eq!(
            rescale_and_threshold(&[f64::INFINITY, 2.0, 1.0], 0.1),
            vec![1.0, 1.0, 0.5]
        );
    }

    #[test]
    fn zero_heat_rate_maps_to_unit_weight() {
        let mut a = pipe(2, 3);
        a.heat_rate_w = 0.0;
        let topo = NetworkTopology {
            pressure_nodes: vec![0, 1],
            temperature_nodes: vec![2, 3, 4],
            pressure_pipes: vec![pipe(0, 1)],
            temperature_pipes: vec![a, pipe(3, 4)],
        };
        let prior = build_prior_graph(&topo, 0.1).unwrap();
        let w = prior.graph.weights();
        assert_eq!(w[(2, 3)], 1.0);
        assert_eq!(w[(3, 4)], 1.0);
    }

    #[test]
    fn duplicate_pipe_rejected() {
        let topo = NetworkTopology {
            pressure_nodes: vec![0, 1],
            temperature_nodes: vec![],
            pressure_pipes: vec![pipe(0, 1), pipe(1, 0)],
            temperature_pipes: vec![],
        };
        let err = build_prior_graph(&topo, 0.1).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn validation_names_offending_pipe() {
        let mut bad = pipe(0, 1);
        bad.diameter_m = -0.2;
        let topo = NetworkTopology {
            pressure_nodes: vec![0, 1],
            temperature_nodes: vec![2],
            pressure_pipes: vec![bad],
            temperature_pipes: vec![],
        };
        let msg = topo.validate().unwrap_err().to_string();
        assert!(
            msg.contains("pressure pipe #0 (0 -> 1)") && msg.contains("diameter_m"),
            "{msg}"
        );

        let topo = NetworkTopology {
            pressure_nodes: vec![0, 1],
            temperature_nodes: vec![2],
            pressure_pipes: vec![pipe(0, 2)],
            temperature_pipes: vec![],
        };
        assert!(topo
            .validate()
            .unwrap_err()
            .to_string()
            .contains("not a pressure node"));

        let topo = NetworkTopology {
            pressure_nodes: vec![0, 1],
            temperature_nodes: vec![1],
            pressure_pipes: vec![],
            temperature_pipes: vec![],
        };
        assert!(topo.validate().is_err());
    }

    #[test]
    fn unknown_toml_keys_rejected() {
        let text = "pressure_nodes = [0, 1]\ntemperature_nodes = []\ncolour = 3\n";
        assert!(NetworkTopology::from_toml_str(text).is_err());
    }

    #[test]
    fn default_network_layout() {
        let topo = NetworkTopology::default_network();
        assert_eq!(topo.pressure_nodes, (0..17).collect::<Vec<_>>());
        assert_eq!(topo.temperature_nodes, (17..37).collect::<Vec<_>>());
        let prior = build_prior_graph(&topo, 0.1).unwrap();
        assert_eq!(prior.graph.n(), 37);
        for (kind, nodes, pipes) in topo.blocks() {
            assert!(
                spanning_tree(nodes[0], nodes, pipes).is_some(),
                "{kind} block not connected"
            );
        }
    }
}
