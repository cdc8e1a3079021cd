//! The planar perceptron network.
//!
//! Node `j` outputs `clamp01(b_j + Σ_{i ∈ U(j)} w_{i→j} · x_i)`. Weights are
//! stored flat, node by node, in the topology's neighbour order.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GridPosition, Topology, TopologyKind, TopologySpec};
use crate::imaging::Raster;

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarNetwork {
    topology: Topology,
    /// `offsets[j]..offsets[j + 1]` indexes node `j`'s incoming weights.
    offsets: Vec<usize>,
    weights: Vec<f64>,
    biases: Vec<f64>,
    seed: u64,
}

impl PlanarNetwork {
    /// Weights drawn i.i.d. from `[init_low, init_high]`, biases zero.
    pub fn init(topology: Topology, init_low: f64, init_high: f64, seed: u64) -> Result<Self> {
        if !(init_low <= init_high) {
            return Err(Error::invalid(format!(
                "init range [{init_low}, {init_high}] is empty"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::zeros(topology);
        net.seed = seed;
        if init_low < init_high {
            for w in &mut net.weights {
                *w = rng.gen_range(init_low..=init_high);
            }
        } else {
            net.weights.fill(init_low);
        }
        Ok(net)
    }

    pub fn zeros(topology: Topology) -> Self {
        let mut offsets = Vec::with_capacity(topology.node_count() + 1);
        offsets.push(0);
        for j in 0..topology.node_count() {
            offsets.push(offsets[j] + topology.neighbors(j).len());
        }
        let edges = *offsets.last().unwrap();
        let nodes = topology.node_count();
        Self {
            topology,
            offsets,
            weights: vec![0.0; edges],
            biases: vec![0.0; nodes],
            seed: 0,
        }
    }

    /// Self-weight 1, everything else 0.
    pub fn identity(topology: Topology) -> Self {
        let mut net = Self::zeros(topology);
        for j in 0..net.node_count() {
            let slot = net
                .topology
                .neighbors(j)
                .iter()
                .position(|&i| i == j)
                .expect("every neighbourhood contains its centre");
            net.weights[net.offsets[j] + slot] = 1.0;
        }
        net
    }

    /// Sets weight `i → j` when `i` is in `j`'s neighbourhood.
    pub fn set_edge(&mut self, source: usize, target: usize, weight: f64) -> Result<()> {
        let slot = self
            .topology
            .neighbors(target)
            .iter()
            .position(|&i| i == source)
            .ok_or_else(|| {
                Error::invalid(format!("node {source} is not a neighbour of node {target}"))
            })?;
        self.weights[self.offsets[target] + slot] = weight;
        Ok(())
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn node_count(&self) -> usize {
        self.biases.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Total incoming weights, biases excluded.
    pub fn connection_count(&self) -> usize {
        self.weights.len()
    }

    pub fn node_weights(&self, node: usize) -> &[f64] {
        &self.weights[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn node_weights_mut(&mut self, node: usize) -> &mut [f64] {
        &mut self.weights[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub(crate) fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Pre-clamp activation of `node`.
    pub fn activation(&self, node: usize, x: &[f64]) -> f64 {
        let mut acc = self.biases[node];
        for (w, &i) in self.node_weights(node).iter().zip(self.topology.neighbors(node)) {
            acc += w * x[i];
        }
        acc
    }

    /// Forward pass over raw row-major values; `x.len()` must equal the node count.
    pub fn forward_values(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.node_count());
        (0..self.node_count())
            .map(|j| self.activation(j, x).clamp(0.0, 1.0))
            .collect()
    }

    fn check_dims<R: Raster>(&self, x: &R) -> Result<()> {
        let dims = x.grid_dims();
        if dims != (self.topology.height, self.topology.width) {
            return Err(Error::invalid(format!(
                "input is {}x{}, network is {}x{}",
                dims.0, dims.1, self.topology.height, self.topology.width
            )));
        }
        Ok(())
    }

    pub fn forward<R: Raster>(&self, x: &R) -> Result<R> {
        self.check_dims(x)?;
        Ok(x.with_values(self.forward_values(x.values())))
    }

    /// Applies the network `j` times, feeding each output back in.
    pub fn forward_chain<R: Raster>(&self, x: &R, j: usize) -> Result<R> {
        if j == 0 {
            return Err(Error::invalid("chain length must be at least 1"));
        }
        self.check_dims(x)?;
        let mut values = x.values().to_vec();
        for _ in 0..j {
            values = self.forward_values(&values);
        }
        Ok(x.with_values(values))
    }

    /// Adds `weight_deltas` (flat, aligned to [`Self::weights`]) and `bias_deltas`.
    pub fn apply_deltas(&mut self, weight_deltas: &[f64], bias_deltas: &[f64]) {
        debug_assert_eq!(weight_deltas.len(), self.weights.len());
        debug_assert_eq!(bias_deltas.len(), self.biases.len());
        for (w, d) in self.weights.iter_mut().zip(weight_deltas) {
            *w += d;
        }
        for (b, d) in self.biases.iter_mut().zip(bias_deltas) {
            *b += d;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).all(|v| v.is_finite())
    }

    /// One edge per weight, annotated with grid positions and biases.
    pub fn export_structure(&self) -> StructureGraph {
        let topo = &self.topology;
        let nodes = (0..self.node_count())
            .map(|j| StructureNode {
                position: topo.position(j),
                bias: self.biases[j],
            })
            .collect();
        let mut edges = Vec::with_capacity(self.weights.len());
        for j in 0..self.node_count() {
            for (&i, &w) in topo.neighbors(j).iter().zip(self.node_weights(j)) {
                edges.push(StructureEdge {
                    source: topo.position(i),
                    target: topo.position(j),
                    weight: w,
                });
            }
        }
        StructureGraph {
            kind: topo.kind,
            height: topo.height,
            width: topo.width,
            polar: topo.polar_geometry.clone(),
            nodes,
            edges,
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            topology: self.topology.spec(),
            seed: self.seed,
            weights: (0..self.node_count())
                .map(|j| self.node_weights(j).to_vec())
                .collect(),
            biases: self.biases.clone(),
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Data(format!("not a network checkpoint: `{}`", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!(
                "unsupported checkpoint version {}",
                ck.version
            )));
        }
        let topology = ck.topology.build()?;
        let mut net = Self::zeros(topology);
        net.seed = ck.seed;
        if ck.weights.len() != net.node_count() || ck.biases.len() != net.node_count() {
            return Err(Error::Data(format!(
                "checkpoint holds {} nodes, topology has {}",
                ck.weights.len(),
                net.node_count()
            )));
        }
        for (j, ws) in ck.weights.iter().enumerate() {
            let slot = net.node_weights_mut(j);
            if ws.len() != slot.len() {
                return Err(Error::Data(format!(
                    "node {j}: {} weights, neighbourhood has {}",
                    ws.len(),
                    slot.len()
                )));
            }
            slot.copy_from_slice(ws);
        }
        net.biases = ck.biases;
        if !net.is_finite() {
            return Err(Error::Numeric("checkpoint contains non-finite weights".into()));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_checkpoint())
            .map_err(|e| Error::Data(format!("encoding checkpoint: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        Self::from_checkpoint(ck)
    }
}

const CHECKPOINT_FORMAT: &str = "planar-network";
const CHECKPOINT_VERSION: u32 = 1;

/// Self-describing JSON checkpoint. Floats round-trip bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub topology: TopologySpec,
    pub seed: u64,
    /// Per node, aligned to its neighbourhood order.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureNode {
    pub position: GridPosition,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureEdge {
    pub source: GridPosition,
    pub target: GridPosition,
    pub weight: f64,
}

/// Weighted edge list of a network, ready for rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureGraph {
    pub kind: TopologyKind,
    pub height: usize,
    pub width: usize,
    pub polar: Option<crate::geometry::PolarGeometry>,
    pub nodes: Vec<StructureNode>,
    pub edges: Vec<StructureEdge>,
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::imaging::{apply_transform, GrayImage, TransformSpec};

    fn default_topology() -> Topology {
        Topology::cartesian(16, 16, 2.0).unwrap()
    }

    fn noise(seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(16, 16, |_, _| rng.gen())
    }

    /// Weight 1 from the pixel below each node: content moves up one row.
    fn shift_up(topology: Topology) -> PlanarNetwork {
        let mut net = PlanarNetwork::zeros(topology);
        let w = net.topology().width;
        for j in 0..net.node_count() {
            let below = j + w;
            if below < net.node_count() {
                net.set_edge(below, j, 1.0).unwrap();
            }
        }
        net
    }

    #[test]
    fn init_counts_and_ranges() {
        let net = PlanarNetwork::init(default_topology(), -1.0, 1.0, 7).unwrap();
        assert_eq!(net.connection_count(), 2116);
        assert!(net.weights().iter().all(|w| (-1.0..=1.0).contains(w)));
        assert!(net.biases().iter().all(|&b| b == 0.0));
        let zero = PlanarNetwork::init(default_topology(), 0.0, 0.0, 7).unwrap();
        assert!(zero.weights().iter().all(|&w| w == 0.0));
        let again = PlanarNetwork::init(default_topology(), -1.0, 1.0, 7).unwrap();
        assert_eq!(net, again);
        assert!(PlanarNetwork::init(default_topology(), 1.0, -1.0, 7).is_err());
    }

    #[test]
    fn identity_and_constant_outputs() {
        let x = noise(1);
        let id = PlanarNetwork::identity(default_topology());
        assert_eq!(id.forward(&x).unwrap(), x);
        assert_eq!(id.forward_chain(&x, 7).unwrap(), x);

        let mut half = PlanarNetwork::zeros(default_topology());
        half.biases_mut().fill(0.5);
        assert!(half.forward(&x).unwrap().pixels().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn single_node_clamps() {
        let topo = Topology::cartesian(1, 2, 1.5).unwrap();
        let mut net = PlanarNetwork::zeros(topo);
        net.node_weights_mut(0).copy_from_slice(&[2.0, 1.0]);
        net.biases_mut()[0] = -0.1;
        let x = GrayImage::new(2, 1, vec![0.2, 0.9]).unwrap();
        assert!((net.activation(0, x.pixels()) - 1.2).abs() < 1e-12);
        assert_eq!(net.forward(&x).unwrap().get(0, 0), 1.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let net = PlanarNetwork::identity(default_topology());
        let x = GrayImage::filled(8, 8, 0.1);
        assert!(net.forward(&x).is_err());
        assert!(net.forward_chain(&noise(2), 0).is_err());
    }

    #[test]
    fn chained_shift_matches_translation() {
        let net = shift_up(default_topology());
        let x = noise(3);
        assert_eq!(net.forward_chain(&x, 1).unwrap(), net.forward(&x).unwrap());
        let five = net.forward_chain(&x, 5).unwrap();
        let oracle = apply_transform(&x, &TransformSpec::translate(0.0, 5.0), 1.0);
        assert_eq!(five, oracle);
        for y in 11..16 {
            for c in 0..16 {
                assert_eq!(five.get(c, y), 0.0);
            }
        }
    }

    #[test]
    fn locality_and_node_independence() {
        let net = PlanarNetwork::init(default_topology(), -1.0, 1.0, 4).unwrap();
        let x = noise(5);
        let base = net.forward(&x).unwrap();
        let mut px = x.pixels().to_vec();
        let p = 5 * 16 + 9;
        px[p] = 1.0 - px[p];
        let moved = net.forward(&GrayImage::new(16, 16, px).unwrap()).unwrap();
        for j in 0..256 {
            if !net.topology().neighbors(j).contains(&p) {
                assert_eq!(moved.pixels()[j], base.pixels()[j]);
            }
        }
        let mut other = net.clone();
        for v in other.node_weights_mut(100) {
            *v += 0.3;
        }
        let out = other.forward(&x).unwrap();
        for j in (0..256).filter(|&j| j != 100) {
            assert_eq!(out.pixels()[j], base.pixels()[j]);
        }
    }

    #[test]
    fn structure_export() {
        let zero = PlanarNetwork::zeros(default_topology()).export_structure();
        assert_eq!(zero.edges.len(), 2116);
        assert!(zero.edges.iter().all(|e| e.weight == 0.0));
        let id = PlanarNetwork::identity(default_topology()).export_structure();
        for e in &id.edges {
            assert_eq!(e.weight, if e.source == e.target { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        let mut net = PlanarNetwork::init(default_topology(), -1.0, 1.0, 11).unwrap();
        net.biases_mut()[3] = 0.1 + 0.2;
        net.save(&path).unwrap();
        let back = PlanarNetwork::load(&path).unwrap();
        assert_eq!(net, back);
        for (a, b) in net.weights().iter().zip(back.weights()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(PlanarNetwork::load(&dir.path().join("missing.json")).is_err());
    }
}
