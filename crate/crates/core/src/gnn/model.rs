//! Joint node/edge message passing and the logistic edge head.
//!
//! Layer `l` computes, from layer `l - 1` values only,
//!
//! ```text
//! h_v' = MLP_node(h_v ++ sum_{u in N(v)} h_u ++ sum_{u in N(v)} e_vu)
//! e_uv' = MLP_edge(h_u ++ h_v ++ e_uv)        (u < v)
//! ```
//!
//! and each edge is scored with `sigmoid(<w, h_u ++ h_v ++ e_uv>)` on the
//! final layer.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, MlpCache};
use crate::error::{Error, Result};
use crate::graph::{Edge, HamiltonianGraph, NodeId};
use crate::seed;

pub const NODE_FEATURES: usize = 3;
pub const EDGE_FEATURES: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub layers: usize,
    pub node_dim: usize,
    pub edge_dim: usize,
    pub hidden: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            layers: 3,
            node_dim: 16,
            edge_dim: 16,
            hidden: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnnLayer {
    pub node: Mlp,
    pub edge: Mlp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnnParams {
    pub layers: Vec<GnnLayer>,
    /// Prediction vector over `h_u ++ h_v ++ e_uv`.
    pub head: Vec<f64>,
}

impl GnnParams {
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        if arch.layers == 0 || arch.node_dim == 0 || arch.edge_dim == 0 || arch.hidden == 0 {
            return Err(Error::InvalidParameter(format!("degenerate architecture {arch:?}")));
        }
        let mut rng = seed::rng(seed);
        let (mut dh, mut de) = (NODE_FEATURES, EDGE_FEATURES);
        let mut layers = Vec::with_capacity(arch.layers);
        for _ in 0..arch.layers {
            let input = 2 * dh + de;
            layers.push(GnnLayer {
                node: Mlp::init(&[input, arch.hidden, arch.node_dim], &mut rng),
                edge: Mlp::init(&[input, arch.hidden, arch.edge_dim], &mut rng),
            });
            dh = arch.node_dim;
            de = arch.edge_dim;
        }
        let z = 2 * dh + de;
        let bound = (3.0 / z as f64).sqrt();
        let head = (0..z).map(|_| rng.gen_range(-bound..bound)).collect();
        Ok(GnnParams { layers, head })
    }

    pub fn zeros_like(&self) -> Self {
        GnnParams {
            layers: self
                .layers
                .iter()
                .map(|l| GnnLayer {
                    node: l.node.zeros_like(),
                    edge: l.edge.zeros_like(),
                })
                .collect(),
            head: vec![0.0; self.head.len()],
        }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Checks that every layer's dimensions chain from the input features
    /// to the head.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Dimension {
                layer: "layers".into(),
                expected: 1,
                got: 0,
            });
        }
        let (mut dh, mut de) = (NODE_FEATURES, EDGE_FEATURES);
        for (k, l) in self.layers.iter().enumerate() {
            let input = 2 * dh + de;
            for (mlp, name) in [(&l.node, "node"), (&l.edge, "edge")] {
                let layer = format!("layer {} {name} mlp", k + 1);
                mlp.check(&layer)?;
                if mlp.in_dim() != input {
                    return Err(Error::Dimension {
                        layer,
                        expected: input,
                        got: mlp.in_dim(),
                    });
                }
            }
            dh = l.node.out_dim();
            de = l.edge.out_dim();
        }
        if self.head.len() != 2 * dh + de {
            return Err(Error::Dimension {
                layer: "head".into(),
                expected: 2 * dh + de,
                got: self.head.len(),
            });
        }
        if self.head.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite parameter in head".into()));
        }
        Ok(())
    }

    /// Named parameter blocks in a fixed order.
    pub fn blocks(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (k, l) in self.layers.iter().enumerate() {
            for (name, mlp) in [("node", &l.node), ("edge", &l.edge)] {
                for (t, tensor) in mlp.tensors().into_iter().enumerate() {
                    let kind = if t % 2 == 0 { "weight" } else { "bias" };
                    out.push((format!("layer{}.{name}.{}.{kind}", k + 1, t / 2), tensor));
                }
            }
        }
        out.push(("head".to_string(), self.head.as_slice()));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.extend(l.node.tensors_mut());
            out.extend(l.edge.tensors_mut());
        }
        out.push(self.head.as_mut_slice());
        out
    }

    pub fn param_count(&self) -> usize {
        self.blocks().iter().map(|(_, t)| t.len()).sum()
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &GnnParams) {
        let src: Vec<Vec<f64>> = other.blocks().into_iter().map(|(_, t)| t.to_vec()).collect();
        for (dst, src) in self.tensors_mut().into_iter().zip(src) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            for x in t {
                *x *= factor;
            }
        }
    }
}

/// Input features of one graph.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    pub nodes: Vec<NodeId>,
    /// `[degree, sum w, sum |w|]` per node, row-major.
    pub node_features: Vec<f64>,
    pub edges: Vec<Edge>,
    /// `[w, |w|]` per edge, row-major.
    pub edge_features: Vec<f64>,
    /// Endpoint indices into `nodes`, smaller id first.
    pub endpoints: Vec<(usize, usize)>,
}

impl FeatureSet {
    pub fn new(g: &HamiltonianGraph) -> Self {
        let nodes: Vec<NodeId> = g.nodes().collect();
        let index: BTreeMap<NodeId, usize> = nodes.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let mut node_features = vec![0.0; nodes.len() * NODE_FEATURES];
        let mut edges = Vec::new();
        let mut edge_features = Vec::new();
        let mut endpoints = Vec::new();
        for (e, w) in g.edges() {
            let (a, b) = (index[&e.lo()], index[&e.hi()]);
            for v in [a, b] {
                node_features[v * NODE_FEATURES] += 1.0;
                node_features[v * NODE_FEATURES + 1] += w;
                node_features[v * NODE_FEATURES + 2] += w.abs();
            }
            edges.push(e);
            edge_features.extend([w, w.abs()]);
            endpoints.push((a, b));
        }
        FeatureSet {
            nodes,
            node_features,
            edges,
            edge_features,
            endpoints,
        }
    }

    pub fn node(&self, v: NodeId) -> Option<&[f64]> {
        let k = self.nodes.binary_search(&v).ok()?;
        Some(&self.node_features[k * NODE_FEATURES..(k + 1) * NODE_FEATURES])
    }

    pub fn edge(&self, e: Edge) -> Option<&[f64]> {
        let k = self.edges.binary_search(&e).ok()?;
        Some(&self.edge_features[k * EDGE_FEATURES..(k + 1) * EDGE_FEATURES])
    }
}

struct LayerCache {
    dh: usize,
    de: usize,
    node: MlpCache,
    edge: MlpCache,
}

/// Result of a forward pass, kept for backpropagation.
pub struct ForwardPass {
    pub logits: Vec<f64>,
    caches: Vec<LayerCache>,
    /// Final-layer representations feeding the head.
    h: Vec<f64>,
    e: Vec<f64>,
    dh: usize,
    de: usize,
}

impl ForwardPass {
    /// On/off state of every hidden ReLU unit, layer by layer.
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.caches
            .iter()
            .flat_map(|c| c.node.active().chain(c.edge.active()))
            .collect()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let z = x.exp();
        z / (1.0 + z)
    }
}

impl GnnParams {
    pub fn forward(&self, fs: &FeatureSet) -> Result<ForwardPass> {
        self.validate()?;
        let nv = fs.nodes.len();
        let ne = fs.edges.len();
        let mut h = fs.node_features.clone();
        let mut e = fs.edge_features.clone();
        let (mut dh, mut de) = (NODE_FEATURES, EDGE_FEATURES);
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let width = 2 * dh + de;
            let mut xn = vec![0.0; nv * width];
            for v in 0..nv {
                xn[v * width..v * width + dh].copy_from_slice(&h[v * dh..(v + 1) * dh]);
            }
            let mut xe = vec![0.0; ne * width];
            for (k, &(a, b)) in fs.endpoints.iter().enumerate() {
                let ek = &e[k * de..(k + 1) * de];
                for (v, u) in [(a, b), (b, a)] {
                    let row = &mut xn[v * width..(v + 1) * width];
                    for (dst, src) in row[dh..2 * dh].iter_mut().zip(&h[u * dh..(u + 1) * dh]) {
                        *dst += src;
                    }
                    for (dst, src) in row[2 * dh..].iter_mut().zip(ek) {
                        *dst += src;
                    }
                }
                let row = &mut xe[k * width..(k + 1) * width];
                row[..dh].copy_from_slice(&h[a * dh..(a + 1) * dh]);
                row[dh..2 * dh].copy_from_slice(&h[b * dh..(b + 1) * dh]);
                row[2 * dh..].copy_from_slice(ek);
            }
            let (hn, node_cache) = layer.node.forward(&xn, nv);
            let (en, edge_cache) = layer.edge.forward(&xe, ne);
            caches.push(LayerCache {
                dh,
                de,
                node: node_cache,
                edge: edge_cache,
            });
            h = hn;
            e = en;
            dh = layer.node.out_dim();
            de = layer.edge.out_dim();
        }
        let logits = fs
            .endpoints
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| {
                let (wa, rest) = self.head.split_at(dh);
                let (wb, we) = rest.split_at(dh);
                dot(wa, &h[a * dh..(a + 1) * dh])
                    + dot(wb, &h[b * dh..(b + 1) * dh])
                    + dot(we, &e[k * de..(k + 1) * de])
            })
            .collect();
        Ok(ForwardPass {
            logits,
            caches,
            h,
            e,
            dh,
            de,
        })
    }

    /// Gradient of a loss with respect to every parameter, given the loss
    /// gradient with respect to each edge logit.
    pub fn backward(&self, fs: &FeatureSet, pass: &ForwardPass, dlogits: &[f64]) -> GnnParams {
        let mut grad = self.zeros_like();
        let nv = fs.nodes.len();
        let (dh, de) = (pass.dh, pass.de);
        let mut gh = vec![0.0; nv * dh];
        let mut ge = vec![0.0; fs.edges.len() * de];
        let (wa, rest) = self.head.split_at(dh);
        let (wb, we) = rest.split_at(dh);
        for (k, &(a, b)) in fs.endpoints.iter().enumerate() {
            let g = dlogits[k];
            if g == 0.0 {
                continue;
            }
            let (ga, rest) = grad.head.split_at_mut(dh);
            let (gb, gw) = rest.split_at_mut(dh);
            axpy(ga, g, &pass.h[a * dh..(a + 1) * dh]);
            axpy(gb, g, &pass.h[b * dh..(b + 1) * dh]);
            axpy(gw, g, &pass.e[k * de..(k + 1) * de]);
            axpy(&mut gh[a * dh..(a + 1) * dh], g, wa);
            axpy(&mut gh[b * dh..(b + 1) * dh], g, wb);
            axpy(&mut ge[k * de..(k + 1) * de], g, we);
        }
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let cache = &pass.caches[l];
            let (pdh, pde) = (cache.dh, cache.de);
            let width = 2 * pdh + pde;
            let dxn = layer.node.backward(&cache.node, &gh, &mut grad.layers[l].node);
            let dxe = layer.edge.backward(&cache.edge, &ge, &mut grad.layers[l].edge);
            let mut ph = vec![0.0; nv * pdh];
            let mut pe = vec![0.0; fs.edges.len() * pde];
            for v in 0..nv {
                axpy(&mut ph[v * pdh..(v + 1) * pdh], 1.0, &dxn[v * width..v * width + pdh]);
            }
            for (k, &(a, b)) in fs.endpoints.iter().enumerate() {
                let pek = &mut pe[k * pde..(k + 1) * pde];
                for (v, u) in [(a, b), (b, a)] {
                    let row = &dxn[v * width..(v + 1) * width];
                    axpy(&mut ph[u * pdh..(u + 1) * pdh], 1.0, &row[pdh..2 * pdh]);
                    axpy(pek, 1.0, &row[2 * pdh..]);
                }
                let row = &dxe[k * width..(k + 1) * width];
                axpy(pek, 1.0, &row[2 * pdh..]);
                axpy(&mut ph[a * pdh..(a + 1) * pdh], 1.0, &row[..pdh]);
                axpy(&mut ph[b * pdh..(b + 1) * pdh], 1.0, &row[pdh..2 * pdh]);
            }
            gh = ph;
            ge = pe;
        }
        grad
    }

    /// Flip-merge probability for every edge of `g`.
    pub fn predict(&self, g: &HamiltonianGraph) -> Result<BTreeMap<Edge, f64>> {
        let fs = FeatureSet::new(g);
        let pass = self.forward(&fs)?;
        Ok(fs
            .edges
            .iter()
            .copied()
            .zip(pass.logits.iter().map(|&z| sigmoid(z)))
            .collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
