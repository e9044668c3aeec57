//! Random Ising instances over Erdős–Rényi, Barabási–Albert and
//! Watts–Strogatz topologies, and labeled corpora built from them.
//!
//! Every instance is a pure function of `(topology, n, parameter, seed)`;
//! a corpus is a pure function of its [`DatasetConfig`].
//!
//! Average degree `d` maps to generator parameters as follows:
//! ER uses `p = d / (n - 1)`, BA uses `m = round(d / 2)`, and WS uses the
//! even `k >= 2` nearest to `d`. All are clipped to what `n` allows. The BA
//! generator starts from a complete graph on `m` nodes and attaches every
//! further node to `m` distinct targets with probability proportional to
//! degree, giving `m(m-1)/2 + m(n-m)` edges.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{HamiltonianGraph, NodeId};
use crate::io::{self, LabeledInstance};
use crate::oracle::{EdgeLabel, Oracle};
use crate::seed;

pub const BA_VARIANT: &str = "complete graph on m nodes, then preferential attachment of m edges per new node";

const SPLIT_STREAM: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Er,
    Ba,
    Ws,
}

impl Topology {
    pub const ALL: [Topology; 3] = [Topology::Er, Topology::Ba, Topology::Ws];

    pub fn as_str(self) -> &'static str {
        match self {
            Topology::Er => "er",
            Topology::Ba => "ba",
            Topology::Ws => "ws",
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "er" => Ok(Topology::Er),
            "ba" => Ok(Topology::Ba),
            "ws" => Ok(Topology::Ws),
            other => Err(Error::InvalidParameter(format!("unknown topology {other:?}"))),
        }
    }
}

/// Generator parameter for one topology.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DegreeParam {
    Er { p: f64 },
    Ba { m: u32 },
    Ws { k: u32, beta: f64 },
}

impl DegreeParam {
    pub fn topology(&self) -> Topology {
        match self {
            DegreeParam::Er { .. } => Topology::Er,
            DegreeParam::Ba { .. } => Topology::Ba,
            DegreeParam::Ws { .. } => Topology::Ws,
        }
    }

    /// Maps an average degree to this topology's parameter, or `None` when
    /// no valid parameter exists for `n`.
    pub fn from_average_degree(topology: Topology, n: u32, d: f64, ws_beta: f64) -> Option<Self> {
        if n < 2 {
            return None;
        }
        let d = d.clamp(1.0, f64::from(n - 1));
        match topology {
            Topology::Er => Some(DegreeParam::Er {
                p: d / f64::from(n - 1),
            }),
            Topology::Ba => {
                let m = ((d / 2.0).round() as u32).clamp(1, n - 1);
                Some(DegreeParam::Ba { m })
            }
            Topology::Ws => {
                let max_even = (n - 1) & !1;
                if max_even < 2 {
                    return None;
                }
                let k = ((2.0 * (d / 2.0).round()) as u32).clamp(2, max_even);
                Some(DegreeParam::Ws { k, beta: ws_beta })
            }
        }
    }

    fn validate(&self, n: u32) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if n < 2 {
            return bad(format!("n = {n} < 2"));
        }
        match *self {
            DegreeParam::Er { p } if !(p > 0.0 && p <= 1.0) => bad(format!("ER edge probability {p} not in (0, 1]")),
            DegreeParam::Ba { m } if m < 1 || m > n - 1 => {
                bad(format!("BA attachment count {m} not in [1, {}]", n - 1))
            }
            DegreeParam::Ws { k, beta } => {
                if k < 2 || k > n - 1 || k % 2 != 0 {
                    bad(format!("WS ring degree {k} must be even in [2, {}]", n - 1))
                } else if !(0.0..=1.0).contains(&beta) {
                    bad(format!("WS rewiring probability {beta} not in [0, 1]"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    fn tag(&self) -> String {
        match *self {
            DegreeParam::Er { p } => format!("p{:.4}", p),
            DegreeParam::Ba { m } => format!("m{m}"),
            DegreeParam::Ws { k, .. } => format!("k{k}"),
        }
    }
}

/// Open interval weights are drawn from; exact zeros are redrawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightRange {
    pub lo: f64,
    pub hi: f64,
}

impl Default for WeightRange {
    fn default() -> Self {
        WeightRange { lo: -5.0, hi: 5.0 }
    }
}

impl WeightRange {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        loop {
            let w = rng.gen_range(self.lo..self.hi);
            if w != 0.0 && w != self.lo {
                return w;
            }
        }
    }
}

/// Simple undirected edge list on nodes `0..n`.
fn structure<R: Rng>(param: DegreeParam, n: u32, rng: &mut R) -> BTreeSet<(u32, u32)> {
    let mut edges = BTreeSet::new();
    let key = |a: u32, b: u32| if a < b { (a, b) } else { (b, a) };
    match param {
        DegreeParam::Er { p } => {
            for a in 0..n {
                for b in a + 1..n {
                    if rng.gen_bool(p) {
                        edges.insert((a, b));
                    }
                }
            }
        }
        DegreeParam::Ba { m } => {
            let mut ends: Vec<u32> = Vec::new();
            for a in 0..m {
                for b in a + 1..m {
                    edges.insert((a, b));
                    ends.extend([a, b]);
                }
            }
            for v in m..n {
                let mut targets = BTreeSet::new();
                while targets.len() < m as usize {
                    let t = if ends.is_empty() {
                        rng.gen_range(0..v)
                    } else {
                        ends[rng.gen_range(0..ends.len())]
                    };
                    targets.insert(t);
                }
                for t in targets {
                    edges.insert(key(t, v));
                    ends.extend([t, v]);
                }
            }
        }
        DegreeParam::Ws { k, beta } => {
            for u in 0..n {
                for j in 1..=k / 2 {
                    edges.insert(key(u, (u + j) % n));
                }
            }
            let degree =
                |edges: &BTreeSet<(u32, u32)>, u: u32| edges.iter().filter(|&&(a, b)| a == u || b == u).count();
            for j in 1..=k / 2 {
                for u in 0..n {
                    let v = (u + j) % n;
                    if !rng.gen_bool(beta) || degree(&edges, u) >= (n - 1) as usize {
                        continue;
                    }
                    let mut w = rng.gen_range(0..n);
                    while w == u || edges.contains(&key(u, w)) {
                        w = rng.gen_range(0..n);
                    }
                    edges.remove(&key(u, v));
                    edges.insert(key(u, w));
                }
            }
        }
    }
    edges
}

/// One random instance with zero biases and couplings drawn from `weights`.
pub fn gen_instance(param: DegreeParam, n: u32, seed: u64, weights: WeightRange) -> Result<HamiltonianGraph> {
    param.validate(n)?;
    if !weights.lo.is_finite() || !weights.hi.is_finite() || weights.lo >= weights.hi {
        return Err(Error::InvalidParameter(format!(
            "weight range ({}, {})",
            weights.lo, weights.hi
        )));
    }
    let mut rng = seed::rng(seed);
    let edges = structure(param, n, &mut rng);
    let couplings: Vec<(NodeId, NodeId, f64)> = edges
        .into_iter()
        .map(|(a, b)| (a + 1, b + 1, weights.sample(&mut rng)))
        .collect();
    HamiltonianGraph::build(&vec![0.0; n as usize], &couplings)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub topologies: Vec<Topology>,
    pub sizes: Vec<u32>,
    /// Average-degree grid, mapped per topology.
    pub degrees: Vec<f64>,
    pub ws_beta: f64,
    pub instances_per_config: u32,
    pub weight_range: WeightRange,
    pub train_fraction: f64,
    pub master_seed: u64,
    pub oracle_cap: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            topologies: Topology::ALL.to_vec(),
            sizes: (2..=12).collect(),
            degrees: vec![2.0, 4.0, 11.0],
            ws_beta: 0.1,
            instances_per_config: 20,
            weight_range: WeightRange::default(),
            train_fraction: 0.8,
            master_seed: 0,
            oracle_cap: crate::oracle::DEFAULT_CAP,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub id: String,
    pub topology: Topology,
    pub n: u32,
    pub degree_param: DegreeParam,
    pub seed: u64,
    pub split: Split,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    #[serde(rename = "A")]
    pub a: u64,
    #[serde(rename = "B")]
    pub b: u64,
    #[serde(rename = "C")]
    pub c: u64,
}

impl LabelCounts {
    fn add(&mut self, labels: &BTreeMap<crate::graph::Edge, EdgeLabel>) {
        for l in labels.values() {
            match l {
                EdgeLabel::A => self.a += 1,
                EdgeLabel::B => self.b += 1,
                EdgeLabel::C => self.c += 1,
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: DatasetConfig,
    pub ba_variant: String,
    pub degree_mapping: String,
    pub label_counts: LabelCounts,
    pub instances: Vec<InstanceMeta>,
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "train fraction {} not in (0, 1)",
                self.train_fraction
            )));
        }
        if self.instances_per_config == 0 {
            return Err(Error::InvalidParameter("instances per config must be positive".into()));
        }
        if let Some(&n) = self.sizes.iter().find(|&&n| n as usize > self.oracle_cap) {
            return Err(Error::EnumerationCap {
                spins: n as usize,
                cap: self.oracle_cap,
            });
        }
        Ok(())
    }

    /// Distinct `(topology, n, parameter)` cells, in generation order.
    pub fn cells(&self) -> Vec<(Topology, u32, DegreeParam)> {
        let mut cells = Vec::new();
        for &topo in &self.topologies {
            for &n in &self.sizes {
                let mut seen: Vec<DegreeParam> = Vec::new();
                for &d in &self.degrees {
                    if let Some(p) = DegreeParam::from_average_degree(topo, n, d, self.ws_beta) {
                        if !seen.contains(&p) {
                            seen.push(p);
                            cells.push((topo, n, p));
                        }
                    }
                }
            }
        }
        cells
    }

    /// Instance metadata for the whole corpus, splits included.
    pub fn plan(&self) -> Result<Vec<InstanceMeta>> {
        self.validate()?;
        let mut metas = Vec::new();
        for (topo, n, param) in self.cells() {
            for k in 0..self.instances_per_config {
                let index = metas.len() as u64;
                metas.push(InstanceMeta {
                    id: format!("{topo}-n{n:02}-{}-{k:03}", param.tag()),
                    topology: topo,
                    n,
                    degree_param: param,
                    seed: seed::derive(self.master_seed, index),
                    split: Split::Train,
                });
            }
        }
        let mut order: Vec<usize> = (0..metas.len()).collect();
        let mut rng = seed::rng(seed::derive(self.master_seed, SPLIT_STREAM));
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let n_train = (self.train_fraction * metas.len() as f64).round() as usize;
        for &idx in &order[n_train..] {
            metas[idx].split = Split::Val;
        }
        Ok(metas)
    }
}

fn materialize(meta: &InstanceMeta, cfg: &DatasetConfig) -> Result<LabeledInstance> {
    let build = || {
        let graph = gen_instance(meta.degree_param, meta.n, meta.seed, cfg.weight_range)?;
        let labels = Oracle::new(cfg.oracle_cap).label_edges(&graph)?;
        Ok(LabeledInstance { graph, labels })
    };
    build().map_err(|e: Error| e.for_instance(&meta.id))
}

/// Generates and labels the whole corpus in memory.
pub fn generate(cfg: &DatasetConfig) -> Result<(Manifest, Vec<LabeledInstance>)> {
    let metas = cfg.plan()?;
    let instances: Vec<LabeledInstance> = metas.par_iter().map(|m| materialize(m, cfg)).collect::<Result<_>>()?;
    let mut counts = LabelCounts::default();
    for inst in &instances {
        counts.add(&inst.labels);
    }
    let manifest = Manifest {
        config: cfg.clone(),
        ba_variant: BA_VARIANT.to_string(),
        degree_mapping: "er: p = d/(n-1); ba: m = round(d/2); ws: k = nearest even >= 2".to_string(),
        label_counts: counts,
        instances: metas,
    };
    Ok((manifest, instances))
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const INSTANCE_DIR: &str = "instances";

pub fn manifest_to_string(m: &Manifest) -> String {
    serde_json::to_string_pretty(m).expect("manifest serializes") + "\n"
}

/// Writes `manifest.json` and `instances/<id>.json` under `dir`.
pub fn build_dataset(cfg: &DatasetConfig, dir: &Path) -> Result<Manifest> {
    let (manifest, instances) = generate(cfg)?;
    for (meta, inst) in manifest.instances.iter().zip(&instances) {
        io::write_labeled(&dir.join(INSTANCE_DIR).join(format!("{}.json", meta.id)), inst)?;
    }
    io::write_string(&dir.join(MANIFEST_FILE), &manifest_to_string(&manifest))?;
    Ok(manifest)
}

pub fn parse_manifest(text: &str) -> Result<Manifest> {
    Ok(serde_json::from_str(text)?)
}

/// A corpus loaded from disk.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub manifest: Manifest,
    /// SHA-256 of the manifest bytes.
    pub manifest_hash: String,
    pub instances: Vec<(InstanceMeta, LabeledInstance)>,
}

impl Dataset {
    pub fn load(dir: &Path) -> Result<Self> {
        use sha2::{Digest, Sha256};
        let text = io::read_to_string(&dir.join(MANIFEST_FILE))?;
        let manifest = parse_manifest(&text)?;
        let manifest_hash = hex::encode(Sha256::digest(text.as_bytes()));
        let instances = manifest
            .instances
            .par_iter()
            .map(|meta| {
                let path = dir.join(INSTANCE_DIR).join(format!("{}.json", meta.id));
                io::read_labeled(&path).map(|inst| (meta.clone(), inst))
            })
            .collect::<Result<_>>()?;
        Ok(Dataset {
            manifest,
            manifest_hash,
            instances,
        })
    }

    pub fn from_memory(manifest: Manifest, instances: Vec<LabeledInstance>) -> Self {
        use sha2::{Digest, Sha256};
        let manifest_hash = hex::encode(Sha256::digest(manifest_to_string(&manifest).as_bytes()));
        let instances = manifest.instances.iter().cloned().zip(instances).collect();
        Dataset {
            manifest,
            manifest_hash,
            instances,
        }
    }

    pub fn split(&self, split: Split) -> Vec<&LabeledInstance> {
        self.instances
            .iter()
            .filter(|(m, _)| m.split == split)
            .map(|(_, i)| i)
            .collect()
    }
}
