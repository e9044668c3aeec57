//! JSON document formats for graphs, labeled instances and contraction logs.
//!
//! Graph document:
//!
//! ```json
//! {"n": 3, "h": [0.0, 1.5, 0.0], "J": [[1, 2, -2.0], [2, 3, 0.5]], "offset": 0.0}
//! ```
//!
//! Spins are 1-based and every coupling triple has `i < j`. Reduced graphs,
//! whose spins are a subset of `1..=n`, carry an extra `"nodes"` list.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::contraction::{ContractionLog, ContractionRecord};
use crate::error::{Error, Result};
use crate::graph::{Edge, HamiltonianGraph, NodeId, AUX};
use crate::oracle::EdgeLabel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub n: u32,
    pub h: Vec<f64>,
    #[serde(rename = "J")]
    pub couplings: Vec<(NodeId, NodeId, f64)>,
    #[serde(default)]
    pub offset: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<NodeId>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDoc {
    #[serde(flatten)]
    pub graph: GraphDoc,
    pub labels: Vec<(NodeId, NodeId, EdgeLabel)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogDoc {
    pub records: Vec<(NodeId, NodeId, bool, f64)>,
}

/// A graph with per-edge ground-truth labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledInstance {
    pub graph: HamiltonianGraph,
    pub labels: BTreeMap<Edge, EdgeLabel>,
}

impl GraphDoc {
    pub fn from_graph(g: &HamiltonianGraph) -> Self {
        let n = g.n();
        let mut h = vec![0.0; n as usize];
        let mut couplings = Vec::new();
        for (e, w) in g.edges() {
            if e.touches_aux() {
                h[e.hi() as usize - 1] = w;
            } else {
                couplings.push((e.lo(), e.hi(), w));
            }
        }
        let spins: Vec<NodeId> = g.spins().collect();
        let full = spins.len() == n as usize;
        GraphDoc {
            n,
            h,
            couplings,
            offset: g.offset(),
            nodes: (!full).then_some(spins),
        }
    }

    pub fn to_graph(&self) -> Result<HamiltonianGraph> {
        if self.h.len() != self.n as usize {
            return Err(Error::Parse(format!(
                "\"h\" has {} entries but n = {}",
                self.h.len(),
                self.n
            )));
        }
        let nodes: BTreeSet<NodeId> = match &self.nodes {
            Some(list) => {
                let mut set = BTreeSet::new();
                for &v in list {
                    if v == AUX || v > self.n {
                        return Err(Error::Parse(format!("node {v} outside 1..={}", self.n)));
                    }
                    if !set.insert(v) {
                        return Err(Error::Parse(format!("node {v} listed twice")));
                    }
                }
                set
            }
            None => (1..=self.n).collect(),
        };
        let mut edges = Vec::with_capacity(self.couplings.len() + self.h.len());
        for (k, &hk) in self.h.iter().enumerate() {
            let v = k as NodeId + 1;
            if hk != 0.0 {
                if !nodes.contains(&v) {
                    return Err(Error::Parse(format!("bias on absent node {v}")));
                }
                edges.push((Edge::new(AUX, v), hk));
            }
        }
        for &(i, j, w) in &self.couplings {
            if i == AUX || i >= j {
                return Err(Error::InvalidCoupling {
                    i,
                    j,
                    reason: "triples need 1 <= i < j",
                });
            }
            if w == 0.0 {
                return Err(Error::InvalidCoupling {
                    i,
                    j,
                    reason: "zero weight",
                });
            }
            edges.push((Edge::new(i, j), w));
        }
        HamiltonianGraph::from_parts(self.n, nodes, edges, self.offset)
    }
}

impl LabeledInstance {
    pub fn to_doc(&self) -> LabeledDoc {
        LabeledDoc {
            graph: GraphDoc::from_graph(&self.graph),
            labels: self.labels.iter().map(|(e, &l)| (e.lo(), e.hi(), l)).collect(),
        }
    }

    pub fn from_doc(doc: &LabeledDoc) -> Result<Self> {
        let graph = doc.graph.to_graph()?;
        let mut labels = BTreeMap::new();
        for &(i, j, l) in &doc.labels {
            if i == j || graph.weight(i, j).is_none() {
                return Err(Error::Parse(format!("label for missing edge ({i}, {j})")));
            }
            if labels.insert(Edge::new(i, j), l).is_some() {
                return Err(Error::Parse(format!("edge ({i}, {j}) labeled twice")));
            }
        }
        Ok(LabeledInstance { graph, labels })
    }
}

impl LogDoc {
    pub fn from_log(log: &ContractionLog) -> Self {
        LogDoc {
            records: log
                .records
                .iter()
                .map(|r| (r.kept, r.removed, r.flipped, r.absorbed_offset))
                .collect(),
        }
    }

    pub fn to_log(&self) -> Result<ContractionLog> {
        let log = ContractionLog {
            records: self
                .records
                .iter()
                .map(|&(kept, removed, flipped, absorbed_offset)| ContractionRecord {
                    kept,
                    removed,
                    flipped,
                    absorbed_offset,
                })
                .collect(),
        };
        log.validate()?;
        Ok(log)
    }
}

pub fn parse_graph(text: &str) -> Result<HamiltonianGraph> {
    serde_json::from_str::<GraphDoc>(text)?.to_graph()
}

pub fn parse_labeled(text: &str) -> Result<LabeledInstance> {
    LabeledInstance::from_doc(&serde_json::from_str(text)?)
}

pub fn parse_log(text: &str) -> Result<ContractionLog> {
    serde_json::from_str::<LogDoc>(text)?.to_log()
}

pub fn graph_to_string(g: &HamiltonianGraph) -> String {
    to_json(&GraphDoc::from_graph(g))
}

pub fn labeled_to_string(inst: &LabeledInstance) -> String {
    to_json(&inst.to_doc())
}

pub fn log_to_string(log: &ContractionLog) -> String {
    to_json(&LogDoc::from_log(log))
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("documents always serialize");
    s.push('\n');
    s
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_string(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_to_string(path)?)?)
}

pub fn read_graph(path: &Path) -> Result<HamiltonianGraph> {
    parse_graph(&read_to_string(path)?)
}

pub fn read_labeled(path: &Path) -> Result<LabeledInstance> {
    parse_labeled(&read_to_string(path)?)
}

pub fn read_log(path: &Path) -> Result<ContractionLog> {
    parse_log(&read_to_string(path)?)
}

pub fn write_graph(path: &Path, g: &HamiltonianGraph) -> Result<()> {
    write_string(path, &graph_to_string(g))
}

pub fn write_labeled(path: &Path, inst: &LabeledInstance) -> Result<()> {
    write_string(path, &labeled_to_string(inst))
}

pub fn write_log(path: &Path, log: &ContractionLog) -> Result<()> {
    write_string(path, &log_to_string(log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Oracle;
    use proptest::prelude::*;

    #[test]
    fn writer_key_order() {
        let g = HamiltonianGraph::build(&[0.0, 2.5], &[(1, 2, -1.0)]).unwrap();
        let text = graph_to_string(&g);
        assert_eq!(text, "{\"n\":2,\"h\":[0.0,2.5],\"J\":[[1,2,-1.0]],\"offset\":0.0}\n");
    }

    #[test]
    fn reader_accepts_any_key_order() {
        let g = parse_graph(r#"{"offset": -1.5, "J": [[1, 3, 2.0]], "h": [1.0, 0, 0], "n": 3}"#).unwrap();
        assert_eq!(g.offset(), -1.5);
        assert_eq!(g.weight(1, 3), Some(2.0));
        assert_eq!(g.bias(1), 1.0);
        assert_eq!(g.spin_count(), 3);
    }

    #[test]
    fn reader_rejects_malformed() {
        for bad in [
            r#"{"n": 2, "h": [0], "J": [], "offset": 0}"#,
            r#"{"n": 2, "h": [0, 0], "J": [[2, 1, 1.0]], "offset": 0}"#,
            r#"{"n": 2, "h": [0, 0], "J": [[1, 1, 1.0]], "offset": 0}"#,
            r#"{"n": 2, "h": [0, 0], "J": [[0, 1, 1.0]], "offset": 0}"#,
            r#"{"n": 2, "h": [0, 0], "J": [[1, 3, 1.0]], "offset": 0}"#,
            r#"{"n": 2, "h": [0, 0], "J": [[1, 2, 1.0], [1, 2, 2.0]], "offset": 0}"#,
            r#"{"n": 2, "h": [0, 0], "J": [[1, 2, 0.0]], "offset": 0}"#,
            r#"{"n": 2, "h": [0, 0], "J": [], "offset": 0, "nodes": [3]}"#,
            r#"{"n": 2, "h": [1, 0], "J": [], "offset": 0, "nodes": [2]}"#,
            r#"{"n": 2, "h": [0, 0], "J": "x"}"#,
        ] {
            assert!(parse_graph(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn reduced_graph_round_trip() {
        let g = HamiltonianGraph::build(&[0.5, 0.0, 0.0, 0.0], &[(1, 2, 1.0), (2, 3, -2.0), (3, 4, 0.5)]).unwrap();
        let (r, rec) = g.flip_merge(2, 3).unwrap();
        let text = graph_to_string(&r);
        assert!(text.contains("\"nodes\":[1,2,4]"), "{text}");
        assert_eq!(parse_graph(&text).unwrap(), r);
        let log = ContractionLog { records: vec![rec] };
        assert_eq!(parse_log(&log_to_string(&log)).unwrap(), log);
    }

    #[test]
    fn labeled_round_trip() {
        let g = HamiltonianGraph::build(&[0.0; 3], &[(1, 2, 1.0), (2, 3, -2.0)]).unwrap();
        let labels = Oracle::default().label_edges(&g).unwrap();
        let inst = LabeledInstance { graph: g, labels };
        let text = labeled_to_string(&inst);
        assert!(text.ends_with("\"labels\":[[1,2,\"A\"],[2,3,\"C\"]]}\n"), "{text}");
        assert_eq!(parse_labeled(&text).unwrap(), inst);
        assert!(parse_labeled(r#"{"n":2,"h":[0,0],"J":[],"offset":0,"labels":[[1,2,"A"]]}"#).is_err());
        assert!(parse_labeled(r#"{"n":2,"h":[0,0],"J":[[1,2,1]],"offset":0,"labels":[[1,2,"D"]]}"#).is_err());
    }

    #[test]
    fn log_reader_validates() {
        assert!(parse_log(r#"{"records": [[1, 0, false, 1.0]]}"#).is_err());
        assert!(parse_log(r#"{"records": [[1, 2, false, 1.0], [2, 3, true, 0.0]]}"#).is_err());
    }

    proptest! {
        #[test]
        fn graph_documents_round_trip_bit_exactly(
            h in proptest::collection::vec(prop_oneof![Just(0.0), -5.0f64..5.0], 1..8),
            raw in proptest::collection::vec((1u32..8, 1u32..8, -5.0f64..5.0), 0..20),
            offset in -10.0f64..10.0,
        ) {
            let n = h.len() as u32;
            let mut seen = BTreeSet::new();
            let j: Vec<_> = raw
                .into_iter()
                .filter(|&(a, b, w)| a != b && a <= n && b <= n && w != 0.0 && seen.insert(Edge::new(a, b)))
                .collect();
            let g = HamiltonianGraph::build(&h, &j).unwrap();
            let g = HamiltonianGraph::from_parts(g.n(), g.spins().collect(), g.edges().collect::<Vec<_>>(), offset).unwrap();
            let text = graph_to_string(&g);
            let back = parse_graph(&text).unwrap();
            prop_assert_eq!(&back, &g);
            prop_assert_eq!(graph_to_string(&back), text);
        }
    }
}
