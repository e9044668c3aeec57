//! Iterative compression: score every edge, contract the most confident
//! one, repeat until the target size is reached.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::contraction::ContractionLog;
use crate::error::{Error, Result};
use crate::gnn::GnnParams;
use crate::graph::{Edge, HamiltonianGraph, NodeId};
use crate::io;
use crate::oracle::{EdgeLabel, Oracle};
use crate::seed;

/// Confidences closer than this are treated as tied.
pub const CONFIDENCE_TIE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetMode {
    /// Stop once spins <= value * initial spins.
    NodeRatio,
    /// Stop once edges <= value * initial edges.
    EdgeRatio,
    /// Stop once spins <= value.
    AbsoluteNodes,
}

impl TargetMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetMode::NodeRatio => "node-ratio",
            TargetMode::EdgeRatio => "edge-ratio",
            TargetMode::AbsoluteNodes => "absolute-nodes",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionTarget {
    pub mode: TargetMode,
    pub value: f64,
}

impl CompressionTarget {
    /// Keep a fraction `alpha` of the spins.
    pub fn node_ratio(alpha: f64) -> Self {
        CompressionTarget {
            mode: TargetMode::NodeRatio,
            value: alpha,
        }
    }

    pub fn edge_ratio(alpha: f64) -> Self {
        CompressionTarget {
            mode: TargetMode::EdgeRatio,
            value: alpha,
        }
    }

    pub fn nodes(count: usize) -> Self {
        CompressionTarget {
            mode: TargetMode::AbsoluteNodes,
            value: count as f64,
        }
    }

    fn validate(&self, g: &HamiltonianGraph) -> Result<()> {
        let ok = match self.mode {
            TargetMode::NodeRatio => {
                self.value > 0.0
                    && self.value <= 1.0
                    && (g.spin_count() == 0 || self.value * g.spin_count() as f64 >= 1.0)
            }
            TargetMode::EdgeRatio => self.value > 0.0 && self.value <= 1.0,
            TargetMode::AbsoluteNodes => self.value >= 1.0 && self.value.fract() == 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "{} target {} is unreachable for a graph with {} spins",
                self.mode.as_str(),
                self.value,
                g.spin_count()
            )))
        }
    }

    fn reached(&self, g: &HamiltonianGraph, spins0: usize, edges0: usize) -> bool {
        match self.mode {
            TargetMode::NodeRatio => g.spin_count() as f64 <= self.value * spins0 as f64,
            TargetMode::EdgeRatio => g.edge_count() as f64 <= self.value * edges0 as f64,
            TargetMode::AbsoluteNodes => g.spin_count() as f64 <= self.value,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operation {
    Merge,
    FlipMerge,
}

impl Operation {
    /// `yhat < 0.5` merges; everything else flip-merges.
    pub fn from_score(yhat: f64) -> Self {
        if yhat < 0.5 {
            Operation::Merge
        } else {
            Operation::FlipMerge
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Operation::Merge => "merge",
            Operation::FlipMerge => "flip-merge",
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    /// Maximize `|yhat - 0.5|`.
    #[default]
    Confidence,
    /// Maximize the binary entropy of `yhat`, i.e. pick the least certain
    /// edge. Kept for comparison only.
    Entropy,
}

pub fn confidence(yhat: f64) -> f64 {
    (yhat - 0.5).abs()
}

fn entropy(y: f64) -> f64 {
    let term = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
    term(y) + term(1.0 - y)
}

/// Picks the edge to contract; ties go to the smaller canonical edge.
pub fn select_edge(scores: &BTreeMap<Edge, f64>, rule: SelectionRule) -> Option<(Edge, Operation)> {
    let key = |y: f64| match rule {
        SelectionRule::Confidence => confidence(y),
        SelectionRule::Entropy => entropy(y),
    };
    let mut best: Option<(Edge, f64, f64)> = None;
    for (&e, &y) in scores {
        let k = key(y);
        match best {
            Some((_, _, bk)) if k <= bk + CONFIDENCE_TIE => {}
            _ => best = Some((e, y, k)),
        }
    }
    best.map(|(e, y, _)| (e, Operation::from_score(y)))
}

/// Source of per-edge flip-merge probabilities.
pub trait EdgeScorer {
    fn scores(&mut self, g: &HamiltonianGraph) -> Result<BTreeMap<Edge, f64>>;
}

pub struct GnnScorer<'a>(pub &'a GnnParams);

impl EdgeScorer for GnnScorer<'_> {
    fn scores(&mut self, g: &HamiltonianGraph) -> Result<BTreeMap<Edge, f64>> {
        self.0.predict(g)
    }
}

/// Ground-truth labels of the current graph as certain scores: aligned and
/// neutral edges score 0, anti-aligned edges 1.
pub struct OracleScorer(pub Oracle);

impl EdgeScorer for OracleScorer {
    fn scores(&mut self, g: &HamiltonianGraph) -> Result<BTreeMap<Edge, f64>> {
        Ok(self
            .0
            .label_edges(g)?
            .into_iter()
            .map(|(e, l)| (e, if l == EdgeLabel::C { 1.0 } else { 0.0 }))
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub iteration: usize,
    pub kept: NodeId,
    pub removed: NodeId,
    pub yhat: f64,
    pub confidence: f64,
    pub operation: Operation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompressionResult {
    pub reduced: HamiltonianGraph,
    pub log: ContractionLog,
    pub trace: Vec<TraceStep>,
    /// Set when the graph ran out of edges before the target was met.
    pub exhausted: bool,
}

fn run(
    g: &HamiltonianGraph,
    target: CompressionTarget,
    mut pick: impl FnMut(&HamiltonianGraph) -> Result<(Edge, f64, Operation)>,
) -> Result<CompressionResult> {
    target.validate(g)?;
    let (spins0, edges0) = (g.spin_count(), g.edge_count());
    let mut cur = g.clone();
    let mut log = ContractionLog::new();
    let mut trace = Vec::new();
    let mut exhausted = false;
    while !target.reached(&cur, spins0, edges0) {
        if cur.edge_count() == 0 {
            exhausted = true;
            break;
        }
        let (edge, yhat, op) = pick(&cur)?;
        let rec = cur.contract(edge.lo(), edge.hi(), op == Operation::FlipMerge)?;
        trace.push(TraceStep {
            iteration: trace.len() + 1,
            kept: rec.kept,
            removed: rec.removed,
            yhat,
            confidence: confidence(yhat),
            operation: op,
        });
        log.push(rec);
    }
    Ok(CompressionResult {
        reduced: cur,
        log,
        trace,
        exhausted,
    })
}

/// Compresses `g` with scores from `scorer`.
pub fn compress_with(
    g: &HamiltonianGraph,
    scorer: &mut dyn EdgeScorer,
    target: CompressionTarget,
    rule: SelectionRule,
) -> Result<CompressionResult> {
    run(g, target, |cur| {
        let scores = scorer.scores(cur)?;
        let (edge, op) = select_edge(&scores, rule).expect("graph has edges");
        Ok((edge, scores[&edge], op))
    })
}

/// Compresses `g` with the learned edge classifier.
pub fn compress(g: &HamiltonianGraph, params: &GnnParams, target: CompressionTarget) -> Result<CompressionResult> {
    compress_with(g, &mut GnnScorer(params), target, SelectionRule::Confidence)
}

/// Baseline: uniformly random edge and operation at every step.
pub fn random_compress(g: &HamiltonianGraph, target: CompressionTarget, seed: u64) -> Result<CompressionResult> {
    let mut rng = seed::rng(seed);
    run(g, target, |cur| {
        let edges: Vec<Edge> = cur.edges().map(|(e, _)| e).collect();
        let edge = edges[rng.gen_range(0..edges.len())];
        let yhat = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
        Ok((edge, yhat, Operation::from_score(yhat)))
    })
}

impl CompressionResult {
    pub fn trace_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["iteration", "kept", "removed", "yhat", "confidence", "operation"])?;
        for s in &self.trace {
            w.write_record([
                s.iteration.to_string(),
                s.kept.to_string(),
                s.removed.to_string(),
                s.yhat.to_string(),
                s.confidence.to_string(),
                s.operation.to_string(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Parse(e.to_string()))?).expect("csv is utf-8"))
    }

    /// Writes `reduced.json`, `log.json` and `trace.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        io::write_graph(&dir.join("reduced.json"), &self.reduced)?;
        io::write_log(&dir.join("log.json"), &self.log)?;
        io::write_string(&dir.join("trace.csv"), &self.trace_csv()?)
    }
}
