//! Weighted-graph representation of an Ising Hamiltonian.
//!
//! Couplings `J_ij` are edges between spins `i, j >= 1`. Linear biases `h_i`
//! are edges `(0, i)` to the auxiliary node `0`, whose spin is pinned to `+1`.
//! With that convention the energy is uniformly
//!
//! ```text
//! E(s) = -sum_{(i,j) in E} w(i,j) s_i s_j + offset
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::contraction::ContractionRecord;
use crate::error::{Error, Result};

pub type NodeId = u32;

/// The auxiliary bias node.
pub const AUX: NodeId = 0;

/// Unordered node pair stored with the smaller id first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge(NodeId, NodeId);

impl Edge {
    /// Canonicalizes `(a, b)`. Panics on `a == b`.
    pub fn new(a: NodeId, b: NodeId) -> Self {
        assert_ne!(a, b, "self-loop edge ({a}, {a})");
        if a < b {
            Edge(a, b)
        } else {
            Edge(b, a)
        }
    }

    pub fn lo(self) -> NodeId {
        self.0
    }

    pub fn hi(self) -> NodeId {
        self.1
    }

    pub fn touches_aux(self) -> bool {
        self.0 == AUX
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianGraph {
    /// Size of the original spin index space (spins are `1..=n`).
    n: u32,
    nodes: BTreeSet<NodeId>,
    adj: BTreeMap<NodeId, BTreeMap<NodeId, f64>>,
    offset: f64,
}

impl HamiltonianGraph {
    /// Graph on spins `1..=n` with no couplings.
    pub fn empty(n: u32) -> Self {
        HamiltonianGraph {
            n,
            nodes: (1..=n).collect(),
            adj: BTreeMap::new(),
            offset: 0.0,
        }
    }

    /// Builds the graph from biases `h` (index `k` is spin `k + 1`) and
    /// couplings given as `(i, j, J_ij)` triples over 1-based spins.
    pub fn build(h: &[f64], couplings: &[(NodeId, NodeId, f64)]) -> Result<Self> {
        let n = u32::try_from(h.len()).map_err(|_| Error::InvalidParameter("too many spins".into()))?;
        let mut g = HamiltonianGraph::empty(n);
        for (k, &hk) in h.iter().enumerate() {
            if !hk.is_finite() {
                return Err(Error::NonFiniteWeight {
                    entry: format!("h[{}]", k + 1),
                    value: hk,
                });
            }
        }
        let mut seen = BTreeSet::new();
        for &(i, j, w) in couplings {
            if i == j {
                return Err(Error::InvalidCoupling {
                    i,
                    j,
                    reason: "diagonal entry",
                });
            }
            if i == AUX || j == AUX || i > n || j > n {
                return Err(Error::InvalidCoupling {
                    i,
                    j,
                    reason: "spin index out of range",
                });
            }
            if !w.is_finite() {
                return Err(Error::NonFiniteWeight {
                    entry: format!("J[{i},{j}]"),
                    value: w,
                });
            }
            if !seen.insert(Edge::new(i, j)) {
                return Err(Error::InvalidCoupling {
                    i,
                    j,
                    reason: "duplicate entry",
                });
            }
            g.add_weight(i, j, w);
        }
        for (k, &hk) in h.iter().enumerate() {
            g.add_weight(AUX, k as NodeId + 1, hk);
        }
        Ok(g)
    }

    /// Replaces the constant energy term.
    pub fn with_offset(mut self, offset: f64) -> Result<Self> {
        if !offset.is_finite() {
            return Err(Error::NonFiniteWeight {
                entry: "offset".into(),
                value: offset,
            });
        }
        self.offset = offset;
        Ok(self)
    }

    /// Reassembles a graph from its parts, as read from a file.
    pub(crate) fn from_parts(
        n: u32,
        nodes: BTreeSet<NodeId>,
        edges: impl IntoIterator<Item = (Edge, f64)>,
        offset: f64,
    ) -> Result<Self> {
        if !offset.is_finite() {
            return Err(Error::NonFiniteWeight {
                entry: "offset".into(),
                value: offset,
            });
        }
        let mut g = HamiltonianGraph {
            n,
            nodes,
            adj: BTreeMap::new(),
            offset,
        };
        for (e, w) in edges {
            if !w.is_finite() {
                return Err(Error::NonFiniteWeight {
                    entry: format!("edge {e}"),
                    value: w,
                });
            }
            for v in [e.lo(), e.hi()] {
                if v != AUX && !g.nodes.contains(&v) {
                    return Err(Error::InvalidCoupling {
                        i: e.lo(),
                        j: e.hi(),
                        reason: "endpoint not in node set",
                    });
                }
            }
            if g.weight(e.lo(), e.hi()).is_some() {
                return Err(Error::InvalidCoupling {
                    i: e.lo(),
                    j: e.hi(),
                    reason: "duplicate entry",
                });
            }
            g.add_weight(e.lo(), e.hi(), w);
        }
        Ok(g)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn has_aux(&self) -> bool {
        self.nodes.contains(&AUX)
    }

    /// All nodes, including the auxiliary node when present.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied()
    }

    /// Nodes that carry a free spin (everything except node 0).
    pub fn spins(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied().filter(|&v| v != AUX)
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.nodes.contains(&v)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of free spins; this is the size compression targets refer to.
    pub fn spin_count(&self) -> usize {
        self.nodes.len() - usize::from(self.has_aux())
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(BTreeMap::len).sum::<usize>() / 2
    }

    pub fn weight(&self, a: NodeId, b: NodeId) -> Option<f64> {
        self.adj.get(&a).and_then(|m| m.get(&b)).copied()
    }

    /// Edges in canonical order.
    pub fn edges(&self) -> impl Iterator<Item = (Edge, f64)> + '_ {
        self.adj
            .iter()
            .flat_map(|(&a, nbrs)| nbrs.range(a + 1..).map(move |(&b, &w)| (Edge(a, b), w)))
    }

    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.adj
            .get(&v)
            .into_iter()
            .flat_map(|m| m.iter().map(|(&u, &w)| (u, w)))
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj.get(&v).map_or(0, BTreeMap::len)
    }

    /// Linear bias of spin `v` (weight of edge `(0, v)`).
    pub fn bias(&self, v: NodeId) -> f64 {
        self.weight(AUX, v).unwrap_or(0.0)
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.edges().map(|(_, w)| w.abs()).fold(0.0, f64::max)
    }

    /// Adds `delta` to `w(a, b)`; exact-zero sums delete the edge.
    fn add_weight(&mut self, a: NodeId, b: NodeId, delta: f64) {
        if delta == 0.0 {
            return;
        }
        let new = self.weight(a, b).unwrap_or(0.0) + delta;
        if new == 0.0 {
            self.remove_edge(a, b);
        } else {
            if a == AUX || b == AUX {
                self.nodes.insert(AUX);
            }
            self.adj.entry(a).or_default().insert(b, new);
            self.adj.entry(b).or_default().insert(a, new);
        }
    }

    fn remove_edge(&mut self, a: NodeId, b: NodeId) {
        for (x, y) in [(a, b), (b, a)] {
            if let Some(m) = self.adj.get_mut(&x) {
                m.remove(&y);
                if m.is_empty() {
                    self.adj.remove(&x);
                }
            }
        }
    }

    /// Energy of `s`, with the auxiliary spin fixed to `+1`.
    pub fn energy(&self, s: &SpinAssignment) -> Result<f64> {
        s.check_covers(self)?;
        let mut e = 0.0;
        for (edge, w) in self.edges() {
            e -= w * f64::from(s.get(edge.lo())) * f64::from(s.get(edge.hi()));
        }
        Ok(e + self.offset)
    }

    /// `M(kept, removed)`: substitutes `s_removed = s_kept`.
    pub fn merge(&self, kept: NodeId, removed: NodeId) -> Result<(Self, ContractionRecord)> {
        let mut g = self.clone();
        let rec = g.contract(kept, removed, false)?;
        Ok((g, rec))
    }

    /// `FM(kept, removed)`: negates the removed node's incident weights, then
    /// merges, i.e. substitutes `s_removed = -s_kept`.
    pub fn flip_merge(&self, kept: NodeId, removed: NodeId) -> Result<(Self, ContractionRecord)> {
        let mut g = self.clone();
        let rec = g.contract(kept, removed, true)?;
        Ok((g, rec))
    }

    /// In-place contraction of edge `(kept, removed)`.
    pub fn contract(&mut self, kept: NodeId, removed: NodeId, flipped: bool) -> Result<ContractionRecord> {
        let invalid = |reason| Error::InvalidContraction { kept, removed, reason };
        if kept == removed {
            return Err(invalid("endpoints are identical"));
        }
        if removed == AUX {
            return Err(invalid("the auxiliary node cannot be removed"));
        }
        let w = self.weight(kept, removed).ok_or(Error::MissingEdge(kept, removed))?;
        let sign = if flipped { -1.0 } else { 1.0 };
        let moved: Vec<(NodeId, f64)> = self.neighbors(removed).filter(|&(k, _)| k != kept).collect();
        self.remove_edge(kept, removed);
        for &(k, wk) in &moved {
            self.remove_edge(removed, k);
            self.add_weight(kept, k, sign * wk);
        }
        self.nodes.remove(&removed);
        // -w s_kept s_removed evaluates to -sign * w after substitution
        let absorbed = -sign * w;
        self.offset += absorbed;
        if self.has_aux() && self.degree(AUX) == 0 {
            self.nodes.remove(&AUX);
        }
        Ok(ContractionRecord {
            kept,
            removed,
            flipped,
            absorbed_offset: absorbed,
        })
    }
}

/// Spin values keyed by node id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SpinAssignment {
    spins: BTreeMap<NodeId, i8>,
}

impl SpinAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics unless `value` is `+1` or `-1`.
    pub fn set(&mut self, v: NodeId, value: i8) {
        assert!(value == 1 || value == -1, "spin value {value} is not ±1");
        self.spins.insert(v, value);
    }

    /// Spin of `v`; the auxiliary node always reads `+1`. Panics when absent.
    pub fn get(&self, v: NodeId) -> i8 {
        if v == AUX {
            return 1;
        }
        self.spins[&v]
    }

    pub fn try_get(&self, v: NodeId) -> Option<i8> {
        if v == AUX {
            Some(1)
        } else {
            self.spins.get(&v).copied()
        }
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.spins.contains_key(&v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, i8)> + '_ {
        self.spins.iter().map(|(&v, &s)| (v, s))
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    /// Checks that the assignment covers exactly the node set of `g`.
    pub fn check_covers(&self, g: &HamiltonianGraph) -> Result<()> {
        if let Some(&s0) = self.spins.get(&AUX) {
            if s0 != 1 {
                return Err(Error::Assignment("auxiliary spin must be +1".into()));
            }
        }
        if let Some(v) = g.spins().find(|v| !self.spins.contains_key(v)) {
            return Err(Error::Assignment(format!("missing spin {v}")));
        }
        if let Some(&v) = self.spins.keys().find(|&&v| v != AUX && !g.contains(v)) {
            return Err(Error::Assignment(format!("spin {v} is not in the graph")));
        }
        Ok(())
    }
}

impl FromIterator<(NodeId, i8)> for SpinAssignment {
    fn from_iter<T: IntoIterator<Item = (NodeId, i8)>>(iter: T) -> Self {
        let mut s = SpinAssignment::new();
        for (v, x) in iter {
            s.set(v, x);
        }
        s
    }
}

/// Dense index-based view of a graph used by the enumerator and the
/// annealer. Free spins are indexed `0..len` in ascending node-id order.
#[derive(Clone, Debug)]
pub struct DenseModel {
    pub ids: Vec<NodeId>,
    /// Effective linear field per spin, `h_i = w(0, i)`.
    pub field: Vec<f64>,
    /// Neighbor lists of couplings between free spins.
    pub adj: Vec<Vec<(usize, f64)>>,
    /// Couplings between free spins in canonical order.
    pub couplings: Vec<(usize, usize, f64)>,
    pub offset: f64,
}

impl DenseModel {
    pub fn new(g: &HamiltonianGraph) -> Self {
        let ids: Vec<NodeId> = g.spins().collect();
        let index: BTreeMap<NodeId, usize> = ids.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let mut field = vec![0.0; ids.len()];
        let mut adj = vec![Vec::new(); ids.len()];
        let mut couplings = Vec::new();
        for (e, w) in g.edges() {
            if e.touches_aux() {
                field[index[&e.hi()]] = w;
            } else {
                let (a, b) = (index[&e.lo()], index[&e.hi()]);
                adj[a].push((b, w));
                adj[b].push((a, w));
                couplings.push((a, b, w));
            }
        }
        DenseModel {
            ids,
            field,
            adj,
            couplings,
            offset: g.offset(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Exact energy of dense spins, summed in canonical edge order.
    pub fn energy(&self, s: &[i8]) -> f64 {
        // same summation order as HamiltonianGraph::energy: aux edges first
        let mut e = 0.0;
        for (k, &h) in self.field.iter().enumerate() {
            if h != 0.0 {
                e -= h * f64::from(s[k]);
            }
        }
        for &(a, b, w) in &self.couplings {
            e -= w * f64::from(s[a]) * f64::from(s[b]);
        }
        e + self.offset
    }

    /// Energy change from flipping spin `k`.
    pub fn flip_delta(&self, s: &[i8], k: usize) -> f64 {
        let mut local = self.field[k];
        for &(u, w) in &self.adj[k] {
            local += w * f64::from(s[u]);
        }
        2.0 * f64::from(s[k]) * local
    }

    pub fn to_assignment(&self, s: &[i8]) -> SpinAssignment {
        self.ids.iter().copied().zip(s.iter().copied()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spins(pairs: &[(NodeId, i8)]) -> SpinAssignment {
        pairs.iter().copied().collect()
    }

    fn edge_map(g: &HamiltonianGraph) -> Vec<(NodeId, NodeId, f64)> {
        g.edges().map(|(e, w)| (e.lo(), e.hi(), w)).collect()
    }

    #[test]
    fn build_without_biases_has_no_aux() {
        let g = HamiltonianGraph::build(&[0.0, 0.0], &[(1, 2, 1.5)]).unwrap();
        assert_eq!(g.nodes().collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(edge_map(&g), vec![(1, 2, 1.5)]);
        assert_eq!(g.offset(), 0.0);
    }

    #[test]
    fn build_with_bias_adds_aux_edge() {
        let g = HamiltonianGraph::build(&[2.0, 0.0], &[(1, 2, -1.0)]).unwrap();
        assert_eq!(g.nodes().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(edge_map(&g), vec![(0, 1, 2.0), (1, 2, -1.0)]);
    }

    #[test]
    fn build_single_isolated_spin() {
        let g = HamiltonianGraph::build(&[0.0], &[]).unwrap();
        assert_eq!(g.nodes().collect::<Vec<_>>(), vec![1]);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn build_rejects_bad_input() {
        let err = HamiltonianGraph::build(&[0.0, f64::NAN], &[]).unwrap_err();
        assert!(err.to_string().contains("h[2]"), "{err}");
        let err = HamiltonianGraph::build(&[0.0, 0.0], &[(1, 2, f64::INFINITY)]).unwrap_err();
        assert!(err.to_string().contains("J[1,2]"), "{err}");
        assert!(HamiltonianGraph::build(&[0.0, 0.0], &[(1, 1, 1.0)]).is_err());
        assert!(HamiltonianGraph::build(&[0.0, 0.0], &[(1, 3, 1.0)]).is_err());
        assert!(HamiltonianGraph::build(&[0.0, 0.0], &[(1, 2, 1.0), (2, 1, 1.0)]).is_err());
    }

    #[test]
    fn energy_examples() {
        let g = HamiltonianGraph::build(&[0.0, 0.0], &[(1, 2, 1.0)]).unwrap();
        assert_eq!(g.energy(&spins(&[(1, 1), (2, 1)])).unwrap(), -1.0);
        assert_eq!(g.energy(&spins(&[(1, 1), (2, -1)])).unwrap(), 1.0);
        let g = HamiltonianGraph::build(&[2.0], &[]).unwrap();
        assert_eq!(g.energy(&spins(&[(1, 1)])).unwrap(), -2.0);
        assert_eq!(g.energy(&spins(&[(0, 1), (1, 1)])).unwrap(), -2.0);
    }

    #[test]
    fn energy_rejects_incomplete_assignment() {
        let g = HamiltonianGraph::build(&[0.0, 0.0], &[(1, 2, 1.0)]).unwrap();
        assert!(g.energy(&spins(&[(1, 1)])).is_err());
        assert!(g.energy(&spins(&[(1, 1), (2, 1), (3, 1)])).is_err());
        assert!(g.energy(&spins(&[(0, -1), (1, 1), (2, 1)])).is_err());
    }

    #[test]
    fn merge_accumulates_parallel_edges() {
        let g = HamiltonianGraph::build(&[0.0; 3], &[(1, 2, 2.0), (1, 3, 1.0), (2, 3, 3.0)]).unwrap();
        let (r, rec) = g.merge(1, 2).unwrap();
        assert_eq!(edge_map(&r), vec![(1, 3, 4.0)]);
        assert_eq!(r.offset(), -2.0);
        assert!(!rec.flipped);
        assert_eq!(rec.absorbed_offset, -2.0);
    }

    #[test]
    fn merge_deletes_exact_cancellation() {
        let g = HamiltonianGraph::build(&[0.0; 3], &[(1, 2, 5.0), (1, 3, 1.0), (2, 3, -1.0)]).unwrap();
        let (r, _) = g.merge(1, 2).unwrap();
        assert_eq!(r.edge_count(), 0);
        assert_eq!(r.offset(), -5.0);
        assert_eq!(r.nodes().collect::<Vec<_>>(), vec![1, 3]);
    }

    #[test]
    fn merge_into_aux_node() {
        let g = HamiltonianGraph::build(&[2.0, 0.0], &[(1, 2, 4.0)]).unwrap();
        let (r, _) = g.merge(AUX, 1).unwrap();
        assert_eq!(edge_map(&r), vec![(0, 2, 4.0)]);
        assert_eq!(r.offset(), -2.0);
    }

    #[test]
    fn flip_merge_examples() {
        let g = HamiltonianGraph::build(&[0.0; 2], &[(1, 2, -3.0)]).unwrap();
        let (r, rec) = g.flip_merge(1, 2).unwrap();
        assert_eq!(r.edge_count(), 0);
        assert_eq!(r.offset(), -3.0);
        assert!(rec.flipped);
        assert_eq!(rec.absorbed_offset, -3.0);

        let g = HamiltonianGraph::build(&[0.0; 3], &[(1, 2, -1.0), (2, 3, 2.0)]).unwrap();
        let (r, _) = g.flip_merge(1, 2).unwrap();
        assert_eq!(edge_map(&r), vec![(1, 3, -2.0)]);
        assert_eq!(r.offset(), -1.0);

        let g = HamiltonianGraph::build(&[0.0, 1.0], &[(1, 2, -4.0)]).unwrap();
        let (r, _) = g.flip_merge(1, 2).unwrap();
        assert_eq!(edge_map(&r), vec![(0, 1, -1.0)]);
        assert_eq!(r.offset(), -4.0);
    }

    #[test]
    fn contraction_errors() {
        let g = HamiltonianGraph::build(&[1.0, 0.0, 0.0], &[(1, 2, 1.0)]).unwrap();
        assert!(matches!(g.merge(1, 3), Err(Error::MissingEdge(1, 3))));
        assert!(g.merge(1, 1).is_err());
        assert!(g.merge(1, AUX).is_err());
        assert!(g.flip_merge(2, AUX).is_err());
    }

    #[test]
    fn isolated_aux_node_is_pruned() {
        let g = HamiltonianGraph::build(&[2.0, 0.0], &[(1, 2, 1.0)]).unwrap();
        let (r, _) = g.merge(1, 2).unwrap();
        assert!(r.has_aux());
        let (r, _) = r.merge(AUX, 1).unwrap();
        assert!(!r.has_aux());
        assert_eq!(r.node_count(), 0);
        assert_eq!(r.offset(), -3.0);
    }

    #[test]
    fn dense_energy_matches_graph_energy() {
        let g = HamiltonianGraph::build(&[0.5, -1.0, 0.0], &[(1, 2, 1.5), (2, 3, -2.0), (1, 3, 0.25)]).unwrap();
        let d = DenseModel::new(&g);
        for mask in 0..8u32 {
            let s: Vec<i8> = (0..3).map(|k| if mask >> k & 1 == 1 { 1 } else { -1 }).collect();
            let a = d.to_assignment(&s);
            assert_eq!(d.energy(&s), g.energy(&a).unwrap());
            for k in 0..3 {
                let mut t = s.clone();
                t[k] = -t[k];
                let delta = d.energy(&t) - d.energy(&s);
                assert!((d.flip_delta(&s, k) - delta).abs() < 1e-12);
            }
        }
    }
}
