//! Exhaustive ground-state enumeration and edge labeling.
//!
//! Configurations are visited in Gray-code order so that each step flips a
//! single spin and updates the energy in `O(degree)`. The incremental value
//! only screens candidates; anything near the running minimum is re-scored
//! with the exact canonical-order sum before it is compared.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DenseModel, Edge, HamiltonianGraph, NodeId, SpinAssignment, AUX};

/// Energies within this distance of the minimum are degenerate.
pub const TIE_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_CAP: usize = 24;

/// Slack on the incremental energy before an exact re-score is triggered.
const SCREEN_SLACK: f64 = 1e-7;

/// Below this many spins a single worker scans everything.
const PARALLEL_THRESHOLD: usize = 18;
const SPLIT_BITS: usize = 4;

/// Ground-state relationship of an edge's endpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeLabel {
    /// Equal in every ground state.
    A,
    /// Mixed across ground states.
    B,
    /// Opposite in every ground state.
    C,
}

impl EdgeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeLabel::A => "A",
            EdgeLabel::B => "B",
            EdgeLabel::C => "C",
        }
    }
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EdgeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" => Ok(EdgeLabel::A),
            "B" => Ok(EdgeLabel::B),
            "C" => Ok(EdgeLabel::C),
            other => Err(Error::Parse(format!("unknown edge label {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Oracle {
    pub cap: usize,
}

impl Default for Oracle {
    fn default() -> Self {
        Oracle { cap: DEFAULT_CAP }
    }
}

/// Every minimum-energy configuration of a graph.
#[derive(Clone, Debug)]
pub struct GroundStateSet {
    pub e_min: f64,
    ids: Vec<NodeId>,
    /// Bit `k` set means spin `ids[k]` is `+1`.
    masks: Vec<u64>,
}

impl GroundStateSet {
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn spin_ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn assignments(&self) -> impl Iterator<Item = SpinAssignment> + '_ {
        self.masks.iter().map(|&m| {
            self.ids
                .iter()
                .enumerate()
                .map(|(k, &v)| (v, if m >> k & 1 == 1 { 1 } else { -1 }))
                .collect()
        })
    }

    fn bit(&self, v: NodeId) -> Option<usize> {
        if v == AUX {
            return None;
        }
        Some(
            self.ids
                .binary_search(&v)
                .unwrap_or_else(|_| panic!("spin {v} not in ground-state set")),
        )
    }

    /// Relationship of spins `a` and `b` across all ground states, with the
    /// auxiliary spin read as `+1`.
    pub fn relation(&self, a: NodeId, b: NodeId) -> EdgeLabel {
        let (ba, bb) = (self.bit(a), self.bit(b));
        let spin = |m: u64, bit: Option<usize>| bit.is_none_or(|k| m >> k & 1 == 1);
        let mut equal = false;
        let mut opposite = false;
        for &m in &self.masks {
            if spin(m, ba) == spin(m, bb) {
                equal = true;
            } else {
                opposite = true;
            }
            if equal && opposite {
                return EdgeLabel::B;
            }
        }
        if opposite {
            EdgeLabel::C
        } else {
            EdgeLabel::A
        }
    }
}

struct Scan {
    min: f64,
    states: Vec<(u64, f64)>,
}

impl Oracle {
    pub fn new(cap: usize) -> Self {
        Oracle { cap }
    }

    fn check(&self, g: &HamiltonianGraph) -> Result<DenseModel> {
        let n = g.spin_count();
        if n > self.cap || n > 63 {
            return Err(Error::EnumerationCap {
                spins: n,
                cap: self.cap.min(63),
            });
        }
        Ok(DenseModel::new(g))
    }

    pub fn enumerate_ground_states(&self, g: &HamiltonianGraph) -> Result<GroundStateSet> {
        let model = self.check(g)?;
        let scan = scan_all(&model, true);
        let mut masks: Vec<u64> = scan.states.into_iter().map(|(m, _)| m).collect();
        masks.sort_unstable();
        Ok(GroundStateSet {
            e_min: scan.min,
            ids: model.ids,
            masks,
        })
    }

    pub fn min_energy(&self, g: &HamiltonianGraph) -> Result<f64> {
        let model = self.check(g)?;
        Ok(scan_all(&model, false).min)
    }

    /// One label per edge of `g`, in canonical edge order.
    pub fn label_edges(&self, g: &HamiltonianGraph) -> Result<BTreeMap<Edge, EdgeLabel>> {
        let gs = self.enumerate_ground_states(g)?;
        Ok(g.edges().map(|(e, _)| (e, gs.relation(e.lo(), e.hi()))).collect())
    }
}

fn mask_spins(mask: u64, n: usize) -> Vec<i8> {
    (0..n).map(|k| if mask >> k & 1 == 1 { 1 } else { -1 }).collect()
}

fn scan_all(model: &DenseModel, collect: bool) -> Scan {
    let n = model.len();
    if n < PARALLEL_THRESHOLD {
        return scan_block(model, n, 0, collect);
    }
    let low = n - SPLIT_BITS;
    let parts: Vec<Scan> = (0..1u64 << SPLIT_BITS)
        .into_par_iter()
        .map(|high| scan_block(model, low, high << low, collect))
        .collect();
    let min = parts.iter().map(|p| p.min).fold(f64::INFINITY, f64::min);
    let states = parts
        .into_iter()
        .flat_map(|p| p.states)
        .filter(|&(_, e)| e <= min + TIE_TOLERANCE)
        .collect();
    Scan { min, states }
}

/// Gray-code scan over the low `bits` spins with the remaining spins fixed
/// by `base`.
fn scan_block(model: &DenseModel, bits: usize, base: u64, collect: bool) -> Scan {
    let n = model.len();
    let mut s = mask_spins(base, n);
    let mut mask = base;
    let mut e = model.energy(&s);
    let mut min = e;
    let mut states = vec![(mask, e)];
    for step in 1..(1u64 << bits) {
        let k = step.trailing_zeros() as usize;
        e += model.flip_delta(&s, k);
        s[k] = -s[k];
        mask ^= 1 << k;
        if e <= min + SCREEN_SLACK {
            let exact = model.energy(&s);
            e = exact;
            if exact < min - TIE_TOLERANCE {
                min = exact;
                states.retain(|&(_, x)| x <= min + TIE_TOLERANCE);
                states.push((mask, exact));
            } else if exact <= min + TIE_TOLERANCE {
                min = min.min(exact);
                if collect {
                    states.push((mask, exact));
                }
            }
        }
    }
    states.retain(|&(_, x)| x <= min + TIE_TOLERANCE);
    if !collect {
        states.clear();
    }
    Scan { min, states }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, j: &[(NodeId, NodeId, f64)]) -> HamiltonianGraph {
        HamiltonianGraph::build(&vec![0.0; n], j).unwrap()
    }

    /// Independent brute force straight from the energy definition.
    fn brute(g: &HamiltonianGraph) -> (f64, Vec<SpinAssignment>) {
        let ids: Vec<NodeId> = g.spins().collect();
        let all: Vec<(SpinAssignment, f64)> = (0..1u32 << ids.len())
            .map(|m| {
                let s: SpinAssignment = ids
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| (v, if m >> k & 1 == 1 { 1 } else { -1 }))
                    .collect();
                let e = g.energy(&s).unwrap();
                (s, e)
            })
            .collect();
        let min = all.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        let states = all
            .into_iter()
            .filter(|x| x.1 <= min + TIE_TOLERANCE)
            .map(|x| x.0)
            .collect();
        (min, states)
    }

    #[test]
    fn ferromagnetic_pair() {
        let g = graph(2, &[(1, 2, 1.0)]);
        let gs = Oracle::default().enumerate_ground_states(&g).unwrap();
        assert_eq!(gs.e_min, -1.0);
        let states: Vec<Vec<(NodeId, i8)>> = gs.assignments().map(|s| s.iter().collect()).collect();
        assert_eq!(states, vec![vec![(1, -1), (2, -1)], vec![(1, 1), (2, 1)]]);
        let labels = Oracle::default().label_edges(&g).unwrap();
        assert_eq!(labels[&Edge::new(1, 2)], EdgeLabel::A);
    }

    #[test]
    fn antiferromagnetic_pair_is_c() {
        let g = graph(2, &[(1, 2, -1.0)]);
        let labels = Oracle::default().label_edges(&g).unwrap();
        assert_eq!(labels[&Edge::new(1, 2)], EdgeLabel::C);
    }

    #[test]
    fn frustrated_triangle() {
        let g = graph(3, &[(1, 2, -1.0), (2, 3, -1.0), (1, 3, -1.0)]);
        let gs = Oracle::default().enumerate_ground_states(&g).unwrap();
        assert_eq!(gs.e_min, -1.0);
        assert_eq!(gs.len(), 6);
        let labels = Oracle::default().label_edges(&g).unwrap();
        assert!(labels.values().all(|&l| l == EdgeLabel::B));
    }

    #[test]
    fn single_biased_spin() {
        let g = HamiltonianGraph::build(&[5.0], &[]).unwrap();
        let gs = Oracle::default().enumerate_ground_states(&g).unwrap();
        assert_eq!(gs.e_min, -5.0);
        assert_eq!(gs.len(), 1);
        assert_eq!(gs.assignments().next().unwrap().get(1), 1);
        let labels = Oracle::default().label_edges(&g).unwrap();
        assert_eq!(labels[&Edge::new(0, 1)], EdgeLabel::A);
    }

    #[test]
    fn offset_only_graph() {
        let g = HamiltonianGraph::build(&[7.0], &[]).unwrap();
        let (r, _) = g.merge(AUX, 1).unwrap();
        assert_eq!(r.node_count(), 0);
        assert_eq!(Oracle::default().min_energy(&r).unwrap(), -7.0);
    }

    #[test]
    fn cap_is_enforced() {
        let g = graph(5, &[(1, 2, 1.0)]);
        let err = Oracle::new(4).min_energy(&g).unwrap_err();
        assert!(matches!(err, Error::EnumerationCap { spins: 5, cap: 4 }));
        assert!(err.to_string().contains("simulated annealing"));
    }

    #[test]
    fn matches_brute_force_on_random_graphs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..60 {
            let n = rng.gen_range(1..=8usize);
            let h: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.gen_bool(0.3) {
                        rng.gen_range(-3.0..3.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            let mut j = Vec::new();
            for a in 1..=n as NodeId {
                for b in a + 1..=n as NodeId {
                    if rng.gen_bool(0.5) {
                        // small integers produce plenty of degeneracy
                        j.push((a, b, f64::from(rng.gen_range(-2..=2i32))));
                    }
                }
            }
            j.retain(|x| x.2 != 0.0);
            let g = HamiltonianGraph::build(&h, &j).unwrap();
            let (min, states) = brute(&g);
            let gs = Oracle::default().enumerate_ground_states(&g).unwrap();
            assert!((gs.e_min - min).abs() <= 1e-12);
            assert_eq!(Oracle::default().min_energy(&g).unwrap(), gs.e_min);
            let mut got: Vec<SpinAssignment> = gs.assignments().collect();
            let mut want = states;
            let key = |s: &SpinAssignment| s.iter().collect::<Vec<_>>();
            got.sort_by_key(key);
            want.sort_by_key(key);
            assert_eq!(got, want);
        }
    }

    #[test]
    fn parallel_split_agrees_with_sequential() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = PARALLEL_THRESHOLD;
        let mut j = Vec::new();
        for a in 1..=n as NodeId {
            for b in a + 1..=n as NodeId {
                if rng.gen_bool(0.3) {
                    j.push((
                        a,
                        b,
                        f64::from(rng.gen_range(1..=3i32)) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                    ));
                }
            }
        }
        let g = graph(n, &j);
        let model = DenseModel::new(&g);
        let seq = scan_block(&model, n, 0, true);
        let gs = Oracle::default().enumerate_ground_states(&g).unwrap();
        assert_eq!(seq.min, gs.e_min);
        let mut masks: Vec<u64> = seq.states.iter().map(|x| x.0).collect();
        masks.sort_unstable();
        assert_eq!(masks, gs.masks);
    }

    #[test]
    fn zero_field_ground_states_closed_under_flip() {
        let g = graph(4, &[(1, 2, 1.0), (2, 3, -2.0), (3, 4, 1.0), (1, 4, 1.0)]);
        let gs = Oracle::default().enumerate_ground_states(&g).unwrap();
        let full = (1u64 << 4) - 1;
        for &m in &gs.masks {
            assert!(gs.masks.contains(&(m ^ full)));
        }
    }
}
