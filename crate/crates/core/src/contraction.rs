//! Contraction records and lifting of reduced solutions.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{HamiltonianGraph, NodeId, SpinAssignment, AUX};

/// One applied merge or flip-merge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionRecord {
    pub kept: NodeId,
    pub removed: NodeId,
    pub flipped: bool,
    /// Constant moved into the graph offset by this contraction.
    pub absorbed_offset: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContractionLog {
    pub records: Vec<ContractionRecord>,
}

impl ContractionLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, rec: ContractionRecord) {
        self.records.push(rec);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_absorbed(&self) -> f64 {
        self.records.iter().map(|r| r.absorbed_offset).sum()
    }

    /// Checks the structural invariants: `kept != removed`, node 0 never
    /// removed, and every removed node disappears for good.
    pub fn validate(&self) -> Result<()> {
        let mut removed = BTreeSet::new();
        for r in &self.records {
            let invalid = |reason| Error::InvalidContraction {
                kept: r.kept,
                removed: r.removed,
                reason,
            };
            if r.kept == r.removed {
                return Err(invalid("endpoints are identical"));
            }
            if r.removed == AUX {
                return Err(invalid("the auxiliary node cannot be removed"));
            }
            if removed.contains(&r.kept) {
                return Err(invalid("kept node was removed earlier"));
            }
            if !removed.insert(r.removed) {
                return Err(invalid("node removed twice"));
            }
        }
        Ok(())
    }

    /// Re-applies every record to `original`.
    pub fn replay(&self, original: &HamiltonianGraph) -> Result<HamiltonianGraph> {
        let mut g = original.clone();
        for r in &self.records {
            g.contract(r.kept, r.removed, r.flipped)?;
        }
        Ok(g)
    }

    /// Expands an assignment of the reduced graph to the original spins by
    /// walking the log backwards.
    pub fn lift(&self, reduced: &SpinAssignment) -> Result<SpinAssignment> {
        self.validate()?;
        let mut full = SpinAssignment::new();
        for (v, s) in reduced.iter() {
            if v == AUX {
                continue;
            }
            full.set(v, s);
        }
        for r in self.records.iter().rev() {
            if full.contains(r.removed) {
                return Err(Error::Assignment(format!(
                    "spin {} was contracted away but appears in the reduced assignment",
                    r.removed
                )));
            }
            let kept = full
                .try_get(r.kept)
                .ok_or_else(|| Error::Assignment(format!("kept spin {} has no value", r.kept)))?;
            full.set(r.removed, if r.flipped { -kept } else { kept });
        }
        Ok(full)
    }

    /// Lifts after checking `reduced` against the final graph's node set.
    pub fn lift_checked(&self, reduced_graph: &HamiltonianGraph, reduced: &SpinAssignment) -> Result<SpinAssignment> {
        reduced.check_covers(reduced_graph)?;
        self.lift(reduced)
    }
}
