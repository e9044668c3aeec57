//! Evaluation harness: compress, solve the reduced model, lift back and
//! score against the exact ground-state energy.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{optimality, reduction, sa_solve, Optimality, SaConfig};
use crate::compressor::{self, CompressionTarget, OracleScorer, SelectionRule};
use crate::datagen::Topology;
use crate::error::{Error, Result};
use crate::gnn::GnnParams;
use crate::graph::HamiltonianGraph;
use crate::oracle::Oracle;
use crate::seed;

/// Compression strategy under evaluation.
#[derive(Clone, Copy, Debug)]
pub enum Method<'a> {
    Gnn {
        name: &'a str,
        params: &'a GnnParams,
    },
    Random {
        seed: u64,
    },
    /// Ground-truth labels recomputed on every intermediate graph.
    OracleGuided,
}

impl Method<'_> {
    pub fn name(&self) -> String {
        match self {
            Method::Gnn { name, .. } => (*name).to_string(),
            Method::Random { .. } => "random".to_string(),
            Method::OracleGuided => "oracle".to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SolverKind {
    Exact,
    Sa(SaConfig),
}

impl SolverKind {
    fn solve(&self, g: &HamiltonianGraph, oracle: &Oracle) -> Result<(crate::SpinAssignment, f64)> {
        match self {
            SolverKind::Exact => {
                let gs = oracle.enumerate_ground_states(g)?;
                let s = gs.assignments().next().expect("ground-state set is never empty");
                Ok((s, gs.e_min))
            }
            SolverKind::Sa(cfg) => sa_solve(g, cfg),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvalInstance {
    pub id: String,
    pub topology: Topology,
    pub n: u32,
    pub graph: HamiltonianGraph,
}

/// One (instance, target, method) evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub id: String,
    pub topology: Topology,
    pub n: u32,
    pub target: CompressionTarget,
    pub method: String,
    /// Exact reference; `None` when the instance is too large to enumerate.
    pub e_min: Option<f64>,
    /// Original-space energy of the lifted solution.
    pub e_best: f64,
    /// Energy of the solution on the reduced model (offset included).
    pub e_reduced: f64,
    pub optimality: Option<Optimality>,
    pub reduction: f64,
    pub exhausted: bool,
    pub runtime_ms: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub solver: SolverKind,
    pub oracle: Oracle,
    /// Record wall-clock time per row. Off by default so that output files
    /// are reproducible byte for byte.
    pub timing: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            solver: SolverKind::Exact,
            oracle: Oracle::default(),
            timing: false,
        }
    }
}

fn eval_one(
    inst: &EvalInstance,
    index: usize,
    target: CompressionTarget,
    method: &Method<'_>,
    e_min: Option<f64>,
    opts: &EvalOptions,
) -> Result<EvalRow> {
    let start = Instant::now();
    let result = match method {
        Method::Gnn { params, .. } => compressor::compress(&inst.graph, params, target)?,
        Method::Random { seed } => compressor::random_compress(&inst.graph, target, seed::derive(*seed, index as u64))?,
        Method::OracleGuided => compressor::compress_with(
            &inst.graph,
            &mut OracleScorer(opts.oracle),
            target,
            SelectionRule::Confidence,
        )?,
    };
    let (reduced_solution, e_reduced) = opts.solver.solve(&result.reduced, &opts.oracle)?;
    let lifted = result.log.lift_checked(&result.reduced, &reduced_solution)?;
    let e_best = inst.graph.energy(&lifted)?;
    let runtime_ms = opts.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
    Ok(EvalRow {
        id: inst.id.clone(),
        topology: inst.topology,
        n: inst.n,
        target,
        method: method.name(),
        e_min,
        e_best,
        e_reduced,
        optimality: e_min.map(|m| optimality(e_best, m)),
        reduction: reduction(result.reduced.spin_count(), inst.graph.spin_count().max(1)),
        exhausted: result.exhausted,
        runtime_ms,
    })
}

/// Evaluates every instance under every target and method. Rows come back
/// in (instance, target, method) order regardless of worker count.
pub fn evaluate(
    instances: &[EvalInstance],
    methods: &[Method<'_>],
    targets: &[CompressionTarget],
    opts: &EvalOptions,
) -> Result<Vec<EvalRow>> {
    let per_instance: Vec<Vec<EvalRow>> = instances
        .par_iter()
        .enumerate()
        .map(|(index, inst)| {
            let e_min = match opts.oracle.min_energy(&inst.graph) {
                Ok(e) => Some(e),
                Err(Error::EnumerationCap { .. }) => None,
                Err(e) => return Err(e.for_instance(&inst.id)),
            };
            let mut rows = Vec::with_capacity(targets.len() * methods.len());
            for &target in targets {
                for method in methods {
                    rows.push(
                        eval_one(inst, index, target, method, e_min, opts).map_err(|e| e.for_instance(&inst.id))?,
                    );
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_instance.into_iter().flatten().collect())
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub topology: Topology,
    pub n: u32,
    pub target: CompressionTarget,
    pub method: String,
    pub count: usize,
    /// Rows whose optimality is a number (reference available, nonzero).
    pub scored: usize,
    pub optimality_mean: f64,
    pub optimality_se: f64,
    pub reduction_mean: f64,
    pub e_min_mean: f64,
    pub e_best_mean: f64,
    pub runtime_ms_mean: Option<f64>,
}

/// Groups rows by (topology, n, target, method), keeping first-seen order.
pub fn aggregate(rows: &[EvalRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(Topology, u32, CompressionTarget, String)> = Vec::new();
    let mut groups: Vec<Vec<&EvalRow>> = Vec::new();
    for r in rows {
        let key = (r.topology, r.n, r.target, r.method.clone());
        match keys.iter().position(|k| *k == key) {
            Some(i) => groups[i].push(r),
            None => {
                keys.push(key);
                groups.push(vec![r]);
            }
        }
    }
    keys.into_iter()
        .zip(groups)
        .map(|((topology, n, target, method), rs)| {
            let opt: Vec<f64> = rs
                .iter()
                .filter_map(|r| r.optimality.and_then(Optimality::percent))
                .collect();
            let (optimality_mean, optimality_se) = mean_se(&opt);
            let mean = |f: &dyn Fn(&EvalRow) -> Option<f64>| {
                let xs: Vec<f64> = rs.iter().filter_map(|r| f(r)).collect();
                mean_se(&xs).0
            };
            let runtime_ms_mean = rs
                .iter()
                .all(|r| r.runtime_ms.is_some())
                .then(|| mean(&|r| r.runtime_ms));
            AggregateRow {
                topology,
                n,
                target,
                method,
                count: rs.len(),
                scored: opt.len(),
                optimality_mean,
                optimality_se,
                reduction_mean: mean(&|r| Some(r.reduction)),
                e_min_mean: mean(&|r| r.e_min),
                e_best_mean: mean(&|r| Some(r.e_best)),
                runtime_ms_mean,
            }
        })
        .collect()
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Parse(e.to_string()))?).expect("csv is utf-8"))
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        x.to_string()
    }
}

pub const RESULTS_HEADER: [&str; 11] = [
    "topology",
    "n",
    "target_mode",
    "target_value",
    "method",
    "optimality_mean",
    "optimality_se",
    "reduction_mean",
    "e_min",
    "e_best",
    "runtime_ms",
];

/// Aggregated results table.
pub fn results_csv(rows: &[AggregateRow]) -> Result<String> {
    csv_string(
        &RESULTS_HEADER,
        rows.iter().map(|r| {
            vec![
                r.topology.to_string(),
                r.n.to_string(),
                r.target.mode.as_str().to_string(),
                r.target.value.to_string(),
                r.method.clone(),
                num(r.optimality_mean),
                num(r.optimality_se),
                num(r.reduction_mean),
                num(r.e_min_mean),
                num(r.e_best_mean),
                r.runtime_ms_mean.map(num).unwrap_or_default(),
            ]
        }),
    )
}

/// Per-instance rows.
pub fn rows_csv(rows: &[EvalRow]) -> Result<String> {
    csv_string(
        &[
            "id",
            "topology",
            "n",
            "target_mode",
            "target_value",
            "method",
            "e_min",
            "e_best",
            "optimality",
            "reduction",
            "exhausted",
            "runtime_ms",
        ],
        rows.iter().map(|r| {
            vec![
                r.id.clone(),
                r.topology.to_string(),
                r.n.to_string(),
                r.target.mode.as_str().to_string(),
                r.target.value.to_string(),
                r.method.clone(),
                r.e_min.map(num).unwrap_or_else(|| "NaN".into()),
                num(r.e_best),
                match r.optimality {
                    Some(Optimality::Percent(p)) => num(p),
                    Some(Optimality::DegenerateReference) => "degenerate".into(),
                    None => "NaN".into(),
                },
                num(r.reduction),
                r.exhausted.to_string(),
                r.runtime_ms.map(num).unwrap_or_default(),
            ]
        }),
    )
}

/// Optimality of several models side by side, one row per
/// (model, topology, n, target).
pub fn comparison_csv(models: &[(String, usize)], rows: &[AggregateRow]) -> Result<String> {
    csv_string(
        &[
            "method",
            "layers",
            "topology",
            "n",
            "target_value",
            "optimality_mean",
            "optimality_se",
        ],
        rows.iter().filter_map(|r| {
            let (_, layers) = models.iter().find(|(name, _)| *name == r.method)?;
            Some(vec![
                r.method.clone(),
                layers.to_string(),
                r.topology.to_string(),
                r.n.to_string(),
                r.target.value.to_string(),
                num(r.optimality_mean),
                num(r.optimality_se),
            ])
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_instance, DegreeParam, WeightRange};
    use crate::gnn::Architecture;

    fn instances(k: u64) -> Vec<EvalInstance> {
        (0..k)
            .map(|s| EvalInstance {
                id: format!("er-{s}"),
                topology: Topology::Er,
                n: 9,
                graph: gen_instance(DegreeParam::Er { p: 0.5 }, 9, s, WeightRange::default()).unwrap(),
            })
            .collect()
    }

    #[test]
    fn lifted_energy_matches_reduced_energy() {
        let params = GnnParams::init(Architecture::default(), 1).unwrap();
        let methods = [
            Method::Gnn {
                name: "gnn",
                params: &params,
            },
            Method::Random { seed: 4 },
            Method::OracleGuided,
        ];
        let targets = [CompressionTarget::node_ratio(0.5)];
        let rows = evaluate(&instances(6), &methods, &targets, &EvalOptions::default()).unwrap();
        assert_eq!(rows.len(), 18);
        for r in &rows {
            assert!((r.e_best - r.e_reduced).abs() < 1e-9, "{r:?}");
            assert!(r.e_best >= r.e_min.unwrap() - 1e-9);
            if r.method == "oracle" {
                assert_eq!(r.optimality, Some(Optimality::Percent(100.0)));
            }
        }
    }

    #[test]
    fn unit_target_matches_uncompressed_solve() {
        let targets = [CompressionTarget::node_ratio(1.0)];
        let rows = evaluate(
            &instances(4),
            &[Method::Random { seed: 0 }],
            &targets,
            &EvalOptions::default(),
        )
        .unwrap();
        assert!(rows
            .iter()
            .all(|r| r.optimality == Some(Optimality::Percent(100.0)) && r.reduction == 0.0));
    }

    #[test]
    fn oversized_reference_is_unavailable() {
        let opts = EvalOptions {
            oracle: Oracle::new(6),
            solver: SolverKind::Sa(SaConfig {
                sweeps: 100,
                restarts: 2,
                ..SaConfig::default()
            }),
            timing: false,
        };
        let rows = evaluate(
            &instances(2),
            &[Method::Random { seed: 0 }],
            &[CompressionTarget::node_ratio(0.5)],
            &opts,
        )
        .unwrap();
        assert!(rows.iter().all(|r| r.e_min.is_none() && r.optimality.is_none()));
        let agg = aggregate(&rows);
        assert!(results_csv(&agg).unwrap().contains(",NaN,NaN,"));
    }

    #[test]
    fn aggregation_is_order_independent_within_groups() {
        let rows = evaluate(
            &instances(5),
            &[Method::Random { seed: 1 }],
            &[CompressionTarget::node_ratio(0.5)],
            &EvalOptions::default(),
        )
        .unwrap();
        let mut rev = rows.clone();
        rev.reverse();
        let (a, b) = (aggregate(&rows), aggregate(&rev));
        assert_eq!(a.len(), 1);
        assert!((a[0].optimality_mean - b[0].optimality_mean).abs() < 1e-12);
        assert!((a[0].optimality_se - b[0].optimality_se).abs() < 1e-12);
        assert_eq!(a[0].count, 5);
    }

    #[test]
    fn mean_se_values() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_se(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn results_header() {
        let csv = results_csv(&[]).unwrap();
        assert_eq!(
            csv,
            "topology,n,target_mode,target_value,method,optimality_mean,optimality_se,reduction_mean,e_min,e_best,runtime_ms\n"
        );
    }
}
