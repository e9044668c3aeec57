//! Classical solvers standing in for annealing hardware, and the
//! solution-quality metrics.

pub mod eval;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DenseModel, HamiltonianGraph, SpinAssignment};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaConfig {
    pub sweeps: usize,
    pub restarts: usize,
    /// Starting temperature; `None` uses twice the largest |weight|.
    pub t_hot: Option<f64>,
    pub t_cold: f64,
    pub seed: u64,
}

impl Default for SaConfig {
    fn default() -> Self {
        SaConfig {
            sweeps: 2000,
            restarts: 20,
            t_hot: None,
            t_cold: 0.01,
            seed: 0,
        }
    }
}

impl SaConfig {
    fn schedule(&self, g: &HamiltonianGraph) -> Result<(f64, f64)> {
        if self.sweeps == 0 || self.restarts == 0 {
            return Err(Error::InvalidParameter("sweeps and restarts must be at least 1".into()));
        }
        let hot = self
            .t_hot
            .unwrap_or_else(|| (2.0 * g.max_abs_weight()).max(2.0 * self.t_cold));
        if !(self.t_cold > 0.0 && hot > self.t_cold && hot.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "temperatures must satisfy T_hot > T_cold > 0 (got {hot}, {})",
                self.t_cold
            )));
        }
        Ok((hot, self.t_cold))
    }
}

/// One annealing run.
#[derive(Clone, Debug)]
pub struct SaRun {
    pub energy: f64,
    pub spins: Vec<i8>,
    /// Best energy seen after each sweep.
    pub best_trace: Vec<f64>,
}

fn anneal(model: &DenseModel, sweeps: usize, hot: f64, cold: f64, seed: u64) -> SaRun {
    let n = model.len();
    let mut rng = seed::rng(seed);
    let mut s: Vec<i8> = (0..n).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
    let mut e = model.energy(&s);
    let mut best = (e, s.clone());
    let mut best_trace = Vec::with_capacity(sweeps);
    let ratio = cold / hot;
    for sweep in 0..sweeps {
        let frac = if sweeps > 1 {
            sweep as f64 / (sweeps - 1) as f64
        } else {
            1.0
        };
        let t = hot * ratio.powf(frac);
        for k in 0..n {
            let delta = model.flip_delta(&s, k);
            if delta <= 0.0 || rng.gen::<f64>() < (-delta / t).exp() {
                s[k] = -s[k];
                e += delta;
                if e < best.0 {
                    best = (e, s.clone());
                }
            }
        }
        best_trace.push(best.0);
    }
    let (_, spins) = best;
    SaRun {
        energy: model.energy(&spins),
        spins,
        best_trace,
    }
}

/// Runs every restart and returns them in restart order.
pub fn sa_runs(g: &HamiltonianGraph, cfg: &SaConfig) -> Result<Vec<SaRun>> {
    let model = DenseModel::new(g);
    if model.is_empty() {
        return Ok(vec![SaRun {
            energy: g.offset(),
            spins: Vec::new(),
            best_trace: Vec::new(),
        }]);
    }
    let (hot, cold) = cfg.schedule(g)?;
    Ok((0..cfg.restarts)
        .into_par_iter()
        .map(|r| anneal(&model, cfg.sweeps, hot, cold, seed::derive(cfg.seed, r as u64)))
        .collect())
}

/// Single-spin-flip Metropolis annealing with a geometric schedule; the
/// best configuration over all restarts.
pub fn sa_solve(g: &HamiltonianGraph, cfg: &SaConfig) -> Result<(SpinAssignment, f64)> {
    let model = DenseModel::new(g);
    let runs = sa_runs(g, cfg)?;
    let mut best = &runs[0];
    for run in &runs[1..] {
        if run.energy < best.energy {
            best = run;
        }
    }
    Ok((model.to_assignment(&best.spins), best.energy))
}

/// Solution quality in percent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Optimality {
    Percent(f64),
    /// The reference minimum is zero, so the ratio is undefined.
    DegenerateReference,
}

impl Optimality {
    pub fn percent(self) -> Option<f64> {
        match self {
            Optimality::Percent(p) => Some(p),
            Optimality::DegenerateReference => None,
        }
    }
}

/// `100 * (1 - |e_best - e_min| / |e_min|)`.
pub fn optimality(e_best: f64, e_min: f64) -> Optimality {
    if e_min == 0.0 {
        return Optimality::DegenerateReference;
    }
    if e_best == e_min {
        return Optimality::Percent(100.0);
    }
    Optimality::Percent(100.0 * (1.0 - (e_best - e_min).abs() / e_min.abs()))
}

/// `100 * (1 - compressed / original)` over logical spin counts.
pub fn reduction(q_compressed: usize, q_original: usize) -> f64 {
    assert!(q_original >= 1, "reduction of an empty model");
    100.0 * (1.0 - q_compressed as f64 / q_original as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_instance, DegreeParam, WeightRange};
    use crate::oracle::Oracle;

    #[test]
    fn metric_examples() {
        assert_eq!(optimality(-95.0, -100.0), Optimality::Percent(95.0));
        assert_eq!(optimality(-7.0, -7.0), Optimality::Percent(100.0));
        let Optimality::Percent(p) = optimality(1.0, -10.0) else {
            panic!()
        };
        assert!((p + 10.0).abs() < 1e-12);
        assert_eq!(optimality(-1.0, 0.0), Optimality::DegenerateReference);
        assert_eq!(reduction(50, 200), 75.0);
        assert_eq!(reduction(7, 7), 0.0);
        assert_eq!(reduction(100, 400), 75.0);
    }

    #[test]
    fn two_spin_ferromagnet() {
        let g = HamiltonianGraph::build(&[0.0; 2], &[(1, 2, 1.0)]).unwrap();
        let (s, e) = sa_solve(
            &g,
            &SaConfig {
                sweeps: 50,
                restarts: 2,
                ..SaConfig::default()
            },
        )
        .unwrap();
        assert_eq!(e, -1.0);
        assert_eq!(s.get(1), s.get(2));
        assert_eq!(g.energy(&s).unwrap(), e);
    }

    #[test]
    fn empty_graph_returns_offset() {
        let g = HamiltonianGraph::build(&[3.5], &[]).unwrap();
        let (r, _) = g.merge(crate::graph::AUX, 1).unwrap();
        let (s, e) = sa_solve(&r, &SaConfig::default()).unwrap();
        assert!(s.is_empty());
        assert_eq!(e, -3.5);
    }

    #[test]
    fn aux_spin_stays_pinned() {
        let g = HamiltonianGraph::build(&[4.0, -4.0], &[(1, 2, 0.5)]).unwrap();
        let (s, e) = sa_solve(
            &g,
            &SaConfig {
                sweeps: 200,
                restarts: 3,
                ..SaConfig::default()
            },
        )
        .unwrap();
        assert_eq!((s.get(1), s.get(2)), (1, -1));
        assert_eq!(e, Oracle::default().min_energy(&g).unwrap());
    }

    #[test]
    fn best_trace_is_non_increasing() {
        let g = gen_instance(DegreeParam::Er { p: 0.5 }, 12, 4, WeightRange::default()).unwrap();
        for run in sa_runs(
            &g,
            &SaConfig {
                sweeps: 300,
                restarts: 4,
                ..SaConfig::default()
            },
        )
        .unwrap()
        {
            assert!(run.best_trace.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let g = gen_instance(DegreeParam::Ws { k: 4, beta: 0.2 }, 12, 8, WeightRange::default()).unwrap();
        let cfg = SaConfig {
            sweeps: 100,
            restarts: 5,
            seed: 3,
            ..SaConfig::default()
        };
        assert_eq!(sa_solve(&g, &cfg).unwrap(), sa_solve(&g, &cfg).unwrap());
    }

    #[test]
    fn bad_schedule_is_rejected() {
        let g = HamiltonianGraph::build(&[0.0; 2], &[(1, 2, 1.0)]).unwrap();
        assert!(sa_solve(
            &g,
            &SaConfig {
                t_hot: Some(0.001),
                ..SaConfig::default()
            }
        )
        .is_err());
        assert!(sa_solve(
            &g,
            &SaConfig {
                sweeps: 0,
                ..SaConfig::default()
            }
        )
        .is_err());
    }
}
