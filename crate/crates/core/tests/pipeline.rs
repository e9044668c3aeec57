use isingcomp::compressor::{self, CompressionTarget, OracleScorer, SelectionRule};
use isingcomp::datagen::{gen_instance, DegreeParam, WeightRange};
use isingcomp::solvers::{sa_solve, SaConfig};
use isingcomp::{seed, HamiltonianGraph, NodeId, Oracle, SpinAssignment};
use rand::Rng;

/// Problem in plain form, kept next to the graph so energies can be
/// recomputed without the library.
struct Problem {
    n: u32,
    h: Vec<f64>,
    couplings: Vec<(NodeId, NodeId, f64)>,
}

impl Problem {
    fn random(k: u64) -> Self {
        let mut rng = seed::rng(seed::derive(0x1F7, k));
        let n = rng.gen_range(3..=11u32);
        let param = match k % 3 {
            0 => DegreeParam::Er {
                p: rng.gen_range(0.2..1.0),
            },
            1 => DegreeParam::Ba { m: 1 },
            _ => DegreeParam::Ws { k: 2, beta: 0.1 },
        };
        let g = gen_instance(param, n, rng.gen(), WeightRange::default()).unwrap();
        let h = (0..n)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    0.0
                } else {
                    rng.gen_range(-3.0..3.0)
                }
            })
            .collect();
        let couplings = g.edges().map(|(e, w)| (e.lo(), e.hi(), w)).collect();
        Problem { n, h, couplings }
    }

    fn graph(&self) -> HamiltonianGraph {
        HamiltonianGraph::build(&self.h, &self.couplings).unwrap()
    }

    fn energy(&self, s: &[i8]) -> f64 {
        let pair: f64 = self
            .couplings
            .iter()
            .map(|&(i, j, w)| w * f64::from(s[i as usize - 1] * s[j as usize - 1]))
            .sum();
        let field: f64 = self.h.iter().zip(s).map(|(h, &x)| h * f64::from(x)).sum();
        -pair - field
    }

    fn brute_min(&self) -> f64 {
        (0..1u32 << self.n)
            .map(|bits| self.energy(&spins_of(bits, self.n)))
            .fold(f64::INFINITY, f64::min)
    }
}

fn spins_of(bits: u32, n: u32) -> Vec<i8> {
    (0..n).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect()
}

fn dense(s: &SpinAssignment, n: u32) -> Vec<i8> {
    (1..=n).map(|v| s.get(v)).collect()
}

#[test]
fn lifted_assignments_keep_their_energy() {
    let mut rng = seed::rng(7);
    let mut checked = 0;
    for k in 0..60 {
        let p = Problem::random(k);
        let g = p.graph();
        let Ok(res) = compressor::random_compress(&g, CompressionTarget::node_ratio(0.5), k) else {
            continue;
        };
        for _ in 0..100 {
            let reduced: SpinAssignment = res
                .reduced
                .spins()
                .map(|v| (v, if rng.gen_bool(0.5) { 1 } else { -1 }))
                .collect();
            let lifted = res.log.lift(&reduced).unwrap();
            let e_reduced = res.reduced.energy(&reduced).unwrap();
            let e_original = p.energy(&dense(&lifted, p.n));
            assert!(
                (e_reduced - e_original).abs() < 1e-9,
                "instance {k}: {e_reduced} vs {e_original}"
            );
            checked += 1;
        }
    }
    assert!(checked >= 5000, "{checked}");
}

#[test]
fn graph_energy_matches_plain_formula() {
    for k in 0..40 {
        let p = Problem::random(k);
        let g = p.graph();
        for bits in 0..(1u32 << p.n).min(64) {
            let s = spins_of(bits, p.n);
            let assignment: SpinAssignment = (1..=p.n).zip(s.iter().copied()).collect();
            assert!((g.energy(&assignment).unwrap() - p.energy(&s)).abs() < 1e-9);
        }
    }
}

#[test]
fn oracle_guided_compression_keeps_ground_energy() {
    for k in 0..80 {
        let p = Problem::random(k);
        let g = p.graph();
        let e_min = p.brute_min();
        let res = match compressor::compress_with(
            &g,
            &mut OracleScorer(Oracle::default()),
            CompressionTarget::node_ratio(0.5),
            SelectionRule::Confidence,
        ) {
            Ok(r) => r,
            Err(_) => continue,
        };
        let reduced_min = Oracle::default().min_energy(&res.reduced).unwrap();
        assert!(
            (reduced_min - e_min).abs() < 1e-9,
            "instance {k}: {reduced_min} vs {e_min}"
        );
    }
}

#[test]
fn annealer_finds_ground_energy_on_nearly_all_instances() {
    let total = 200;
    let hits = (0..total)
        .filter(|&k| {
            let p = Problem::random(1000 + k);
            let (s, e) = sa_solve(
                &p.graph(),
                &SaConfig {
                    seed: k,
                    ..SaConfig::default()
                },
            )
            .unwrap();
            assert!((e - p.energy(&dense(&s, p.n))).abs() < 1e-9);
            (e - p.brute_min()).abs() < 1e-9
        })
        .count();
    assert!(hits * 100 >= total as usize * 99, "{hits}/{total}");
}
