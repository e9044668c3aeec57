use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use isingcomp::compressor::{self, CompressionTarget, SelectionRule};
use isingcomp::datagen::{self, Dataset, DatasetConfig, Split};
use isingcomp::gnn::train::{self as training, AdamConfig, GradCheckReport};
use isingcomp::gnn::{Architecture, Checkpoint, GnnParams, LossConfig, Sample, TrainConfig, Weighting};
use isingcomp::io::{self, LabeledInstance};
use isingcomp::satgen;
use isingcomp::solvers::eval::{self, EvalInstance, EvalOptions, Method, SolverKind};
use isingcomp::solvers::SaConfig;
use isingcomp::{seed, HamiltonianGraph, Oracle};

use crate::{
    BaselineArgs, Command, CompressArgs, EvalArgs, GenArgs, GradCheckArgs, LabelArgs, MethodArg, RuleArg, SatArgs,
    SolveArgs, SolverArg, SolverArgs, SplitArg, TargetArgs, TrainArgs, WeightingArg,
};

pub fn run(cmd: &Command) -> Result<()> {
    let start = Instant::now();
    match cmd {
        Command::Gen(a) => gen(cmd, a)?,
        Command::Label(a) => label(cmd, a)?,
        Command::Train(a) => train(cmd, a)?,
        Command::Compress(a) => compress(cmd, a)?,
        Command::Solve(a) => solve(cmd, a)?,
        Command::Eval(a) => evaluate(cmd, a)?,
        Command::GradCheck(a) => grad_check(cmd, a)?,
        Command::Sat2ising(a) => sat2ising(cmd, a)?,
        Command::Baseline(a) => baseline(cmd, a)?,
    }
    println!("done in {:.2}s", start.elapsed().as_secs_f64());
    Ok(())
}

#[derive(Serialize)]
struct Echo<'a> {
    version: &'static str,
    #[serde(flatten)]
    command: &'a Command,
}

fn echo_json(cmd: &Command) -> String {
    let echo = Echo {
        version: env!("CARGO_PKG_VERSION"),
        command: cmd,
    };
    serde_json::to_string_pretty(&echo).expect("arguments serialize") + "\n"
}

/// Writes the argument echo as `run.json` inside an output directory.
fn echo_dir(cmd: &Command, dir: &Path) -> Result<()> {
    io::write_string(&dir.join("run.json"), &echo_json(cmd))?;
    Ok(())
}

/// Writes the argument echo next to a single output file.
fn echo_file(cmd: &Command, file: &Path) -> Result<()> {
    let mut name = file.file_name().context("output path has no file name")?.to_os_string();
    name.push(".run.json");
    io::write_string(&file.with_file_name(name), &echo_json(cmd))?;
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = io::read_to_string(path)?;
    Checkpoint::parse(&text).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn target(t: &TargetArgs) -> CompressionTarget {
    match (t.target_nodes, t.target_edges, t.nodes) {
        (Some(a), _, _) => CompressionTarget::node_ratio(a),
        (_, Some(a), _) => CompressionTarget::edge_ratio(a),
        (_, _, Some(k)) => CompressionTarget::nodes(k),
        _ => unreachable!("clap requires one target"),
    }
}

fn sa_config(s: &SolverArgs, seed: u64) -> SaConfig {
    SaConfig {
        sweeps: s.sweeps,
        restarts: s.restarts,
        t_hot: s.t_hot,
        t_cold: s.t_cold,
        seed,
    }
}

fn solver_kind(s: &SolverArgs, seed: u64) -> SolverKind {
    match s.solver {
        SolverArg::Exact => SolverKind::Exact,
        SolverArg::Sa => SolverKind::Sa(sa_config(s, seed)),
    }
}

fn gen(cmd: &Command, a: &GenArgs) -> Result<()> {
    let cfg = DatasetConfig {
        topologies: a.topology.clone(),
        sizes: a.sizes.0.clone(),
        degrees: a.degrees.clone(),
        ws_beta: a.ws_beta,
        instances_per_config: a.per_config,
        train_fraction: a.train_fraction,
        master_seed: a.seed,
        oracle_cap: a.oracle_cap,
        ..DatasetConfig::default()
    };
    let manifest = datagen::build_dataset(&cfg, &a.out)?;
    echo_dir(cmd, &a.out)?;
    let c = &manifest.label_counts;
    println!(
        "wrote {} instances to {} (labels A={} B={} C={})",
        manifest.instances.len(),
        a.out.display(),
        c.a,
        c.b,
        c.c
    );
    Ok(())
}

fn label(cmd: &Command, a: &LabelArgs) -> Result<()> {
    let graph = io::read_graph(&a.input)?;
    let oracle = Oracle::new(a.cap);
    let gs = oracle.enumerate_ground_states(&graph)?;
    let labels = oracle.label_edges(&graph)?;
    let inst = LabeledInstance { graph, labels };
    io::write_labeled(&a.out, &inst)?;
    echo_file(cmd, &a.out)?;
    println!(
        "E_min = {}, {} ground states, {} edges labeled",
        gs.e_min,
        gs.len(),
        inst.labels.len()
    );
    Ok(())
}

fn samples<'a>(insts: impl IntoIterator<Item = &'a LabeledInstance>) -> Result<Vec<Sample>> {
    insts.into_iter().map(|i| Sample::new(i).map_err(Into::into)).collect()
}

fn train(cmd: &Command, a: &TrainArgs) -> Result<()> {
    let ds = Dataset::load(&a.dataset)?;
    let train_set = samples(ds.split(Split::Train))?;
    let val_set = samples(ds.split(Split::Val))?;
    let cfg = TrainConfig {
        arch: Architecture {
            layers: a.layers,
            ..Architecture::default()
        },
        loss: LossConfig {
            lambda: a.lambda,
            weighting: match a.weighting {
                WeightingArg::Softmax => Weighting::Softmax {
                    temperature: a.temperature,
                },
                WeightingArg::Power => Weighting::Power { p: a.power },
            },
        },
        adam: AdamConfig {
            lr: a.lr,
            ..AdamConfig::default()
        },
        epochs: a.epochs,
        seed: a.seed,
    };
    let (params, report) = training::train(&train_set, &val_set, &cfg)?;
    let val_acc = training::accuracy(&params, &val_set)?;
    let ckpt = Checkpoint {
        arch: cfg.arch,
        params,
        config: cfg,
        dataset_manifest_hash: ds.manifest_hash.clone(),
        best_epoch: report.best_epoch,
        best_val_loss: report.best_val_loss,
    };
    io::write_string(&a.out.join("checkpoint.json"), &ckpt.to_json())?;
    io::write_string(&a.out.join("curve.csv"), &report.to_csv()?)?;
    echo_dir(cmd, &a.out)?;
    println!(
        "best epoch {} val loss {:.6} val accuracy {:.4} ({} train / {} val graphs)",
        report.best_epoch,
        report.best_val_loss,
        val_acc,
        train_set.len(),
        val_set.len()
    );
    Ok(())
}

fn report_compression(g: &HamiltonianGraph, r: &compressor::CompressionResult) {
    println!(
        "{} -> {} spins, {} -> {} edges{}",
        g.spin_count(),
        r.reduced.spin_count(),
        g.edge_count(),
        r.reduced.edge_count(),
        if r.exhausted { " (ran out of edges)" } else { "" }
    );
}

fn compress(cmd: &Command, a: &CompressArgs) -> Result<()> {
    let ckpt = load_checkpoint(&a.model)?;
    let graph = io::read_graph(&a.input)?;
    let rule = match a.rule {
        RuleArg::Confidence => SelectionRule::Confidence,
        RuleArg::Entropy => SelectionRule::Entropy,
    };
    let result = compressor::compress_with(
        &graph,
        &mut compressor::GnnScorer(&ckpt.params),
        target(&a.target),
        rule,
    )?;
    result.write(&a.out)?;
    echo_dir(cmd, &a.out)?;
    report_compression(&graph, &result);
    Ok(())
}

fn baseline(cmd: &Command, a: &BaselineArgs) -> Result<()> {
    let graph = io::read_graph(&a.input)?;
    let result = compressor::random_compress(&graph, target(&a.target), a.seed)?;
    result.write(&a.out)?;
    echo_dir(cmd, &a.out)?;
    report_compression(&graph, &result);
    Ok(())
}

#[derive(Serialize)]
struct Solution {
    energy: f64,
    spins: Vec<(u32, i8)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lifted: Option<Vec<(u32, i8)>>,
}

fn solve(cmd: &Command, a: &SolveArgs) -> Result<()> {
    let graph = io::read_graph(&a.input)?;
    let oracle = Oracle::new(a.solver.cap);
    let (spins, energy) = match solver_kind(&a.solver, a.seed) {
        SolverKind::Exact => {
            let gs = oracle.enumerate_ground_states(&graph)?;
            let first = gs.assignments().next().expect("ground-state set is never empty");
            (first, gs.e_min)
        }
        SolverKind::Sa(cfg) => isingcomp::solvers::sa_solve(&graph, &cfg)?,
    };
    let lifted = match &a.log {
        Some(path) => {
            let log = io::read_log(path)?;
            Some(log.lift_checked(&graph, &spins)?.iter().collect())
        }
        None => None,
    };
    let sol = Solution {
        energy,
        spins: spins.iter().collect(),
        lifted,
    };
    io::write_string(&a.out.join("solution.json"), &(serde_json::to_string(&sol)? + "\n"))?;
    echo_dir(cmd, &a.out)?;
    println!("energy {energy}");
    Ok(())
}

fn evaluate(cmd: &Command, a: &EvalArgs) -> Result<()> {
    let ds = Dataset::load(&a.dataset)?;
    let instances: Vec<EvalInstance> = ds
        .instances
        .iter()
        .filter(|(m, _)| match a.split {
            SplitArg::Train => m.split == Split::Train,
            SplitArg::Val => m.split == Split::Val,
            SplitArg::All => true,
        })
        .filter(|(m, _)| a.sizes.as_ref().is_none_or(|s| s.0.contains(&m.n)))
        .map(|(m, inst)| EvalInstance {
            id: m.id.clone(),
            topology: m.topology,
            n: m.n,
            graph: inst.graph.clone(),
        })
        .collect();
    if instances.is_empty() {
        bail!("no instances match the split and size filters");
    }
    let wants_gnn = a.methods.contains(&MethodArg::Gnn);
    if wants_gnn && a.models.is_empty() {
        bail!("method gnn needs at least one --model");
    }
    let ckpts: Vec<Checkpoint> = if wants_gnn {
        a.models.iter().map(|p| load_checkpoint(p)).collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let names: Vec<String> = if ckpts.len() == 1 {
        vec!["gnn".to_string()]
    } else {
        (1..=ckpts.len()).map(|k| format!("gnn-{k}")).collect()
    };
    let mut methods = Vec::new();
    for m in &a.methods {
        match m {
            MethodArg::Gnn => methods.extend(names.iter().zip(&ckpts).map(|(name, c)| Method::Gnn {
                name,
                params: &c.params,
            })),
            MethodArg::Random => methods.push(Method::Random {
                seed: seed::derive(a.seed, 1),
            }),
            MethodArg::Oracle => methods.push(Method::OracleGuided),
        }
    }
    let targets: Vec<CompressionTarget> = a.targets.iter().map(|&t| CompressionTarget::node_ratio(t)).collect();
    let opts = EvalOptions {
        solver: solver_kind(&a.solver, seed::derive(a.seed, 2)),
        oracle: Oracle::new(a.solver.cap),
        timing: a.timing,
    };
    let rows = eval::evaluate(&instances, &methods, &targets, &opts)?;
    let agg = eval::aggregate(&rows);
    io::write_string(&a.out.join("results.csv"), &eval::results_csv(&agg)?)?;
    io::write_string(&a.out.join("rows.csv"), &eval::rows_csv(&rows)?)?;
    if ckpts.len() > 1 {
        let models: Vec<(String, usize)> = names.iter().cloned().zip(ckpts.iter().map(|c| c.arch.layers)).collect();
        io::write_string(&a.out.join("comparison.csv"), &eval::comparison_csv(&models, &agg)?)?;
    }
    echo_dir(cmd, &a.out)?;
    println!(
        "{} instances, {} rows written to {}",
        instances.len(),
        rows.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct GradCheckOutput {
    tolerance: f64,
    max_rel_error: f64,
    points: Vec<GradCheckPoint>,
}

#[derive(Serialize)]
struct GradCheckPoint {
    seed: u64,
    graphs: Vec<String>,
    checked: usize,
    kinks: usize,
    floored: usize,
    max_rel_error: f64,
    worst_block: String,
}

fn grad_check(cmd: &Command, a: &GradCheckArgs) -> Result<()> {
    let ds = Dataset::load(&a.dataset)?;
    let pool: Vec<(String, Sample)> = ds
        .instances
        .iter()
        .map(|(m, i)| Ok((m.id.clone(), Sample::new(i)?)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|(_, s)| s.has_signal())
        .collect();
    if pool.len() < a.graphs || a.graphs == 0 {
        bail!(
            "need {} graphs with non-neutral edges, dataset has {}",
            a.graphs,
            pool.len()
        );
    }
    let arch = Architecture {
        layers: a.layers,
        ..Architecture::default()
    };
    let loss = LossConfig::default();
    let points: Vec<GradCheckPoint> = (0..a.points)
        .into_par_iter()
        .map(|k| {
            let point_seed = seed::derive(a.seed, k as u64);
            let params = GnnParams::init(arch, point_seed)?;
            let picks: Vec<usize> = (0..a.graphs).map(|i| (k * a.graphs + i) % pool.len()).collect();
            let batch: Vec<Sample> = picks.iter().map(|&i| pool[i].1.clone()).collect();
            let GradCheckReport {
                checked,
                kinks,
                floored,
                max_rel_error,
                worst_block,
            } = training::grad_check(&params, &batch, &loss, a.step)?;
            Ok(GradCheckPoint {
                seed: point_seed,
                graphs: picks.iter().map(|&i| pool[i].0.clone()).collect(),
                checked,
                kinks,
                floored,
                max_rel_error,
                worst_block,
            })
        })
        .collect::<Result<_>>()?;
    let max_rel_error = points.iter().map(|p| p.max_rel_error).fold(0.0, f64::max);
    let out = GradCheckOutput {
        tolerance: a.tolerance,
        max_rel_error,
        points,
    };
    io::write_string(
        &a.out.join("gradcheck.json"),
        &(serde_json::to_string_pretty(&out)? + "\n"),
    )?;
    echo_dir(cmd, &a.out)?;
    println!(
        "max relative error {max_rel_error:.3e} over {} points",
        out.points.len()
    );
    if max_rel_error.is_nan() || max_rel_error >= a.tolerance {
        bail!("gradient check failed: {max_rel_error:.3e} >= {}", a.tolerance);
    }
    Ok(())
}

fn sat2ising(cmd: &Command, a: &SatArgs) -> Result<()> {
    let text = io::read_to_string(&a.input)?;
    let mut f = satgen::parse_dimacs(&text).with_context(|| format!("reading {}", a.input.display()))?;
    if let Some((i, j)) = a.gadget {
        f = satgen::equality_gadget(&f, i, j)?;
    }
    let graph = satgen::cnf_to_ising(&f)?;
    io::write_graph(&a.out, &graph)?;
    echo_file(cmd, &a.out)?;
    println!(
        "{} variables, {} clauses -> {} spins, {} edges",
        f.num_vars(),
        f.clauses().len(),
        graph.spin_count(),
        graph.edge_count()
    );
    if let Some((i, j)) = a.check {
        println!(
            "all-sat-equal({i}, {j}): {}",
            satgen::check_all_sat_equal(&f, i, j)?.as_str()
        );
    }
    Ok(())
}
