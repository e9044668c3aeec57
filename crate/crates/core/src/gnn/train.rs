//! Batch gradients, the Adam optimizer and the training loop.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{loss_and_grad, target, LossConfig};
use super::model::{sigmoid, Architecture, FeatureSet, GnnParams};
use crate::error::{Error, Result};
use crate::io::LabeledInstance;
use crate::seed;

/// A labeled graph prepared for repeated forward/backward passes.
#[derive(Clone, Debug)]
pub struct Sample {
    pub features: FeatureSet,
    /// Per-edge target, aligned with `features.edges`; `None` for neutral.
    pub targets: Vec<Option<f64>>,
}

impl Sample {
    pub fn new(inst: &LabeledInstance) -> Result<Self> {
        let features = FeatureSet::new(&inst.graph);
        let targets = features
            .edges
            .iter()
            .map(|e| {
                inst.labels
                    .get(e)
                    .map(|&l| target(l))
                    .ok_or_else(|| Error::InvalidParameter(format!("edge {e} has no label")))
            })
            .collect::<Result<_>>()?;
        Ok(Sample { features, targets })
    }

    pub fn has_signal(&self) -> bool {
        self.targets.iter().any(Option::is_some)
    }
}

/// Loss of one sample, or `None` when all its edges are neutral.
pub fn sample_loss(p: &GnnParams, s: &Sample, cfg: &LossConfig) -> Result<Option<f64>> {
    let pass = p.forward(&s.features)?;
    Ok(loss_and_grad(&pass.logits, &s.targets, cfg).map(|x| x.0))
}

/// Mean loss over the samples that carry at least one non-neutral edge.
pub fn mean_loss(p: &GnnParams, samples: &[Sample], cfg: &LossConfig) -> Result<Option<f64>> {
    let losses: Vec<Option<f64>> = samples
        .par_iter()
        .map(|s| sample_loss(p, s, cfg))
        .collect::<Result<_>>()?;
    let used: Vec<f64> = losses.into_iter().flatten().collect();
    if used.is_empty() {
        return Ok(None);
    }
    Ok(Some(used.iter().sum::<f64>() / used.len() as f64))
}

/// Batch-mean loss and its exact gradient. Samples with only neutral
/// edges are skipped; `None` when nothing remains.
pub fn gradients(p: &GnnParams, batch: &[Sample], cfg: &LossConfig) -> Result<Option<(f64, GnnParams)>> {
    let parts: Vec<Option<(f64, GnnParams)>> = batch
        .par_iter()
        .map(|s| {
            let pass = p.forward(&s.features)?;
            Ok(loss_and_grad(&pass.logits, &s.targets, cfg)
                .map(|(loss, dlogits)| (loss, p.backward(&s.features, &pass, &dlogits))))
        })
        .collect::<Result<_>>()?;
    // ordered reduction keeps the sum independent of worker count
    let mut total: Option<(f64, GnnParams)> = None;
    let mut count = 0usize;
    for (loss, grad) in parts.into_iter().flatten() {
        count += 1;
        match &mut total {
            None => total = Some((loss, grad)),
            Some((l, g)) => {
                *l += loss;
                g.add_assign(&grad);
            }
        }
    }
    let Some((loss, mut grad)) = total else {
        return Ok(None);
    };
    grad.scale(1.0 / count as f64);
    for (name, block) in grad.blocks() {
        if block.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteGradient(name));
        }
    }
    Ok(Some((loss / count as f64, grad)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moment estimates.
pub struct Adam {
    cfg: AdamConfig,
    m: GnnParams,
    v: GnnParams,
    t: i32,
}

impl Adam {
    pub fn new(cfg: AdamConfig, like: &GnnParams) -> Self {
        Adam {
            cfg,
            m: like.zeros_like(),
            v: like.zeros_like(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut GnnParams, grad: &GnnParams) {
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        let grads: Vec<&[f64]> = grad.blocks().into_iter().map(|(_, t)| t).collect();
        let params = params.tensors_mut();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(ms).zip(vs) {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub arch: Architecture,
    pub loss: LossConfig,
    pub adam: AdamConfig,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            arch: Architecture::default(),
            loss: LossConfig::default(),
            adam: AdamConfig::default(),
            epochs: 300,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub curve: Vec<EpochStats>,
}

impl TrainReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["epoch", "train_loss", "val_loss"])?;
        for s in &self.curve {
            w.write_record([s.epoch.to_string(), s.train_loss.to_string(), s.val_loss.to_string()])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Parse(e.to_string()))?).expect("csv is utf-8"))
    }
}

/// Trains on `train`, keeping the parameters with the lowest validation
/// loss. One optimizer step per training graph; graphs are visited in a
/// seeded shuffle each epoch.
pub fn train(train: &[Sample], val: &[Sample], cfg: &TrainConfig) -> Result<(GnnParams, TrainReport)> {
    cfg.loss.validate()?;
    if cfg.epochs == 0 || cfg.adam.lr.is_nan() || cfg.adam.lr <= 0.0 {
        return Err(Error::InvalidParameter(
            "epochs and learning rate must be positive".into(),
        ));
    }
    let train: Vec<&Sample> = train.iter().filter(|s| s.has_signal()).collect();
    let val: Vec<Sample> = val.iter().filter(|s| s.has_signal()).cloned().collect();
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidParameter(
            "training and validation splits need at least one non-neutral edge".into(),
        ));
    }
    let mut params = GnnParams::init(cfg.arch, seed::derive(cfg.seed, 0))?;
    let mut adam = Adam::new(cfg.adam, &params);
    let mut best = (params.clone(), f64::INFINITY, 0usize);
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut seed::rng(seed::derive(cfg.seed, epoch as u64)));
        let mut sum = 0.0;
        for &i in &order {
            let (loss, grad) = gradients(&params, std::slice::from_ref(train[i]), &cfg.loss)
                .map_err(|e| match e {
                    Error::NonFiniteGradient(_) => Error::Diverged(epoch),
                    other => other,
                })?
                .expect("samples with signal always produce a loss");
            sum += loss;
            adam.step(&mut params, &grad);
        }
        let train_loss = sum / train.len() as f64;
        let val_loss = mean_loss(&params, &val, &cfg.loss)?.expect("validation set has signal");
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Diverged(epoch));
        }
        log::debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
        curve.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best.1 {
            best = (params.clone(), val_loss, epoch);
        }
    }
    let (params, best_val_loss, best_epoch) = best;
    Ok((
        params,
        TrainReport {
            best_epoch,
            best_val_loss,
            curve,
        },
    ))
}

/// Fraction of non-neutral edges whose predicted class matches the label.
pub fn accuracy(p: &GnnParams, samples: &[Sample]) -> Result<f64> {
    let mut hit = 0usize;
    let mut total = 0usize;
    for s in samples {
        let pass = p.forward(&s.features)?;
        for (z, t) in pass.logits.iter().zip(&s.targets) {
            if let Some(t) = t {
                total += 1;
                let predicted = if sigmoid(*z) < 0.5 { 0.0 } else { 1.0 };
                if predicted == *t {
                    hit += 1;
                }
            }
        }
    }
    if total == 0 {
        return Err(Error::InvalidParameter("no non-neutral edges to score".into()));
    }
    Ok(hit as f64 / total as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    /// Partials compared against finite differences.
    pub checked: usize,
    /// Partials whose `+h` or `-h` probe switched a ReLU unit on or off.
    /// Central differences straddle a kink there, so they are not a valid
    /// reference and the partial is left out of `max_rel_error`.
    pub kinks: usize,
    /// Checked partials whose denominator was raised to the rounding floor.
    pub floored: usize,
    pub max_rel_error: f64,
    pub worst_block: String,
}

/// Floor on the denominator of the relative error, so that components
/// whose true value is ~0 are compared absolutely.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// A central difference of a loss `L` computed in f64 carries rounding error
/// of order `eps * |L| / h`. Partials smaller than this many such units are
/// compared absolutely against the floor, so one rounding unit of
/// disagreement reads as a relative error of `1 / ROUNDING_UNITS`.
pub const ROUNDING_UNITS: f64 = 1e4;

/// Batch-mean loss plus the concatenated activation pattern.
fn probe_loss(p: &GnnParams, batch: &[Sample], cfg: &LossConfig) -> Result<(f64, Vec<bool>)> {
    let (mut sum, mut count, mut pattern) = (0.0, 0usize, Vec::new());
    for s in batch {
        let pass = p.forward(&s.features)?;
        if let Some((loss, _)) = loss_and_grad(&pass.logits, &s.targets, cfg) {
            sum += loss;
            count += 1;
        }
        pattern.extend(pass.activation_pattern());
    }
    Ok((if count == 0 { 0.0 } else { sum / count as f64 }, pattern))
}

/// Compares reverse-mode gradients of the batch loss against central
/// differences with step `h`, over every parameter.
pub fn grad_check(p: &GnnParams, batch: &[Sample], cfg: &LossConfig, h: f64) -> Result<GradCheckReport> {
    let (_, grad) =
        gradients(p, batch, cfg)?.ok_or_else(|| Error::InvalidParameter("batch has no non-neutral edges".into()))?;
    let (_, base) = probe_loss(p, batch, cfg)?;
    let names: Vec<String> = grad.blocks().into_iter().map(|(n, _)| n).collect();
    let analytic: Vec<Vec<f64>> = grad.blocks().into_iter().map(|(_, t)| t.to_vec()).collect();
    let mut probe = p.clone();
    let mut report = GradCheckReport {
        checked: 0,
        kinks: 0,
        floored: 0,
        max_rel_error: 0.0,
        worst_block: String::new(),
    };
    for (b, block) in analytic.iter().enumerate() {
        for (i, &a) in block.iter().enumerate() {
            let orig = probe.tensors_mut()[b][i];
            probe.tensors_mut()[b][i] = orig + h;
            let (lp, pp) = probe_loss(&probe, batch, cfg)?;
            probe.tensors_mut()[b][i] = orig - h;
            let (lm, pm) = probe_loss(&probe, batch, cfg)?;
            probe.tensors_mut()[b][i] = orig;
            if pp != base || pm != base {
                report.kinks += 1;
                continue;
            }
            let numeric = (lp - lm) / (2.0 * h);
            let rounding = f64::EPSILON * lp.abs().max(lm.abs()) / h;
            let floor = GRAD_CHECK_FLOOR.max(ROUNDING_UNITS * rounding);
            let scale = a.abs().max(numeric.abs());
            if scale < floor {
                report.floored += 1;
            }
            let rel = (a - numeric).abs() / scale.max(floor);
            report.checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_block = names[b].clone();
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_instance, DegreeParam, WeightRange};
    use crate::oracle::Oracle;

    fn sample(param: DegreeParam, n: u32, seed: u64) -> Sample {
        let graph = gen_instance(param, n, seed, WeightRange::default()).unwrap();
        let labels = Oracle::default().label_edges(&graph).unwrap();
        Sample::new(&LabeledInstance { graph, labels }).unwrap()
    }

    fn small_arch() -> Architecture {
        Architecture {
            layers: 2,
            node_dim: 4,
            edge_dim: 3,
            hidden: 5,
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p = GnnParams::init(small_arch(), 12).unwrap();
        let batch = vec![
            sample(DegreeParam::Er { p: 0.5 }, 6, 1),
            sample(DegreeParam::Ba { m: 2 }, 5, 2),
        ];
        let report = grad_check(&p, &batch, &LossConfig::default(), 1e-5).unwrap();
        assert_eq!(report.checked, p.param_count());
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }

    #[test]
    fn duplicated_instance_has_single_instance_gradient() {
        let p = GnnParams::init(small_arch(), 3).unwrap();
        let s = sample(DegreeParam::Ws { k: 2, beta: 0.2 }, 6, 9);
        let (l1, g1) = gradients(&p, std::slice::from_ref(&s), &LossConfig::default())
            .unwrap()
            .unwrap();
        let (l2, g2) = gradients(&p, &[s.clone(), s], &LossConfig::default()).unwrap().unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for ((_, a), (_, b)) in g1.blocks().into_iter().zip(g2.blocks()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_step_decreases_loss() {
        let mut p = GnnParams::init(Architecture::default(), 5).unwrap();
        let batch = vec![sample(DegreeParam::Er { p: 0.6 }, 7, 4)];
        let cfg = LossConfig::default();
        let (before, grad) = gradients(&p, &batch, &cfg).unwrap().unwrap();
        Adam::new(AdamConfig::default(), &p).step(&mut p, &grad);
        let after = mean_loss(&p, &batch, &cfg).unwrap().unwrap();
        assert!(after < before, "{after} >= {before}");
    }

    #[test]
    fn all_neutral_batch_has_no_gradient() {
        let g = crate::graph::HamiltonianGraph::build(&[0.0; 3], &[(1, 2, -1.0), (2, 3, -1.0), (1, 3, -1.0)]).unwrap();
        let labels = Oracle::default().label_edges(&g).unwrap();
        let s = Sample::new(&LabeledInstance { graph: g, labels }).unwrap();
        assert!(!s.has_signal());
        let p = GnnParams::init(small_arch(), 0).unwrap();
        assert!(gradients(&p, &[s], &LossConfig::default()).unwrap().is_none());
    }

    #[test]
    fn training_is_deterministic_and_respects_lambda() {
        let train_set: Vec<Sample> = (0..6).map(|k| sample(DegreeParam::Er { p: 0.7 }, 6, k)).collect();
        let val_set: Vec<Sample> = (10..12).map(|k| sample(DegreeParam::Er { p: 0.7 }, 6, k)).collect();
        let cfg = TrainConfig {
            arch: small_arch(),
            epochs: 5,
            seed: 3,
            ..TrainConfig::default()
        };
        let (pa, ra) = train(&train_set, &val_set, &cfg).unwrap();
        let (pb, rb) = train(&train_set, &val_set, &cfg).unwrap();
        assert_eq!(pa, pb);
        assert_eq!(ra.curve, rb.curve);
        assert_eq!(
            ra.best_val_loss,
            ra.curve.iter().map(|s| s.val_loss).fold(f64::INFINITY, f64::min)
        );
        let mut other = cfg;
        other.loss.lambda = 1.0;
        let mut base = cfg;
        base.loss.lambda = 0.0;
        let (_, r0) = train(&train_set, &val_set, &base).unwrap();
        let (_, r1) = train(&train_set, &val_set, &other).unwrap();
        assert_ne!(r0.curve.last().unwrap().train_loss, r1.curve.last().unwrap().train_loss);
    }

    #[test]
    fn report_csv_has_header() {
        let r = TrainReport {
            best_epoch: 1,
            best_val_loss: 0.5,
            curve: vec![EpochStats {
                epoch: 1,
                train_loss: 0.75,
                val_loss: 0.5,
            }],
        };
        assert_eq!(r.to_csv().unwrap(), "epoch,train_loss,val_loss\n1,0.75,0.5\n");
    }
}
