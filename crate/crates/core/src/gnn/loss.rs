//! Confidence-weighted binary cross-entropy over non-neutral edges.
//!
//! With `N` non-neutral edges, confidence weights `c_i` (softmax of
//! `|y_i - 0.5| / T`, or the normalized even power `(y_i - 0.5)^p`), and
//! `w_i = lambda * c_i + (1 - lambda)`, the loss is
//! `sum_i w_i * BCE(y_i, t_i)`. Labels use `0` for merge (aligned) and `1`
//! for flip-merge (anti-aligned).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::EdgeLabel;

use super::model::sigmoid;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Weighting {
    Softmax {
        temperature: f64,
    },
    /// `c_i = (y_i - 0.5)^p / sum_j (y_j - 0.5)^p` for even `p >= 2`.
    Power {
        p: u32,
    },
}

impl Default for Weighting {
    fn default() -> Self {
        Weighting::Softmax { temperature: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub lambda: f64,
    pub weighting: Weighting,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda: 0.5,
            weighting: Weighting::default(),
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidParameter(format!("lambda {} not in [0, 1]", self.lambda)));
        }
        match self.weighting {
            Weighting::Softmax { temperature } if !(temperature > 0.0 && temperature.is_finite()) => Err(
                Error::InvalidParameter(format!("temperature {temperature} must be positive")),
            ),
            Weighting::Power { p } if p < 2 || p % 2 != 0 => Err(Error::InvalidParameter(format!(
                "power {p} must be an even integer >= 2"
            ))),
            _ => Ok(()),
        }
    }
}

/// Training target of an edge label; `None` for neutral edges.
pub fn target(label: EdgeLabel) -> Option<f64> {
    match label {
        EdgeLabel::A => Some(0.0),
        EdgeLabel::C => Some(1.0),
        EdgeLabel::B => None,
    }
}

/// Confidence weights `c_i` for predictions `yhat`; they sum to one.
pub fn confidence_weights(yhat: &[f64], weighting: Weighting) -> Vec<f64> {
    match weighting {
        Weighting::Softmax { temperature } => {
            let a: Vec<f64> = yhat.iter().map(|y| (y - 0.5).abs() / temperature).collect();
            let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let ex: Vec<f64> = a.iter().map(|x| (x - max).exp()).collect();
            let sum: f64 = ex.iter().sum();
            ex.into_iter().map(|x| x / sum).collect()
        }
        Weighting::Power { p } => {
            let a: Vec<f64> = yhat.iter().map(|y| (y - 0.5).powi(p as i32)).collect();
            let sum: f64 = a.iter().sum();
            if sum == 0.0 {
                vec![1.0 / yhat.len() as f64; yhat.len()]
            } else {
                a.into_iter().map(|x| x / sum).collect()
            }
        }
    }
}

/// Hybrid loss over probabilities. Returns `None` when every edge is
/// neutral.
pub fn hybrid_loss(yhat: &[f64], y: &[f64], neutral: &[bool], cfg: &LossConfig) -> Option<f64> {
    assert!(
        yhat.len() == y.len() && y.len() == neutral.len(),
        "misaligned loss inputs"
    );
    let keep: Vec<usize> = (0..yhat.len()).filter(|&i| !neutral[i]).collect();
    if keep.is_empty() {
        return None;
    }
    let ys: Vec<f64> = keep.iter().map(|&i| yhat[i]).collect();
    let c = confidence_weights(&ys, cfg.weighting);
    Some(
        keep.iter()
            .zip(&c)
            .map(|(&i, &ci)| {
                let w = cfg.lambda * ci + (1.0 - cfg.lambda);
                w * (-y[i] * yhat[i].ln() - (1.0 - y[i]) * (1.0 - yhat[i]).ln())
            })
            .sum(),
    )
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Loss and its gradient with respect to each logit, computed from logits
/// for numerical stability. Neutral edges (`None`) get zero gradient.
pub fn loss_and_grad(logits: &[f64], targets: &[Option<f64>], cfg: &LossConfig) -> Option<(f64, Vec<f64>)> {
    let keep: Vec<usize> = (0..logits.len()).filter(|&i| targets[i].is_some()).collect();
    if keep.is_empty() {
        return None;
    }
    let yhat: Vec<f64> = keep.iter().map(|&i| sigmoid(logits[i])).collect();
    let t: Vec<f64> = keep.iter().map(|&i| targets[i].unwrap()).collect();
    // BCE(z, t) = softplus(z) - t z
    let bce: Vec<f64> = keep
        .iter()
        .zip(&t)
        .map(|(&i, &ti)| softplus(logits[i]) - ti * logits[i])
        .collect();
    let c = confidence_weights(&yhat, cfg.weighting);
    let lambda = cfg.lambda;
    let mut loss = 0.0;
    for (ci, b) in c.iter().zip(&bce) {
        loss += (lambda * ci + (1.0 - lambda)) * b;
    }
    let mean_bce: f64 = c.iter().zip(&bce).map(|(ci, b)| ci * b).sum();
    let power_sum = match cfg.weighting {
        Weighting::Power { p } => yhat.iter().map(|y| (y - 0.5).powi(p as i32)).sum(),
        Weighting::Softmax { .. } => 0.0,
    };
    let mut grad = vec![0.0; logits.len()];
    for (k, &i) in keep.iter().enumerate() {
        let y = yhat[k];
        let w = lambda * c[k] + (1.0 - lambda);
        let mut g = w * (y - t[k]);
        // derivative of sum_j c_j BCE_j through c's dependence on yhat_i
        let dc = match cfg.weighting {
            Weighting::Softmax { temperature } => {
                let sign = if y > 0.5 {
                    1.0
                } else if y < 0.5 {
                    -1.0
                } else {
                    0.0
                };
                c[k] * (bce[k] - mean_bce) * sign / temperature
            }
            Weighting::Power { p } => {
                if power_sum == 0.0 {
                    0.0
                } else {
                    f64::from(p) * (y - 0.5).powi(p as i32 - 1) / power_sum * (bce[k] - mean_bce)
                }
            }
        };
        g += lambda * dc * y * (1.0 - y);
        grad[i] = g;
    }
    Some((loss, grad))
}
