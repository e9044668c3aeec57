//! Dense layers and multilayer perceptrons with hand-written backward passes.
//!
//! Activations are row-major `rows x dim` buffers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `out_dim x in_dim`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Linear {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Weights and bias uniform in `±1/sqrt(in_dim)`.
    pub fn init<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = (1.0 / in_dim as f64).sqrt();
        let mut l = Linear::zeros(in_dim, out_dim);
        for w in l.weight.iter_mut().chain(l.bias.iter_mut()) {
            *w = rng.gen_range(-bound..bound);
        }
        l
    }

    fn forward(&self, x: &[f64], rows: usize) -> Vec<f64> {
        let mut y = vec![0.0; rows * self.out_dim];
        for r in 0..rows {
            let xr = &x[r * self.in_dim..(r + 1) * self.in_dim];
            let yr = &mut y[r * self.out_dim..(r + 1) * self.out_dim];
            for (o, yo) in yr.iter_mut().enumerate() {
                let wo = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
                *yo = self.bias[o] + wo.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        y
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    fn backward(&self, x: &[f64], dy: &[f64], rows: usize, grad: &mut Linear) -> Vec<f64> {
        let mut dx = vec![0.0; rows * self.in_dim];
        for r in 0..rows {
            let xr = &x[r * self.in_dim..(r + 1) * self.in_dim];
            let dyr = &dy[r * self.out_dim..(r + 1) * self.out_dim];
            let dxr = &mut dx[r * self.in_dim..(r + 1) * self.in_dim];
            for (o, &g) in dyr.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                grad.bias[o] += g;
                let wo = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
                let gwo = &mut grad.weight[o * self.in_dim..(o + 1) * self.in_dim];
                for i in 0..self.in_dim {
                    gwo[i] += g * xr[i];
                    dxr[i] += g * wo[i];
                }
            }
        }
        dx
    }
}

/// Linear layers with ReLU between them and an identity output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Values saved by [`Mlp::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct MlpCache {
    rows: usize,
    /// Input to each layer (post-activation of the previous one).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation output of each hidden layer.
    pre: Vec<Vec<f64>>,
}

impl MlpCache {
    /// Which hidden units were active (pre-activation > 0).
    pub(crate) fn active(&self) -> impl Iterator<Item = bool> + '_ {
        self.pre.iter().flatten().map(|&v| v > 0.0)
    }
}

impl Mlp {
    /// `dims = [in, hidden..., out]`.
    pub fn init<R: Rng>(dims: &[usize], rng: &mut R) -> Self {
        Mlp {
            layers: dims.windows(2).map(|d| Linear::init(d[0], d[1], rng)).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            layers: self.layers.iter().map(|l| Linear::zeros(l.in_dim, l.out_dim)).collect(),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn check(&self, name: &str) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Dimension {
                layer: name.into(),
                expected: 1,
                got: 0,
            });
        }
        for (k, l) in self.layers.iter().enumerate() {
            let layer = format!("{name}.{k}");
            if l.weight.len() != l.in_dim * l.out_dim {
                return Err(Error::Dimension {
                    layer,
                    expected: l.in_dim * l.out_dim,
                    got: l.weight.len(),
                });
            }
            if l.bias.len() != l.out_dim {
                return Err(Error::Dimension {
                    layer,
                    expected: l.out_dim,
                    got: l.bias.len(),
                });
            }
            if k > 0 && self.layers[k - 1].out_dim != l.in_dim {
                return Err(Error::Dimension {
                    layer,
                    expected: self.layers[k - 1].out_dim,
                    got: l.in_dim,
                });
            }
            if l.weight.iter().chain(&l.bias).any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("non-finite parameter in {layer}")));
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64], rows: usize) -> (Vec<f64>, MlpCache) {
        let mut cache = MlpCache {
            rows,
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::new(),
        };
        let mut cur = x.to_vec();
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let y = l.forward(&cur, rows);
            cache.inputs.push(cur);
            if k < last {
                let act = y.iter().map(|&v| v.max(0.0)).collect();
                cache.pre.push(y);
                cur = act;
            } else {
                cur = y;
            }
        }
        (cur, cache)
    }

    pub fn backward(&self, cache: &MlpCache, dy: &[f64], grad: &mut Mlp) -> Vec<f64> {
        let mut d = dy.to_vec();
        for k in (0..self.layers.len()).rev() {
            if k < self.layers.len() - 1 {
                for (g, &z) in d.iter_mut().zip(&cache.pre[k]) {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            d = self.layers[k].backward(&cache.inputs[k], &d, cache.rows, &mut grad.layers[k]);
        }
        d
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = seed::rng(3);
        let mlp = Mlp::init(&[4, 6, 3], &mut rng);
        let rows = 5;
        let x: Vec<f64> = (0..rows * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..rows * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // L = <c, mlp(x)>
        let loss = |m: &Mlp, x: &[f64]| m.forward(x, rows).0.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
        let (_, cache) = mlp.forward(&x, rows);
        let mut grad = mlp.zeros_like();
        let dx = mlp.backward(&cache, &c, &mut grad);
        let h = 1e-6;
        for i in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            let fd = (loss(&mlp, &xp) - loss(&mlp, &xm)) / (2.0 * h);
            assert!((fd - dx[i]).abs() < 1e-7, "dx[{i}] {fd} vs {}", dx[i]);
        }
        let mut probe = mlp.clone();
        for (t, tensor) in grad.tensors().iter().enumerate() {
            for i in 0..tensor.len() {
                let orig = probe.tensors_mut()[t][i];
                probe.tensors_mut()[t][i] = orig + h;
                let lp = loss(&probe, &x);
                probe.tensors_mut()[t][i] = orig - h;
                let lm = loss(&probe, &x);
                probe.tensors_mut()[t][i] = orig;
                let fd = (lp - lm) / (2.0 * h);
                assert!((fd - tensor[i]).abs() < 1e-7, "tensor {t}[{i}]: {fd} vs {}", tensor[i]);
            }
        }
    }

    #[test]
    fn check_reports_shape_errors() {
        let mut rng = seed::rng(0);
        let mut mlp = Mlp::init(&[3, 4, 2], &mut rng);
        assert!(mlp.check("m").is_ok());
        mlp.layers[1].in_dim = 5;
        mlp.layers[1].weight.resize(10, 0.0);
        let err = mlp.check("node1").unwrap_err();
        assert!(err.to_string().contains("node1.1"), "{err}");
    }
}
