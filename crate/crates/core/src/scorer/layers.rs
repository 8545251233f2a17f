use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::LayerSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `(in_dim, out_dim)`; rows map inputs to outputs as `x · W + b`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub epsilon: f64,
    pub momentum: f64,
}

impl BatchNorm {
    pub fn new(dim: usize, epsilon: f64, momentum: f64) -> Self {
        BatchNorm {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
            running_mean: Array1::zeros(dim),
            running_var: Array1::ones(dim),
            epsilon,
            momentum,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(Dense),
    BatchNorm(BatchNorm),
    Relu,
    Dropout { rate: f64 },
}

#[derive(Debug, Clone)]
pub(super) enum LayerCache {
    Dense {
        input: Array2<f64>,
    },
    BatchNorm {
        xhat: Array2<f64>,
        inv_std: Array1<f64>,
    },
    Relu {
        active: Array2<f64>,
    },
    /// Per-entry multiplier: 0 for dropped units, `1 / (1 - rate)` otherwise.
    Dropout {
        scale: Option<Array2<f64>>,
    },
}

fn slice(a: &Array1<f64>) -> &[f64] {
    a.as_slice().expect("parameter arrays are contiguous")
}

fn slice_mut(a: &mut Array1<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("parameter arrays are contiguous")
}

impl Layer {
    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Dense(d) => LayerSpec::Dense {
                in_dim: d.weight.nrows(),
                out_dim: d.weight.ncols(),
            },
            Layer::BatchNorm(b) => LayerSpec::BatchNorm {
                dim: b.gamma.len(),
                epsilon: b.epsilon,
                momentum: b.momentum,
            },
            Layer::Relu => LayerSpec::Relu,
            Layer::Dropout { rate } => LayerSpec::Dropout { rate: *rate },
        }
    }

    pub fn trainable(&self) -> Vec<&[f64]> {
        match self {
            Layer::Dense(d) => vec![d.weight.as_slice().expect("contiguous"), slice(&d.bias)],
            Layer::BatchNorm(b) => vec![slice(&b.gamma), slice(&b.beta)],
            Layer::Relu | Layer::Dropout { .. } => Vec::new(),
        }
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Layer::Dense(d) => vec![d.weight.as_slice_mut().expect("contiguous"), slice_mut(&mut d.bias)],
            Layer::BatchNorm(b) => vec![slice_mut(&mut b.gamma), slice_mut(&mut b.beta)],
            Layer::Relu | Layer::Dropout { .. } => Vec::new(),
        }
    }

    /// Every stored block, trainable or not, in checkpoint order.
    pub(super) fn all_blocks(&self) -> Vec<&[f64]> {
        match self {
            Layer::BatchNorm(b) => vec![
                slice(&b.gamma),
                slice(&b.beta),
                slice(&b.running_mean),
                slice(&b.running_var),
            ],
            other => other.trainable(),
        }
    }

    pub(super) fn all_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Layer::BatchNorm(b) => vec![
                slice_mut(&mut b.gamma),
                slice_mut(&mut b.beta),
                slice_mut(&mut b.running_mean),
                slice_mut(&mut b.running_var),
            ],
            other => other.trainable_mut(),
        }
    }

    pub(super) fn forward_eval(&self, x: Array2<f64>) -> Array2<f64> {
        match self {
            Layer::Dense(d) => x.dot(&d.weight) + &d.bias,
            Layer::BatchNorm(b) => {
                let inv_std = b.running_var.mapv(|v| 1.0 / (v + b.epsilon).sqrt());
                let scale = &b.gamma * &inv_std;
                let shift = &b.beta - &(&b.running_mean * &scale);
                x * &scale + &shift
            }
            Layer::Relu => x.mapv_into(|v| v.max(0.0)),
            Layer::Dropout { .. } => x,
        }
    }

    pub(super) fn forward_train(&mut self, x: Array2<f64>, rng: &mut ChaCha8Rng) -> (Array2<f64>, LayerCache) {
        match self {
            Layer::Dense(d) => {
                let y = x.dot(&d.weight) + &d.bias;
                (y, LayerCache::Dense { input: x })
            }
            Layer::BatchNorm(b) => {
                let mean = x.mean_axis(Axis(0)).expect("batch is nonempty");
                let centered = x - &mean;
                let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).expect("batch is nonempty");
                let inv_std = var.mapv(|v| 1.0 / (v + b.epsilon).sqrt());
                let xhat = centered * &inv_std;
                let y = &xhat * &b.gamma + &b.beta;
                let m = b.momentum;
                Zip::from(&mut b.running_mean)
                    .and(&mean)
                    .for_each(|r, &v| *r = m * *r + (1.0 - m) * v);
                Zip::from(&mut b.running_var)
                    .and(&var)
                    .for_each(|r, &v| *r = m * *r + (1.0 - m) * v);
                (y, LayerCache::BatchNorm { xhat, inv_std })
            }
            Layer::Relu => {
                let active = x.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                (x.mapv_into(|v| v.max(0.0)), LayerCache::Relu { active })
            }
            Layer::Dropout { rate } => {
                if *rate == 0.0 {
                    return (x, LayerCache::Dropout { scale: None });
                }
                let keep = 1.0 / (1.0 - *rate);
                let rate = *rate;
                let scale =
                    Array2::from_shape_simple_fn(x.raw_dim(), || if rng.random::<f64>() < rate { 0.0 } else { keep });
                (x * &scale, LayerCache::Dropout { scale: Some(scale) })
            }
        }
    }

    /// Returns the upstream gradient and this layer's trainable gradients.
    pub(super) fn backward(&self, cache: &LayerCache, dy: Array2<f64>) -> (Array2<f64>, Vec<Vec<f64>>) {
        match (self, cache) {
            (Layer::Dense(d), LayerCache::Dense { input }) => {
                let dw = input.t().dot(&dy);
                let db = dy.sum_axis(Axis(0));
                let dx = dy.dot(&d.weight.t());
                (dx, vec![dw.iter().copied().collect(), db.to_vec()])
            }
            (Layer::BatchNorm(b), LayerCache::BatchNorm { xhat, inv_std }) => {
                let n = dy.nrows() as f64;
                let dgamma = (&dy * xhat).sum_axis(Axis(0));
                let dbeta = dy.sum_axis(Axis(0));
                let dxhat = dy * &b.gamma;
                let sum_dxhat = dxhat.sum_axis(Axis(0));
                let sum_dxhat_xhat = (&dxhat * xhat).sum_axis(Axis(0));
                // dx = inv_std / n * (n * dxhat - sum(dxhat) - xhat * sum(dxhat * xhat))
                let dx = (dxhat * n - &sum_dxhat - &(xhat * &sum_dxhat_xhat)) * &(inv_std / n);
                (dx, vec![dgamma.to_vec(), dbeta.to_vec()])
            }
            (Layer::Relu, LayerCache::Relu { active }) => (dy * active, Vec::new()),
            (Layer::Dropout { .. }, LayerCache::Dropout { scale }) => match scale {
                Some(s) => (dy * s, Vec::new()),
                None => (dy, Vec::new()),
            },
            _ => unreachable!("cache entries are produced by the same layer stack"),
        }
    }
}
