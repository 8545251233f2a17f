//! The scoring network `f(x)`: a feed-forward stack over the concatenated
//! image/caption embedding that emits one scalar utility per row.
//!
//! Hidden blocks are `dense -> batch_norm -> relu -> dropout`, followed by a
//! one-unit dense head. All arithmetic is `f64`.

mod checkpoint;
mod layers;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, FORMAT_VERSION,
};
pub use layers::{BatchNorm, Dense, Layer};

pub const DEFAULT_INPUT_DIM: usize = 2432;
pub const DEFAULT_HIDDEN: [usize; 3] = [1024, 512, 256];
pub const DEFAULT_DROPOUT: f64 = 0.3;
pub const BATCH_NORM_EPSILON: f64 = 1e-5;
pub const BATCH_NORM_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense { in_dim: usize, out_dim: usize },
    Relu,
    BatchNorm { dim: usize, epsilon: f64, momentum: f64 },
    Dropout { rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    /// Batch statistics, running-stat updates, dropout masks drawn from the seed.
    Train { dropout_seed: u64 },
    /// Running statistics, no dropout. Pure in the parameters and input.
    Eval,
}

/// Gradients of every trainable block, in [`ScorerModel::trainable`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub blocks: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Element-wise sum of two gradient sets of identical shape.
    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

/// Activation record of a forward pass, consumed by [`ScorerModel::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    generation: u64,
    train: bool,
    batch: usize,
    layers: Vec<layers::LayerCache>,
}

impl ForwardCache {
    /// The dropout multipliers drawn in a train-mode pass, one entry per
    /// dropout layer in stack order; `None` where the rate is zero.
    pub fn dropout_scales(&self) -> Vec<Option<ArrayView2<'_, f64>>> {
        self.layers
            .iter()
            .filter_map(|c| match c {
                layers::LayerCache::Dropout { scale } => Some(scale.as_ref().map(|s| s.view())),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScorerModel {
    input_dim: usize,
    seed: u64,
    layers: Vec<Layer>,
    /// Bumped on every mutable parameter access; caches from older
    /// generations are rejected by `backward`.
    generation: u64,
}

/// Builds the default block stack: one `dense -> batch_norm -> relu ->
/// dropout` block per hidden width and a one-unit dense head.
pub fn build_model(input_dim: usize, hidden: &[usize], dropout_rate: f64, seed: u64) -> Result<ScorerModel> {
    ScorerModel::build(input_dim, hidden, dropout_rate, seed)
}

impl ScorerModel {
    pub fn build(input_dim: usize, hidden: &[usize], dropout_rate: f64, seed: u64) -> Result<Self> {
        if hidden.is_empty() {
            return Err(Error::InvalidModel("at least one hidden layer is required".into()));
        }
        let mut specs = Vec::with_capacity(hidden.len() * 4 + 1);
        let mut prev = input_dim;
        for &h in hidden {
            specs.push(LayerSpec::Dense {
                in_dim: prev,
                out_dim: h,
            });
            specs.push(LayerSpec::BatchNorm {
                dim: h,
                epsilon: BATCH_NORM_EPSILON,
                momentum: BATCH_NORM_MOMENTUM,
            });
            specs.push(LayerSpec::Relu);
            specs.push(LayerSpec::Dropout { rate: dropout_rate });
            prev = h;
        }
        specs.push(LayerSpec::Dense {
            in_dim: prev,
            out_dim: 1,
        });
        Self::from_specs(input_dim, &specs, seed)
    }

    /// Builds an arbitrary stack. Dense weights are drawn from
    /// `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`; biases and shifts start at
    /// zero, scales at one, running statistics at (0, 1).
    pub fn from_specs(input_dim: usize, specs: &[LayerSpec], seed: u64) -> Result<Self> {
        validate_specs(input_dim, specs)?;
        let mut rng = seed::rng(seed);
        let layers = specs
            .iter()
            .map(|spec| match *spec {
                LayerSpec::Dense { in_dim, out_dim } => {
                    let limit = (6.0 / in_dim as f64).sqrt();
                    let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
                    let weight = Array2::from_shape_simple_fn((in_dim, out_dim), || dist.sample(&mut rng));
                    Layer::Dense(Dense {
                        weight,
                        bias: Array1::zeros(out_dim),
                    })
                }
                LayerSpec::BatchNorm { dim, epsilon, momentum } => {
                    Layer::BatchNorm(BatchNorm::new(dim, epsilon, momentum))
                }
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::Dropout { rate } => Layer::Dropout { rate },
            })
            .collect();
        Ok(ScorerModel {
            input_dim,
            seed,
            layers,
            generation: 0,
        })
    }

    pub(crate) fn from_parts(input_dim: usize, seed: u64, layers: Vec<Layer>) -> Result<Self> {
        let specs: Vec<LayerSpec> = layers.iter().map(Layer::spec).collect();
        validate_specs(input_dim, &specs)?;
        Ok(ScorerModel {
            input_dim,
            seed,
            layers,
            generation: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.generation += 1;
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    /// Number of trainable scalars (dense weights and biases, batch-norm
    /// scales and shifts).
    pub fn param_count(&self) -> usize {
        param_count(&self.specs())
    }

    /// Trainable blocks in declaration order.
    pub fn trainable(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(Layer::trainable).collect()
    }

    /// Mutable trainable blocks; invalidates outstanding forward caches.
    pub fn trainable_mut(&mut self) -> Vec<&mut [f64]> {
        self.generation += 1;
        self.layers.iter_mut().flat_map(Layer::trainable_mut).collect()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            blocks: self.trainable().iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    fn check_batch(&self, batch: &ArrayView2<'_, f64>) -> Result<()> {
        if batch.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: batch.ncols(),
                context: "batch columns vs model input".into(),
            });
        }
        Ok(())
    }

    /// Scores every row. Train mode needs at least two rows for batch
    /// statistics and updates the running statistics.
    pub fn forward(&mut self, batch: ArrayView2<'_, f64>, mode: ForwardMode) -> Result<(Array1<f64>, ForwardCache)> {
        self.check_batch(&batch)?;
        let dropout_seed = match mode {
            ForwardMode::Eval => {
                let scores = self.predict(batch)?;
                let cache = ForwardCache {
                    generation: self.generation,
                    train: false,
                    batch: scores.len(),
                    layers: Vec::new(),
                };
                return Ok((scores, cache));
            }
            ForwardMode::Train { dropout_seed } => dropout_seed,
        };
        if batch.nrows() < 2 {
            return Err(Error::InsufficientItems(format!(
                "train-mode forward needs a batch of at least 2 rows, got {}",
                batch.nrows()
            )));
        }
        let mut rng = seed::rng(dropout_seed);
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = batch.to_owned();
        for layer in &mut self.layers {
            let (y, cache) = layer.forward_train(x, &mut rng);
            caches.push(cache);
            x = y;
        }
        let scores = x.index_axis_move(Axis(1), 0);
        Ok((
            scores,
            ForwardCache {
                generation: self.generation,
                train: true,
                batch: batch.nrows(),
                layers: caches,
            },
        ))
    }

    /// Eval-mode scores; read-only.
    pub fn predict(&self, batch: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.check_batch(&batch)?;
        let mut x = batch.to_owned();
        for layer in &self.layers {
            x = layer.forward_eval(x);
        }
        Ok(x.index_axis_move(Axis(1), 0))
    }

    /// Gradient of `sum_r d_scores[r] * score[r]` with respect to every
    /// trainable parameter, through the cached train-mode pass.
    pub fn backward(&self, cache: &ForwardCache, d_scores: ArrayView1<'_, f64>) -> Result<Gradients> {
        if cache.generation != self.generation {
            return Err(Error::StaleCache {
                cache: cache.generation,
                model: self.generation,
            });
        }
        if !cache.train {
            return Err(Error::InvalidModel(
                "backward requires a train-mode forward cache".into(),
            ));
        }
        if d_scores.len() != cache.batch {
            return Err(Error::LengthMismatch {
                left: d_scores.len(),
                right: cache.batch,
            });
        }
        let mut blocks: Vec<Vec<Vec<f64>>> = vec![Vec::new(); self.layers.len()];
        let mut dy = d_scores.insert_axis(Axis(1)).to_owned();
        for (k, (layer, lc)) in self.layers.iter().zip(&cache.layers).enumerate().rev() {
            let (dx, grads) = layer.backward(lc, dy);
            blocks[k] = grads;
            dy = dx;
        }
        Ok(Gradients {
            blocks: blocks.into_iter().flatten().collect(),
        })
    }
}

pub fn param_count(specs: &[LayerSpec]) -> usize {
    specs
        .iter()
        .map(|s| match *s {
            LayerSpec::Dense { in_dim, out_dim } => in_dim * out_dim + out_dim,
            LayerSpec::BatchNorm { dim, .. } => 2 * dim,
            LayerSpec::Relu | LayerSpec::Dropout { .. } => 0,
        })
        .sum()
}

fn validate_specs(input_dim: usize, specs: &[LayerSpec]) -> Result<()> {
    if input_dim == 0 {
        return Err(Error::InvalidModel("input_dim must be positive".into()));
    }
    let mut width = input_dim;
    for (k, spec) in specs.iter().enumerate() {
        match *spec {
            LayerSpec::Dense { in_dim, out_dim } => {
                if in_dim == 0 || out_dim == 0 {
                    return Err(Error::InvalidModel(format!("layer {k}: dense dims must be positive")));
                }
                if in_dim != width {
                    return Err(Error::InvalidModel(format!(
                        "layer {k}: dense expects {in_dim} inputs, previous layer gives {width}"
                    )));
                }
                width = out_dim;
            }
            LayerSpec::BatchNorm { dim, epsilon, momentum } => {
                if dim != width {
                    return Err(Error::InvalidModel(format!(
                        "layer {k}: batch norm over {dim} features, previous layer gives {width}"
                    )));
                }
                if !(epsilon > 0.0) || !(0.0..1.0).contains(&momentum) {
                    return Err(Error::InvalidModel(format!(
                        "layer {k}: batch norm needs epsilon > 0 and momentum in [0, 1)"
                    )));
                }
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return Err(Error::InvalidModel(format!(
                        "layer {k}: dropout rate {rate} outside [0, 1)"
                    )));
                }
            }
            LayerSpec::Relu => {}
        }
    }
    match specs.last() {
        Some(LayerSpec::Dense { out_dim: 1, .. }) => Ok(()),
        _ => Err(Error::InvalidModel(
            "the final layer must be a one-unit dense layer".into(),
        )),
    }
}
