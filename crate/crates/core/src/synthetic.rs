//! Synthetic embedding datasets with a known latent quality score.
//!
//! Embeddings are standard normal. The latent score is
//! `y = sigmoid(w · x) + N(0, noise_sd)`, clamped to `[0, 1]` and stored on
//! the raw `1..5` scale as `1 + 4y`, so normalizing recovers `y` exactly.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, EmbeddingDims, Item};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub images: usize,
    /// Captions per image. 1 gives one independent item per image.
    pub captions_per_image: usize,
    pub image_dim: usize,
    pub text_dim: usize,
    /// Standard deviation of `w · x` over the population.
    pub logit_scale: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    /// 2000 independent items, 32 + 32 dims.
    pub fn linear(seed: u64) -> Self {
        SyntheticConfig {
            images: 2000,
            captions_per_image: 1,
            image_dim: 32,
            text_dim: 32,
            logit_scale: 2.0,
            noise_sd: 0.05,
            seed,
        }
    }

    /// 300 images with 4 captions each; the caption half of the embedding
    /// drives the differences within an image.
    pub fn multi_caption(seed: u64) -> Self {
        SyntheticConfig {
            images: 300,
            captions_per_image: 4,
            ..Self::linear(seed)
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn gaussian_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Generates the dataset on the raw rating scale.
pub fn generate(cfg: &SyntheticConfig) -> Result<Dataset> {
    if cfg.images == 0 || cfg.captions_per_image == 0 || cfg.image_dim + cfg.text_dim == 0 {
        return Err(Error::InvalidConfig(
            "synthetic dataset needs images, captions and dims".into(),
        ));
    }
    let noise = Normal::new(0.0, cfg.noise_sd).map_err(|e| Error::InvalidConfig(format!("noise_sd: {e}")))?;
    let dim = cfg.image_dim + cfg.text_dim;
    // Scale w so that w·x ~ N(0, logit_scale^2) for x ~ N(0, I).
    let mut w = gaussian_vec(&mut seed::rng(seed::derive(cfg.seed, "weights")), dim);
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut w {
        *v *= cfg.logit_scale / norm;
    }

    let mut rng = seed::rng(seed::derive(cfg.seed, "samples"));
    let mut items = Vec::with_capacity(cfg.images * cfg.captions_per_image);
    for img in 0..cfg.images {
        let image_part = gaussian_vec(&mut rng, cfg.image_dim);
        for cap in 0..cfg.captions_per_image {
            let mut x = image_part.clone();
            x.extend(gaussian_vec(&mut rng, cfg.text_dim));
            let logit: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
            let y = (sigmoid(logit) + noise.sample(&mut rng)).clamp(0.0, 1.0);
            let item_id = if cfg.captions_per_image == 1 {
                format!("s{img:05}")
            } else {
                format!("s{img:05}c{cap}")
            };
            items.push(Item {
                item_id,
                image_id: format!("img{img:05}"),
                caption: None,
                ratings: None,
                mean_rating: 1.0 + 4.0 * y,
                embedding: x,
            });
        }
    }
    Dataset::new(
        items,
        EmbeddingDims {
            image: cfg.image_dim,
            text: cfg.text_dim,
        },
        false,
    )
}
