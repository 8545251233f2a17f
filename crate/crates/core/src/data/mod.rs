//! Dataset ingestion, rating normalization, splitting and pair generation.

mod io;
mod pairs;
mod split;

use std::collections::HashMap;

use indexmap::IndexMap;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;

pub use io::{
    ingest_dataset, read_jsonl, read_pairs, read_premb, write_jsonl, write_jsonl_with_store, write_pairs, write_premb,
    EmbeddingStore, IngestFormat, PREMB_MAGIC,
};
pub use pairs::{generate_pairs_limited, generate_same_image_pairs, label_pair};
pub use split::{split, split_pairs, train_count};

/// Lowest and highest raw rating on the annotation scale.
pub const RATING_MIN: f64 = 1.0;
pub const RATING_MAX: f64 = 5.0;

/// One image-caption pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub item_id: String,
    pub image_id: String,
    pub caption: Option<String>,
    /// Raw annotator ratings on the 1-5 scale. Never rescaled.
    pub ratings: Option<Vec<f64>>,
    /// Ground truth `y_i`; on the raw scale until the dataset is normalized.
    pub mean_rating: f64,
    /// Image features followed by caption features.
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingDims {
    pub image: usize,
    pub text: usize,
}

impl EmbeddingDims {
    pub fn total(&self) -> usize {
        self.image + self.text
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    items: Vec<Item>,
    dims: EmbeddingDims,
    normalized: bool,
    index: HashMap<String, usize>,
    images: IndexMap<String, Vec<usize>>,
}

impl Dataset {
    /// Builds a dataset, checking id uniqueness, embedding widths and the
    /// rating range implied by `normalized`.
    pub fn new(items: Vec<Item>, dims: EmbeddingDims, normalized: bool) -> Result<Self> {
        let (lo, hi) = if normalized {
            (0.0, 1.0)
        } else {
            (RATING_MIN, RATING_MAX)
        };
        let mut index = HashMap::with_capacity(items.len());
        let mut images: IndexMap<String, Vec<usize>> = IndexMap::new();
        for (pos, item) in items.iter().enumerate() {
            if item.embedding.len() != dims.total() {
                return Err(Error::DimensionMismatch {
                    expected: dims.total(),
                    found: item.embedding.len(),
                    context: format!("embedding of item `{}`", item.item_id),
                });
            }
            if !(lo..=hi).contains(&item.mean_rating) {
                return Err(Error::RatingOutOfRange {
                    item_id: item.item_id.clone(),
                    value: item.mean_rating,
                });
            }
            if index.insert(item.item_id.clone(), pos).is_some() {
                return Err(Error::DuplicateId(item.item_id.clone()));
            }
            images.entry(item.image_id.clone()).or_default().push(pos);
        }
        Ok(Dataset {
            items,
            dims,
            normalized,
            index,
            images,
        })
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dims(&self) -> EmbeddingDims {
        self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims.total()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn position(&self, item_id: &str) -> Option<usize> {
        self.index.get(item_id).copied()
    }

    pub fn get(&self, item_id: &str) -> Option<&Item> {
        self.position(item_id).map(|p| &self.items[p])
    }

    pub(crate) fn require(&self, item_id: &str) -> Result<usize> {
        self.position(item_id)
            .ok_or_else(|| Error::UnknownItem(item_id.to_string()))
    }

    /// Item positions grouped by image, in order of first appearance.
    pub fn image_groups(&self) -> &IndexMap<String, Vec<usize>> {
        &self.images
    }

    pub fn image_group(&self, image_id: &str) -> Option<&[usize]> {
        self.images.get(image_id).map(Vec::as_slice)
    }

    pub fn ratings(&self) -> Vec<f64> {
        self.items.iter().map(|it| it.mean_rating).collect()
    }

    /// Rows of the given item positions stacked into a `(n, D)` matrix.
    pub fn embedding_matrix(&self, positions: &[usize]) -> Array2<f64> {
        let d = self.input_dim();
        let mut out = Array2::zeros((positions.len(), d));
        for (row, &p) in positions.iter().enumerate() {
            out.row_mut(row)
                .as_slice_mut()
                .expect("fresh array is contiguous")
                .copy_from_slice(&self.items[p].embedding);
        }
        out
    }

    pub fn all_embeddings(&self) -> Array2<f64> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.embedding_matrix(&all)
    }

    /// New dataset holding the given positions, in the given order.
    pub fn subset(&self, positions: &[usize]) -> Dataset {
        let items = positions.iter().map(|&p| self.items[p].clone()).collect();
        Dataset::new(items, self.dims, self.normalized).expect("subset of a valid dataset is valid")
    }

    /// Rescales every `mean_rating` from [1, 5] to [0, 1] via `(y - 1) / 4`.
    pub fn normalize_ratings(&self) -> Result<Dataset> {
        if self.normalized {
            return Err(Error::AlreadyNormalized);
        }
        let items = self
            .items
            .iter()
            .map(|it| Item {
                mean_rating: normalize_rating(it.mean_rating),
                ..it.clone()
            })
            .collect();
        Dataset::new(items, self.dims, true)
    }
}

/// `(y - 1) / 4`; strictly increasing on the rating scale.
pub fn normalize_rating(y: f64) -> f64 {
    (y - RATING_MIN) / (RATING_MAX - RATING_MIN)
}

pub fn normalize_ratings(ds: &Dataset) -> Result<Dataset> {
    ds.normalize_ratings()
}

/// Ordered pair of items with its comparative label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairExample {
    pub i: String,
    pub j: String,
    pub label: Label,
    pub same_image: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// First `ceil(f * n)` elements train, the rest test, in input order.
    ItemLevelSequential,
    /// Seeded uniform shuffle, then the same fraction rule.
    PairLevelRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub mode: SplitMode,
    pub seed: u64,
}

impl SplitSpec {
    pub fn sequential(train_fraction: f64) -> Self {
        SplitSpec {
            train_fraction,
            mode: SplitMode::ItemLevelSequential,
            seed: 0,
        }
    }

    pub fn random(train_fraction: f64, seed: u64) -> Self {
        SplitSpec {
            train_fraction,
            mode: SplitMode::PairLevelRandom,
            seed,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::sequential(0.8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSamplingConfig {
    pub n_opponents: usize,
    pub seed: u64,
    pub dedupe: bool,
}

impl PairSamplingConfig {
    pub fn new(n_opponents: usize, seed: u64) -> Self {
        PairSamplingConfig {
            n_opponents,
            seed,
            dedupe: true,
        }
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn item(id: &str, image: &str, y: f64, dim: usize) -> Item {
        Item {
            item_id: id.to_string(),
            image_id: image.to_string(),
            caption: None,
            ratings: None,
            mean_rating: y,
            embedding: vec![y; dim],
        }
    }

    pub fn dataset(ratings: &[(&str, &str, f64)]) -> Dataset {
        let items = ratings.iter().map(|&(id, image, y)| item(id, image, y, 2)).collect();
        Dataset::new(items, EmbeddingDims { image: 1, text: 1 }, false).unwrap()
    }
}
