//! Experiment drivers: the opponent-count sweep and the same-image protocol.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{
    generate_pairs_limited, generate_same_image_pairs, split, split_pairs, Dataset, PairSamplingConfig, SplitSpec,
};
use crate::error::{Error, Result};
use crate::metrics::{metrics_report, pairwise_accuracy, pearson, spearman, MetricsReport};
use crate::scorer::ScorerModel;
use crate::seed;
use crate::training::{score_dataset, train_pairwise, TrainConfig};

/// Train fraction of the item-level split used by the sweep.
pub const ITEM_TRAIN_FRACTION: f64 = 0.8;
/// Train fraction of the pair-level split in the same-image protocol.
pub const SAME_IMAGE_TRAIN_FRACTION: f64 = 0.5;

fn normalized(ds: &Dataset) -> Result<Dataset> {
    if ds.is_normalized() {
        Ok(ds.clone())
    } else {
        ds.normalize_ratings()
    }
}

/// Scores `test` with `model` and compares against its ratings.
pub fn evaluate_model(model: &ScorerModel, test: &Dataset) -> Result<MetricsReport> {
    let scores = score_dataset(model, test)?;
    metrics_report(&scores, &test.ratings())
}

pub fn score_map(model: &ScorerModel, ds: &Dataset) -> Result<HashMap<String, f64>> {
    let scores = score_dataset(model, ds)?;
    Ok(ds.items().iter().map(|i| i.item_id.clone()).zip(scores).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub seed: u64,
    pub pairs: usize,
    pub pearson: f64,
    pub spearman: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub mean_pearson: f64,
    pub mean_spearman: f64,
    pub runs: Vec<SweepRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub train_items: usize,
    pub test_items: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn render_text(&self) -> String {
        let mut out = format!("{:>4}  {:>9}  {:>9}\n", "N", "pearson", "spearman");
        for r in &self.rows {
            let _ = writeln!(out, "{:>4}  {:>9.4}  {:>9.4}", r.n, r.mean_pearson, r.mean_spearman);
        }
        out
    }
}

/// For each `N` and seed: sample `N` opponents per train item, fit the
/// comparative model, and correlate its scores with the held-out ratings.
///
/// Items are split 80/20 in input order. Each run uses `cfg` with its seed
/// replaced by the run seed; pair sampling draws from a sub-seed of it.
pub fn run_sweep_n(ds: &Dataset, n_values: &[usize], seeds: &[u64], cfg: &TrainConfig) -> Result<SweepTable> {
    if n_values.is_empty() {
        return Err(Error::EmptyInput("n_values"));
    }
    if seeds.is_empty() {
        return Err(Error::EmptyInput("seeds"));
    }
    let (train, test) = split(&normalized(ds)?, &SplitSpec::sequential(ITEM_TRAIN_FRACTION))?;
    let targets = test.ratings();
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let mut runs = Vec::with_capacity(seeds.len());
        for &s in seeds {
            let pairs = generate_pairs_limited(&train, &PairSamplingConfig::new(n, seed::derive(s, "pairs")))?;
            let run_cfg = TrainConfig { seed: s, ..cfg.clone() };
            let (model, _) = train_pairwise(&train, &pairs, &run_cfg)?;
            let scores = score_dataset(&model, &test)?;
            runs.push(SweepRun {
                seed: s,
                pairs: pairs.len(),
                pearson: pearson(&targets, &scores)?,
                spearman: spearman(&targets, &scores)?,
            });
        }
        let k = runs.len() as f64;
        rows.push(SweepRow {
            n,
            mean_pearson: runs.iter().map(|r| r.pearson).sum::<f64>() / k,
            mean_spearman: runs.iter().map(|r| r.spearman).sum::<f64>() / k,
            runs,
        });
    }
    Ok(SweepTable {
        train_items: train.len(),
        test_items: test.len(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SameImageRun {
    pub run: usize,
    pub seed: u64,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub accuracy: f64,
    pub pearson: f64,
    pub spearman: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SameImageAverage {
    pub accuracy: f64,
    pub pearson: f64,
    pub spearman: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SameImageTable {
    pub runs: Vec<SameImageRun>,
    pub average: SameImageAverage,
}

impl SameImageTable {
    pub fn render_text(&self) -> String {
        let mut out = format!("{:>7}  {:>8}  {:>8}  {:>8}\n", "run", "accuracy", "pearson", "spearman");
        for r in &self.runs {
            let _ = writeln!(
                out,
                "{:>7}  {:>8.4}  {:>8.4}  {:>8.4}",
                r.run, r.accuracy, r.pearson, r.spearman
            );
        }
        let a = &self.average;
        let _ = writeln!(
            out,
            "{:>7}  {:>8.4}  {:>8.4}  {:>8.4}",
            "average", a.accuracy, a.pearson, a.spearman
        );
        out
    }

    /// Largest minus smallest per-run accuracy.
    pub fn accuracy_spread(&self) -> f64 {
        let acc = self.runs.iter().map(|r| r.accuracy);
        acc.clone().fold(f64::NEG_INFINITY, f64::max) - acc.fold(f64::INFINITY, f64::min)
    }
}

/// Same-image protocol: all within-image caption pairs, split 50/50 at the
/// pair level with a fresh seed per run. Accuracy is measured on the test
/// pairs; correlations over the items those pairs touch.
pub fn run_same_image_protocol(ds: &Dataset, runs: usize, cfg: &TrainConfig) -> Result<SameImageTable> {
    if runs == 0 {
        return Err(Error::InvalidConfig("runs must be at least 1".into()));
    }
    let ds = normalized(ds)?;
    let pairs = generate_same_image_pairs(&ds);
    if pairs.is_empty() {
        return Err(Error::InsufficientItems("no same-image pairs found".into()));
    }
    let mut out = Vec::with_capacity(runs);
    for run in 1..=runs {
        let run_seed = seed::derive_indexed(cfg.seed, "same-image-run", run as u64);
        let (train_pairs, test_pairs) = split_pairs(
            &pairs,
            &SplitSpec::random(SAME_IMAGE_TRAIN_FRACTION, seed::derive(run_seed, "split")),
        )?;
        let run_cfg = TrainConfig {
            seed: run_seed,
            ..cfg.clone()
        };
        let (model, _) = train_pairwise(&ds, &train_pairs, &run_cfg)?;
        let scores = score_map(&model, &ds)?;

        let mut touched: Vec<&str> = Vec::new();
        let mut seen = HashSet::new();
        for p in &test_pairs {
            for id in [p.i.as_str(), p.j.as_str()] {
                if seen.insert(id) {
                    touched.push(id);
                }
            }
        }
        let pred: Vec<f64> = touched.iter().map(|id| scores[*id]).collect();
        let truth: Vec<f64> = touched
            .iter()
            .map(|id| ds.get(id).expect("pair item").mean_rating)
            .collect();
        out.push(SameImageRun {
            run,
            seed: run_seed,
            train_pairs: train_pairs.len(),
            test_pairs: test_pairs.len(),
            accuracy: pairwise_accuracy(&scores, &test_pairs)?,
            pearson: pearson(&truth, &pred)?,
            spearman: spearman(&truth, &pred)?,
        });
    }
    let k = out.len() as f64;
    let average = SameImageAverage {
        accuracy: out.iter().map(|r| r.accuracy).sum::<f64>() / k,
        pearson: out.iter().map(|r| r.pearson).sum::<f64>() / k,
        spearman: out.iter().map(|r| r.spearman).sum::<f64>() / k,
    };
    Ok(SameImageTable { runs: out, average })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate, SyntheticConfig};

    fn quick() -> TrainConfig {
        TrainConfig {
            hidden: vec![8],
            max_epochs: 2,
            batch_size: 32,
            ..TrainConfig::default()
        }
    }

    fn small(captions: usize) -> Dataset {
        generate(&SyntheticConfig {
            images: 40,
            captions_per_image: captions,
            image_dim: 4,
            text_dim: 4,
            ..SyntheticConfig::linear(5)
        })
        .unwrap()
    }

    #[test]
    fn sweep_shape_and_determinism() {
        let ds = small(1);
        let t = run_sweep_n(&ds, &[1], &[1, 2], &quick()).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].runs.len(), 2);
        assert_eq!((t.train_items, t.test_items), (32, 8));
        assert_eq!(t, run_sweep_n(&ds, &[1], &[1, 2], &quick()).unwrap());
        assert!(t.render_text().lines().count() == 2);
        assert!(run_sweep_n(&ds, &[], &[1], &quick()).is_err());
    }

    #[test]
    fn same_image_shape() {
        let t = run_same_image_protocol(&small(3), 3, &quick()).unwrap();
        assert_eq!(t.runs.len(), 3);
        assert!(t.runs.iter().all(|r| r.train_pairs == 60 && r.test_pairs == 60));
        assert_eq!(t.render_text().lines().count(), 5);
        assert!(run_same_image_protocol(&small(1), 1, &quick()).is_err());
    }
}
