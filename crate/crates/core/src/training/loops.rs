use std::time::Instant;

use ndarray::{concatenate, Array1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::early_stop::{EarlyStopping, StopDecision};
use super::loss::{hinge_loss, ranking_penalized_mae};
use super::optim::{adam_step, cosine_lr, OptimizerState};
use super::TrainConfig;
use crate::data::{Dataset, PairExample};
use crate::error::{Error, Result};
use crate::label::Label;
use crate::scorer::{ForwardMode, Gradients, ScorerModel};
use crate::seed;

/// Rows scored per eval-mode call when scoring a whole dataset.
const SCORE_CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    pub train_units: usize,
    pub validation_units: usize,
    /// Not serialized, so that reports stay byte-identical across runs.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

// Wall time is measurement noise, not part of the outcome.
impl PartialEq for TrainReport {
    fn eq(&self, other: &Self) -> bool {
        self.epochs == other.epochs
            && self.stopped_epoch == other.stopped_epoch
            && self.best_epoch == other.best_epoch
            && self.best_validation_loss == other.best_validation_loss
            && self.train_units == other.train_units
            && self.validation_units == other.validation_units
    }
}

/// Loss and gradients of the regression objective on one mini-batch.
pub fn regression_objective(
    model: &mut ScorerModel,
    batch: ArrayView2<'_, f64>,
    targets: &[f64],
    lambda_rank: f64,
    dropout_seed: u64,
) -> Result<(f64, Gradients)> {
    let (scores, cache) = model.forward(batch, ForwardMode::Train { dropout_seed })?;
    let pred = scores.as_slice().expect("fresh scores are contiguous");
    let (loss, dpred) = ranking_penalized_mae(pred, targets, lambda_rank)?;
    let grads = model.backward(&cache, Array1::from(dpred).view())?;
    Ok((loss, grads))
}

/// Mean hinge loss over a batch of pairs and its gradients.
///
/// Both branches go through one forward pass (`[x_i; x_j]`) so that they
/// share batch-norm statistics and dropout is drawn once for the step.
pub fn pairwise_objective(
    model: &mut ScorerModel,
    first: ArrayView2<'_, f64>,
    second: ArrayView2<'_, f64>,
    labels: &[Label],
    margin: f64,
    dropout_seed: u64,
) -> Result<(f64, Gradients)> {
    let b = labels.len();
    if first.nrows() != b || second.nrows() != b {
        return Err(Error::LengthMismatch {
            left: first.nrows().max(second.nrows()),
            right: b,
        });
    }
    if b == 0 {
        return Err(Error::EmptyInput("pair batch"));
    }
    let stacked = concatenate(Axis(0), &[first, second])
        .map_err(|e| Error::InvalidModel(format!("cannot stack branches: {e}")))?;
    let (scores, cache) = model.forward(stacked.view(), ForwardMode::Train { dropout_seed })?;
    let mut d_scores = Array1::zeros(2 * b);
    let mut total = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        let c = scores[r] - scores[b + r];
        let (loss, dc) = hinge_loss(label, c, margin);
        total += loss;
        d_scores[r] = dc / b as f64;
        d_scores[b + r] = -dc / b as f64;
    }
    let grads = model.backward(&cache, d_scores.view())?;
    Ok((total / b as f64, grads))
}

/// Eval-mode score of every item, in dataset order.
pub fn score_dataset(model: &ScorerModel, ds: &Dataset) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(ds.len());
    let positions: Vec<usize> = (0..ds.len()).collect();
    for chunk in positions.chunks(SCORE_CHUNK) {
        out.extend(model.predict(ds.embedding_matrix(chunk).view())?);
    }
    if let Some(k) = out.iter().position(|s| !s.is_finite()) {
        return Err(Error::NumericFailure(format!(
            "score for item {} is {}",
            ds.items()[k].item_id,
            out[k]
        )));
    }
    Ok(out)
}

fn holdout_count(total: usize, fraction: f64) -> usize {
    ((fraction * total as f64).round() as usize).max(1)
}

/// Shuffles `0..total` with the validation seed and splits off the holdout.
fn validation_split(total: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut seed::rng(seed));
    let n_val = holdout_count(total, fraction).min(total);
    let val = order[..n_val].to_vec();
    let train = order[n_val..].to_vec();
    (train, val)
}

fn check_finite(loss: f64, what: &str, epoch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::NumericFailure(format!("{what} loss is {loss} at epoch {epoch}")))
    }
}

/// Shared epoch loop: cosine schedule, seeded shuffling, Adam, early stopping
/// with best-model snapshots.
fn run_epochs<S, V>(
    mut model: ScorerModel,
    cfg: &TrainConfig,
    train_units: usize,
    validation_units: usize,
    min_batch: usize,
    mut step: S,
    mut validate: V,
) -> Result<(ScorerModel, TrainReport)>
where
    S: FnMut(&mut ScorerModel, &[usize], u64) -> Result<(f64, Gradients)>,
    V: FnMut(&ScorerModel) -> Result<f64>,
{
    let started = Instant::now();
    let mut state = OptimizerState::new(model.trainable().iter().map(|b| b.len()));
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = model.clone();
    let mut epochs = Vec::new();
    let mut order: Vec<usize> = (0..train_units).collect();
    let mut global_step = 0u64;

    for epoch in 1..=cfg.max_epochs {
        let lr = cosine_lr(epoch - 1, cfg.max_epochs, cfg.lr_max, cfg.lr_min);
        order.shuffle(&mut seed::rng(seed::derive_indexed(cfg.seed, "shuffle", epoch as u64)));
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            if batch.len() < min_batch {
                continue;
            }
            let dropout_seed = seed::derive_indexed(cfg.seed, "dropout", global_step);
            global_step += 1;
            let (loss, grads) = step(&mut model, batch, dropout_seed)?;
            check_finite(loss, "training", epoch)?;
            adam_step(&mut model.trainable_mut(), &grads, &mut state, lr, cfg.l2)?;
            loss_sum += loss;
            batches += 1;
        }
        let val = validate(&model)?;
        check_finite(val, "validation", epoch)?;
        epochs.push(EpochRecord {
            epoch,
            learning_rate: lr,
            train_loss: if batches > 0 { loss_sum / batches as f64 } else { 0.0 },
            validation_loss: val,
        });
        match stopper.observe(epoch, val) {
            StopDecision::Improved => best = model.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }
    let report = TrainReport {
        stopped_epoch: epochs.len(),
        best_epoch: stopper.best_epoch(),
        best_validation_loss: stopper.best(),
        epochs,
        train_units,
        validation_units,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    Ok((best, report))
}

fn fresh_model(input_dim: usize, cfg: &TrainConfig) -> Result<ScorerModel> {
    ScorerModel::build(input_dim, &cfg.hidden, cfg.dropout, seed::derive(cfg.seed, "init"))
}

/// Fits the scorer to normalized ratings with the ranking-penalized MAE.
///
/// A seeded `validation_fraction` of the items is held out for early
/// stopping; the returned model is the best-validation snapshot.
pub fn train_regression(train: &Dataset, cfg: &TrainConfig) -> Result<(ScorerModel, TrainReport)> {
    cfg.validate()?;
    if !train.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let (fit, val) = validation_split(
        train.len(),
        cfg.validation_fraction,
        seed::derive(cfg.seed, "validation"),
    );
    if fit.len() < 2 {
        return Err(Error::InsufficientItems(format!(
            "regression training needs at least 2 items after holding out validation, have {}",
            fit.len()
        )));
    }
    let ratings = train.ratings();
    let val_x = train.embedding_matrix(&val);
    let val_y: Vec<f64> = val.iter().map(|&p| ratings[p]).collect();
    let model = fresh_model(train.input_dim(), cfg)?;

    run_epochs(
        model,
        cfg,
        fit.len(),
        val.len(),
        2,
        |m, batch, dropout_seed| {
            let positions: Vec<usize> = batch.iter().map(|&k| fit[k]).collect();
            let x = train.embedding_matrix(&positions);
            let y: Vec<f64> = positions.iter().map(|&p| ratings[p]).collect();
            regression_objective(m, x.view(), &y, cfg.lambda_rank, dropout_seed)
        },
        |m| {
            let pred = m.predict(val_x.view())?;
            Ok(ranking_penalized_mae(pred.as_slice().unwrap(), &val_y, cfg.lambda_rank)?.0)
        },
    )
}

/// Resolved pair: dataset positions plus label.
#[derive(Clone, Copy)]
struct IndexedPair {
    i: usize,
    j: usize,
    label: Label,
}

fn resolve_pairs(ds: &Dataset, pairs: &[PairExample]) -> Result<Vec<IndexedPair>> {
    pairs
        .iter()
        .map(|p| {
            Ok(IndexedPair {
                i: ds.require(&p.i)?,
                j: ds.require(&p.j)?,
                label: p.label,
            })
        })
        .collect()
}

/// Fits the scorer to comparative labels with the margin hinge loss on
/// `C_ij = f(x_i) - f(x_j)`.
pub fn train_pairwise(train: &Dataset, pairs: &[PairExample], cfg: &TrainConfig) -> Result<(ScorerModel, TrainReport)> {
    cfg.validate()?;
    if !train.is_normalized() {
        return Err(Error::NotNormalized);
    }
    if pairs.is_empty() {
        return Err(Error::EmptyInput("pair list"));
    }
    let resolved = resolve_pairs(train, pairs)?;
    if resolved.len() < 2 {
        return Err(Error::InsufficientItems(
            "pairwise training needs at least 2 pairs".into(),
        ));
    }
    let (fit, val) = validation_split(
        resolved.len(),
        cfg.validation_fraction,
        seed::derive(cfg.seed, "validation"),
    );
    let fit: Vec<IndexedPair> = fit.iter().map(|&k| resolved[k]).collect();
    let val: Vec<IndexedPair> = val.iter().map(|&k| resolved[k]).collect();
    let model = fresh_model(train.input_dim(), cfg)?;

    run_epochs(
        model,
        cfg,
        fit.len(),
        val.len(),
        1,
        |m, batch, dropout_seed| {
            let first: Vec<usize> = batch.iter().map(|&k| fit[k].i).collect();
            let second: Vec<usize> = batch.iter().map(|&k| fit[k].j).collect();
            let labels: Vec<Label> = batch.iter().map(|&k| fit[k].label).collect();
            let xi = train.embedding_matrix(&first);
            let xj = train.embedding_matrix(&second);
            pairwise_objective(m, xi.view(), xj.view(), &labels, cfg.margin, dropout_seed)
        },
        |m| {
            let scores = score_dataset(m, train)?;
            let total: f64 = val
                .iter()
                .map(|p| hinge_loss(p.label, scores[p.i] - scores[p.j], cfg.margin).0)
                .sum();
            Ok(total / val.len() as f64)
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{EmbeddingDims, Item};
    use crate::scorer::Layer;
    use ndarray::array;

    fn tiny_dataset(n: usize) -> Dataset {
        let items = (0..n)
            .map(|k| {
                let a = (k as f64 * 0.37).sin();
                let b = (k as f64 * 0.11).cos();
                Item {
                    item_id: format!("it{k}"),
                    image_id: format!("im{}", k / 2),
                    caption: None,
                    ratings: None,
                    mean_rating: (0.5 + 0.4 * (a - b) / 2.0).clamp(0.0, 1.0),
                    embedding: vec![a, b, a * b],
                }
            })
            .collect();
        Dataset::new(items, EmbeddingDims { image: 2, text: 1 }, true).unwrap()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            hidden: vec![6, 4],
            batch_size: 8,
            max_epochs: 6,
            patience: 3,
            lr_max: 1e-2,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn first_step_loss_equals_margin_when_scores_tie() {
        let mut m = ScorerModel::build(3, &[4], 0.0, 1).unwrap();
        if let Some(Layer::Dense(d)) = m.layers_mut().last_mut() {
            d.weight.fill(0.0);
        }
        let xi = array![[1.0, 2.0, 3.0], [0.5, -1.0, 2.0]];
        let xj = array![[-1.0, 0.0, 1.0], [2.0, 2.0, 2.0]];
        let (loss, _) = pairwise_objective(&mut m, xi.view(), xj.view(), &[Label::Pos, Label::Pos], 1.5, 0).unwrap();
        assert_eq!(loss, 1.5);
    }

    #[test]
    fn regression_requires_normalized_data() {
        let raw = Dataset::new(
            vec![Item {
                item_id: "a".into(),
                image_id: "x".into(),
                caption: None,
                ratings: None,
                mean_rating: 3.0,
                embedding: vec![1.0],
            }],
            EmbeddingDims { image: 1, text: 0 },
            false,
        )
        .unwrap();
        assert!(matches!(
            train_regression(&raw, &small_cfg()),
            Err(Error::NotNormalized)
        ));
    }

    #[test]
    fn too_small_for_a_batch() {
        let ds = tiny_dataset(2);
        assert!(matches!(
            train_regression(&ds, &small_cfg()),
            Err(Error::InsufficientItems(_))
        ));
    }

    #[test]
    fn unknown_and_empty_pairs() {
        let ds = tiny_dataset(10);
        assert!(matches!(
            train_pairwise(&ds, &[], &small_cfg()),
            Err(Error::EmptyInput(_))
        ));
        let stray = vec![PairExample {
            i: "it0".into(),
            j: "ghost".into(),
            label: Label::Pos,
            same_image: false,
        }];
        assert!(matches!(train_pairwise(&ds, &stray, &small_cfg()), Err(Error::UnknownItem(id)) if id == "ghost"));
    }

    #[test]
    fn report_invariants_and_determinism() {
        let ds = tiny_dataset(60);
        let (m1, r1) = train_regression(&ds, &small_cfg()).unwrap();
        let (m2, r2) = train_regression(&ds, &small_cfg()).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(m1, m2);
        assert!(r1.best_epoch >= 1 && r1.best_epoch <= r1.stopped_epoch);
        let best = r1
            .epochs
            .iter()
            .map(|e| e.validation_loss)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(best, r1.best_validation_loss);
    }
}
