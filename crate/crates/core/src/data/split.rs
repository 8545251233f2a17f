use rand::seq::SliceRandom;

use super::{Dataset, PairExample, SplitMode, SplitSpec};
use crate::error::{Error, Result};
use crate::seed;

/// Number of elements on the train side: `ceil(fraction * total)`.
///
/// A small slack absorbs representation error so that e.g. `0.7 * 10`
/// yields 7, not 8.
pub fn train_count(total: usize, fraction: f64) -> usize {
    let raw = fraction * total as f64;
    ((raw - 1e-9).ceil().max(0.0) as usize).min(total)
}

fn partition<T: Clone>(elements: &[T], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>)> {
    spec.validate()?;
    let total = elements.len();
    let n_train = train_count(total, spec.train_fraction);
    let side = if n_train == 0 {
        Some("train")
    } else if n_train == total {
        Some("test")
    } else {
        None
    };
    if let Some(side) = side {
        return Err(Error::EmptySplit {
            side,
            total,
            fraction: spec.train_fraction,
        });
    }
    let mut order: Vec<usize> = (0..total).collect();
    if spec.mode == SplitMode::PairLevelRandom {
        order.shuffle(&mut seed::rng(spec.seed));
    }
    let pick = |idx: &[usize]| idx.iter().map(|&k| elements[k].clone()).collect::<Vec<_>>();
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

/// Splits items into train and test datasets.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if ds.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    let positions: Vec<usize> = (0..ds.len()).collect();
    let (train, test) = partition(&positions, spec)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Splits a pair list into train and test pairs.
pub fn split_pairs(pairs: &[PairExample], spec: &SplitSpec) -> Result<(Vec<PairExample>, Vec<PairExample>)> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("pair list"));
    }
    partition(pairs, spec)
}
