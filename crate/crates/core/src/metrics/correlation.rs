use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::PairExample;
use crate::error::{Error, Result};
use crate::label::Label;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse: f64,
    pub mae: f64,
    pub pearson: f64,
    pub spearman: f64,
    pub n: usize,
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("metric input"));
    }
    Ok(())
}

pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred, target)?;
    Ok(pred.iter().zip(target).map(|(p, t)| (t - p).powi(2)).sum::<f64>() / pred.len() as f64)
}

pub fn mae(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred, target)?;
    Ok(pred.iter().zip(target).map(|(p, t)| (t - p).abs()).sum::<f64>() / pred.len() as f64)
}

/// Sample Pearson correlation. Constant input on either side is an error.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    if a.len() < 2 {
        return Err(Error::InsufficientItems(
            "correlation needs at least 2 observations".into(),
        ));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 {
        return Err(Error::UndefinedCorrelation("first"));
    }
    if sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("second"));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the average of their positions.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&x, &y| values[x].total_cmp(&values[y]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end (0-based) share rank mean(start+1 ..= end)
        let avg = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation of fractional ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    pearson(&fractional_ranks(a), &fractional_ranks(b))
}

/// All four regression metrics of `pred` against `target`.
pub fn metrics_report(pred: &[f64], target: &[f64]) -> Result<MetricsReport> {
    Ok(MetricsReport {
        mse: mse(pred, target)?,
        mae: mae(pred, target)?,
        pearson: pearson(target, pred)?,
        spearman: spearman(target, pred)?,
        n: pred.len(),
    })
}

/// Fraction of pairs whose score order matches the label. Exact score ties
/// count as wrong.
pub fn pairwise_accuracy(scores: &HashMap<String, f64>, pairs: &[PairExample]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("pair list"));
    }
    let lookup = |id: &str| {
        scores
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownItem(id.to_string()))
    };
    let mut correct = 0usize;
    for p in pairs {
        let (si, sj) = (lookup(&p.i)?, lookup(&p.j)?);
        if Label::from_order(si, sj) == Some(p.label) {
            correct += 1;
        }
    }
    Ok(correct as f64 / pairs.len() as f64)
}
