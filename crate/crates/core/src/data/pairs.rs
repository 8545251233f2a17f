use std::collections::HashSet;

use super::{Dataset, PairExample, PairSamplingConfig};
use crate::error::{Error, Result};
use crate::label::Label;
use crate::seed;

/// `sgn(y_i - y_j)`; ties yield no label.
pub fn label_pair(y_i: f64, y_j: f64) -> Option<Label> {
    Label::from_order(y_i, y_j)
}

fn make_pair(ds: &Dataset, a: usize, b: usize) -> Option<PairExample> {
    let (x, y) = (&ds.items()[a], &ds.items()[b]);
    label_pair(x.mean_rating, y.mean_rating).map(|label| PairExample {
        i: x.item_id.clone(),
        j: y.item_id.clone(),
        label,
        same_image: x.image_id == y.image_id,
    })
}

/// Compares every item against `n_opponents` others drawn uniformly without
/// replacement. Tied pairs are dropped; with `dedupe` each unordered pair is
/// kept once, in the orientation it was first drawn.
pub fn generate_pairs_limited(ds: &Dataset, cfg: &PairSamplingConfig) -> Result<Vec<PairExample>> {
    let n = ds.len();
    if n < 2 {
        return Err(Error::InsufficientItems(format!(
            "pair sampling needs at least 2 items, dataset has {n}"
        )));
    }
    if cfg.n_opponents == 0 {
        return Err(Error::InvalidConfig("n_opponents must be at least 1".into()));
    }
    if cfg.n_opponents >= n {
        return Err(Error::InsufficientItems(format!(
            "cannot draw {} distinct opponents from {} other items",
            cfg.n_opponents,
            n - 1
        )));
    }
    let mut rng = seed::rng(cfg.seed);
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut out = Vec::with_capacity(n * cfg.n_opponents);
    for a in 0..n {
        for k in rand::seq::index::sample(&mut rng, n - 1, cfg.n_opponents) {
            let b = if k < a { k } else { k + 1 };
            if cfg.dedupe && !seen.insert((a.min(b), a.max(b))) {
                continue;
            }
            if let Some(p) = make_pair(ds, a, b) {
                out.push(p);
            }
        }
    }
    Ok(out)
}

/// All tie-free pairs of captions that share an image, in dataset order.
pub fn generate_same_image_pairs(ds: &Dataset) -> Vec<PairExample> {
    let mut out = Vec::new();
    for group in ds.image_groups().values() {
        for (k, &a) in group.iter().enumerate() {
            for &b in &group[k + 1..] {
                out.extend(make_pair(ds, a, b));
            }
        }
    }
    out
}
