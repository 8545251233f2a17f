#![allow(dead_code)]

//! Analytic gradients of both objectives against central finite differences.
//! The network forward pass and both losses are recomputed here from their
//! definitions; only the frozen dropout masks are taken from the library.
//! Shared by the core gradient test and the acceptance suite.

use capcomp_core::scorer::{ForwardMode, Layer, ScorerModel};
use capcomp_core::training::{pairwise_objective, regression_objective};
use capcomp_core::Label;
use ndarray::{concatenate, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-4;
// Central differences at this step carry ~1e-10 of rounding noise, so
// gradients smaller than the floor are effectively compared in absolute terms.
pub const FLOOR: f64 = 1e-5;
pub const CONFIGS: u64 = 120;

// Finite differences only approximate the derivative where the function is
// smooth on the scale of H. Draws that put a ReLU input, a loss kink or a
// batch-norm standard deviation within these distances of degeneracy are
// redrawn; the test reports how many.
pub const MIN_KINK_GAP: f64 = 1e-3;
pub const MIN_BATCH_STD: f64 = 5e-2;

pub struct Outcome {
    pub worst: f64,
    pub checked: u64,
    pub redrawn: u64,
}

struct Config {
    model: ScorerModel,
    input_dim: usize,
    dropout_seed: u64,
}

struct Trace {
    scores: Vec<f64>,
    min_relu_gap: f64,
    min_batch_std: f64,
}

fn random_config(rng: &mut ChaCha8Rng) -> Config {
    let input_dim = rng.random_range(1..=8);
    let depth = rng.random_range(1..=3);
    let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=8)).collect();
    // Dropout is frozen by reusing one mask seed for every evaluation.
    let dropout = if rng.random_bool(0.5) { 0.0 } else { 0.25 };
    let mut model = ScorerModel::build(input_dim, &hidden, dropout, rng.random()).unwrap();
    for block in model.trainable_mut() {
        for v in block.iter_mut() {
            *v += rng.random_range(-0.2..0.2);
        }
    }
    Config {
        model,
        input_dim,
        dropout_seed: rng.random(),
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-2.0..2.0))
}

fn frozen_masks(model: &ScorerModel, x: &Array2<f64>, dropout_seed: u64) -> Vec<Option<Array2<f64>>> {
    let mut m = model.clone();
    let (_, cache) = m.forward(x.view(), ForwardMode::Train { dropout_seed }).unwrap();
    cache
        .dropout_scales()
        .into_iter()
        .map(|s| s.map(|v| v.to_owned()))
        .collect()
}

/// Train-mode forward pass with batch statistics and the given masks.
fn oracle_forward(model: &ScorerModel, x: &Array2<f64>, masks: &[Option<Array2<f64>>]) -> Trace {
    let rows = x.nrows();
    let mut a: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut masks = masks.iter();
    let (mut min_relu_gap, mut min_batch_std) = (f64::INFINITY, f64::INFINITY);
    for layer in model.layers() {
        match layer {
            Layer::Dense(d) => {
                let (fan_in, fan_out) = d.weight.dim();
                a = a
                    .iter()
                    .map(|row| {
                        (0..fan_out)
                            .map(|o| d.bias[o] + (0..fan_in).map(|i| row[i] * d.weight[[i, o]]).sum::<f64>())
                            .collect()
                    })
                    .collect();
            }
            Layer::BatchNorm(bn) => {
                for c in 0..a[0].len() {
                    let mean = a.iter().map(|r| r[c]).sum::<f64>() / rows as f64;
                    let var = a.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / rows as f64;
                    min_batch_std = min_batch_std.min(var.sqrt());
                    let denom = (var + bn.epsilon).sqrt();
                    for r in a.iter_mut() {
                        r[c] = bn.gamma[c] * (r[c] - mean) / denom + bn.beta[c];
                    }
                }
            }
            Layer::Relu => {
                for v in a.iter_mut().flatten() {
                    min_relu_gap = min_relu_gap.min(v.abs());
                    *v = v.max(0.0);
                }
            }
            Layer::Dropout { .. } => {
                if let Some(scale) = masks.next().expect("one mask per dropout layer") {
                    for (r, row) in a.iter_mut().enumerate() {
                        for (c, v) in row.iter_mut().enumerate() {
                            *v *= scale[[r, c]];
                        }
                    }
                }
            }
        }
    }
    Trace {
        scores: a.into_iter().map(|r| r[0]).collect(),
        min_relu_gap,
        min_batch_std,
    }
}

/// Loss and its smallest distance to a kink.
fn oracle_regression_loss(pred: &[f64], target: &[f64], lambda: f64) -> (f64, f64) {
    let n = pred.len() as f64;
    let mut gap = f64::INFINITY;
    let mae = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            gap = gap.min((p - t).abs());
            (p - t).abs()
        })
        .sum::<f64>()
        / n;
    let mut count = 0.0;
    let mut total = 0.0;
    for a in 0..pred.len() {
        for b in 0..pred.len() {
            if target[a] > target[b] {
                count += 1.0;
                total += (pred[b] - pred[a]).max(0.0);
                if lambda > 0.0 {
                    gap = gap.min((pred[b] - pred[a]).abs());
                }
            }
        }
    }
    let loss = if count > 0.0 { mae + lambda * total / count } else { mae };
    (loss, gap)
}

fn oracle_pair_loss(scores: &[f64], labels: &[Label], margin: f64) -> (f64, f64) {
    let b = labels.len();
    let mut gap = f64::INFINITY;
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let slack = margin - l.as_f64() * (scores[k] - scores[b + k]);
            gap = gap.min(slack.abs());
            slack.max(0.0)
        })
        .sum();
    (total / b as f64, gap)
}

fn well_conditioned(trace: &Trace, loss_gap: f64) -> bool {
    trace.min_relu_gap >= MIN_KINK_GAP && loss_gap >= MIN_KINK_GAP && trace.min_batch_std >= MIN_BATCH_STD
}

fn assert_forward_matches(model: &ScorerModel, x: &Array2<f64>, dropout_seed: u64, trace: &Trace) {
    let mut m = model.clone();
    let (lib, _) = m.forward(x.view(), ForwardMode::Train { dropout_seed }).unwrap();
    for (a, b) in lib.iter().zip(&trace.scores) {
        assert!(
            (a - b).abs() <= 1e-12 * (1.0 + b.abs()),
            "forward pass {a} vs oracle {b}"
        );
    }
}

/// Worst relative error between `analytic` and the central difference of
/// `loss` over every trainable scalar.
fn worst_error(model: &ScorerModel, analytic: &[Vec<f64>], loss: impl Fn(&ScorerModel) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (b, block) in analytic.iter().enumerate() {
        for (k, &g) in block.iter().enumerate() {
            let shifted = |delta: f64| {
                let mut m = model.clone();
                m.trainable_mut()[b][k] += delta;
                loss(&m)
            };
            let numeric = (shifted(H) - shifted(-H)) / (2.0 * H);
            let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(FLOOR);
            if rel
                > std::env::var("GC_DEBUG")
                    .ok()
                    .and_then(|v| v.parse().ok())
                    .unwrap_or(f64::INFINITY)
            {
                eprintln!(
                    "block {b} idx {k}: analytic {g:e} numeric {numeric:e} specs {:?}",
                    model.specs()
                );
            }
            worst = worst.max(rel);
        }
    }
    worst
}

/// Regression objective over `configs` accepted random networks drawn from
/// `seed`.
pub fn regression_check(seed: u64, configs: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Outcome {
        worst: 0.0,
        checked: 0,
        redrawn: 0,
    };
    while out.checked < configs {
        let rows = rng.random_range(2..=4);
        let cfg = random_config(&mut rng);
        let x = random_matrix(&mut rng, rows, cfg.input_dim);
        let y: Vec<f64> = (0..rows).map(|_| rng.random_range(0.0..1.0)).collect();
        let lambda = rng.random_range(0.0..1.0);

        let masks = frozen_masks(&cfg.model, &x, cfg.dropout_seed);
        let trace = oracle_forward(&cfg.model, &x, &masks);
        assert_forward_matches(&cfg.model, &x, cfg.dropout_seed, &trace);
        let (base, gap) = oracle_regression_loss(&trace.scores, &y, lambda);
        if !well_conditioned(&trace, gap) {
            out.redrawn += 1;
            continue;
        }

        let mut m = cfg.model.clone();
        let (loss, grads) = regression_objective(&mut m, x.view(), &y, lambda, cfg.dropout_seed).unwrap();
        assert!((loss - base).abs() < 1e-12, "loss {loss} vs oracle {base}");
        let oracle = |m: &ScorerModel| oracle_regression_loss(&oracle_forward(m, &x, &masks).scores, &y, lambda).0;
        out.worst = out.worst.max(worst_error(&cfg.model, &grads.blocks, oracle));
        out.checked += 1;
    }
    out
}

pub fn pairwise_check(seed: u64, configs: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Outcome {
        worst: 0.0,
        checked: 0,
        redrawn: 0,
    };
    while out.checked < configs {
        let pairs = rng.random_range(1..=4);
        let cfg = random_config(&mut rng);
        let xi = random_matrix(&mut rng, pairs, cfg.input_dim);
        let xj = random_matrix(&mut rng, pairs, cfg.input_dim);
        let labels: Vec<Label> = (0..pairs)
            .map(|_| if rng.random_bool(0.5) { Label::Pos } else { Label::Neg })
            .collect();
        // A large margin keeps every pair inside the hinge's linear part.
        let margin = rng.random_range(0.5..2.0) + 10.0 * f64::from(rng.random_bool(0.3) as u8);

        let stacked = concatenate(Axis(0), &[xi.view(), xj.view()]).unwrap();
        let masks = frozen_masks(&cfg.model, &stacked, cfg.dropout_seed);
        let trace = oracle_forward(&cfg.model, &stacked, &masks);
        assert_forward_matches(&cfg.model, &stacked, cfg.dropout_seed, &trace);
        let (base, gap) = oracle_pair_loss(&trace.scores, &labels, margin);
        if !well_conditioned(&trace, gap) {
            out.redrawn += 1;
            continue;
        }

        let mut m = cfg.model.clone();
        let (loss, grads) =
            pairwise_objective(&mut m, xi.view(), xj.view(), &labels, margin, cfg.dropout_seed).unwrap();
        assert!((loss - base).abs() < 1e-12, "loss {loss} vs oracle {base}");
        let oracle = |m: &ScorerModel| oracle_pair_loss(&oracle_forward(m, &stacked, &masks).scores, &labels, margin).0;
        out.worst = out.worst.max(worst_error(&cfg.model, &grads.blocks, oracle));
        out.checked += 1;
    }
    out
}
