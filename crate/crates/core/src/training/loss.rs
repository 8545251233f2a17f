use crate::error::{Error, Result};
use crate::label::Label;

/// Margin hinge on a score difference: `max(0, m - O * C)`.
///
/// Returns the loss and its derivative with respect to `C`; the derivative
/// is taken as 0 at the kink. A NaN score difference yields a NaN loss.
pub fn hinge_loss(label: Label, c: f64, margin: f64) -> (f64, f64) {
    let o = label.as_f64();
    let slack = margin - o * c;
    if slack.is_nan() {
        (f64::NAN, f64::NAN)
    } else if slack > 0.0 {
        (slack, -o)
    } else {
        (0.0, 0.0)
    }
}

/// Mean absolute error plus `lambda_rank` times the mean, over in-batch
/// ordered pairs `(a, b)` with `target_a > target_b`, of
/// `max(0, pred_b - pred_a)`.
///
/// Returns the loss and its gradient with respect to `pred`.
pub fn ranking_penalized_mae(pred: &[f64], target: &[f64], lambda_rank: f64) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("predictions"));
    }
    let n = pred.len() as f64;
    let mut grad = vec![0.0; pred.len()];
    let mut mae = 0.0;
    for (k, (&p, &t)) in pred.iter().zip(target).enumerate() {
        let r = p - t;
        mae += r.abs();
        grad[k] = if r > 0.0 {
            1.0 / n
        } else if r < 0.0 {
            -1.0 / n
        } else {
            0.0
        };
    }
    mae /= n;

    if lambda_rank == 0.0 {
        return Ok((mae, grad));
    }
    let mut ordered_pairs = 0usize;
    let mut violation = 0.0;
    let mut offenders: Vec<(usize, usize)> = Vec::new();
    for a in 0..pred.len() {
        for b in 0..pred.len() {
            if target[a] > target[b] {
                ordered_pairs += 1;
                let gap = pred[b] - pred[a];
                if gap > 0.0 {
                    violation += gap;
                    offenders.push((a, b));
                }
            }
        }
    }
    if ordered_pairs == 0 {
        return Ok((mae, grad));
    }
    let w = lambda_rank / ordered_pairs as f64;
    for (a, b) in offenders {
        grad[a] -= w;
        grad[b] += w;
    }
    Ok((mae + w * violation, grad))
}
