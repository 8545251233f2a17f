use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::scorer::Gradients;

/// Cosine decay from `lr_max` at `t = 0` to `lr_min` at `t = total`.
pub fn cosine_lr(t: usize, total: usize, lr_max: f64, lr_min: f64) -> f64 {
    if total == 0 {
        return lr_max;
    }
    let progress = t.min(total) as f64 / total as f64;
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (PI * progress).cos())
}

/// Adam moments for a list of parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimizerState {
    pub fn new(block_lens: impl IntoIterator<Item = usize>) -> Self {
        let zeros: Vec<Vec<f64>> = block_lens.into_iter().map(|n| vec![0.0; n]).collect();
        OptimizerState {
            second_moment: zeros.clone(),
            first_moment: zeros,
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. `l2` is applied as decoupled decay,
/// `p <- p * (1 - lr * l2)`, before the Adam delta.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &Gradients,
    state: &mut OptimizerState,
    lr: f64,
    l2: f64,
) -> Result<()> {
    if params.len() != grads.blocks.len() || params.len() != state.first_moment.len() {
        return Err(Error::LengthMismatch {
            left: params.len(),
            right: grads.blocks.len(),
        });
    }
    for ((p, g), m) in params.iter().zip(&grads.blocks).zip(&state.first_moment) {
        if p.len() != g.len() || p.len() != m.len() {
            return Err(Error::LengthMismatch {
                left: p.len(),
                right: g.len(),
            });
        }
    }
    state.step += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    let decay = 1.0 - lr * l2;
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(&grads.blocks)
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        for k in 0..p.len() {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            p[k] = p[k] * decay - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
