//! AdamW with decoupled weight decay.
//!
//! ```text
//! t += 1
//! m = b1 * m + (1 - b1) * g
//! v = b2 * v + (1 - b2) * g^2
//! theta -= lr * (m / (1 - b1^t) / (sqrt(v / (1 - b2^t)) + eps) + wd * theta)
//! ```

use serde::{Deserialize, Serialize};

use crate::embedcore::EncoderParams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "invalid optimizer settings {self:?}"
            )))
        }
    }
}

/// First and second moments mirroring [`EncoderParams`], plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub m: EncoderParams<T>,
    pub v: EncoderParams<T>,
    pub t: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(params: &EncoderParams<T>) -> Self {
        Self {
            m: EncoderParams::zeros(params.shape()),
            v: EncoderParams::zeros(params.shape()),
            t: 0,
        }
    }
}

/// Updates one flat block. `t` is the already-incremented step count.
pub fn adamw_update_slice<T: Scalar>(
    theta: &mut [T],
    grad: &[T],
    m: &mut [T],
    v: &mut [T],
    t: u64,
    cfg: &AdamWConfig,
) {
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let bc1 = T::one() - b1.powi(t as i32);
    let bc2 = T::one() - b2.powi(t as i32);
    let (lr, eps, wd) = (T::of(cfg.lr), T::of(cfg.eps), T::of(cfg.weight_decay));
    for i in 0..theta.len() {
        let g = grad[i];
        m[i] = b1 * m[i] + (T::one() - b1) * g;
        v[i] = b2 * v[i] + (T::one() - b2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        theta[i] -= lr * (m_hat / (v_hat.sqrt() + eps) + wd * theta[i]);
    }
}

/// One AdamW step over every trainable block, then the temperature clamp.
pub fn adamw_step<T: Scalar>(
    params: &mut EncoderParams<T>,
    grads: &EncoderParams<T>,
    state: &mut OptimizerState<T>,
    cfg: &AdamWConfig,
) -> Result<()> {
    if grads.shape() != params.shape()
        || state.m.shape() != params.shape()
        || state.v.shape() != params.shape()
    {
        return Err(Error::ShapeMismatch(format!(
            "optimizer shapes differ: params {:?}, grads {:?}, state {:?}",
            params.shape(),
            grads.shape(),
            state.m.shape()
        )));
    }
    state.t += 1;
    let t = state.t;
    let blocks = params.trainable_mut();
    let grad_blocks = grads.trainable();
    let m_blocks = state.m.trainable_mut();
    let v_blocks = state.v.trainable_mut();
    for (((theta, g), m), v) in blocks
        .into_iter()
        .zip(grad_blocks)
        .zip(m_blocks)
        .zip(v_blocks)
    {
        adamw_update_slice(theta.1, g.1, m.1, v.1, t, cfg);
    }
    params.clamp_temperature();
    Ok(())
}
