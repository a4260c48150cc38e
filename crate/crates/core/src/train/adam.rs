//! Adam with bias correction.

use crate::scalar::Scalar;
use crate::tensor::Mat;

use super::params::{ModelDims, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

/// One Adam update of a flat slice. `step` is the 1-based step count.
pub fn adam_update<T: Scalar>(cfg: &AdamConfig, step: u64, theta: &mut [T], grad: &[T], m: &mut [T], v: &mut [T]) {
    let b1 = T::of(cfg.beta1);
    let b2 = T::of(cfg.beta2);
    let one = T::one();
    let c1 = T::of(1.0 - cfg.beta1.powf(step as f64));
    let c2 = T::of(1.0 - cfg.beta2.powf(step as f64));
    let lr = T::of(cfg.lr);
    let eps = T::of(cfg.eps);
    for i in 0..theta.len() {
        let g = grad[i];
        m[i] = b1 * m[i] + (one - b1) * g;
        v[i] = b2 * v[i] + (one - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Moments for every parameter tensor plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    m: ModelParams<T>,
    v: ModelParams<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(dims: &ModelDims, config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: ModelParams::zeros(dims),
            v: ModelParams::zeros(dims),
        }
    }

    /// Applies one update. The padding row of the item table stays at zero
    /// because its gradient is always zero.
    pub fn step(&mut self, params: &mut ModelParams<T>, grads: &ModelParams<T>) {
        self.step += 1;
        let grads = grads.tensors();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for ((((name, p), (_, g)), (_, m)), (_, v)) in params.tensors_mut().into_iter().zip(grads).zip(ms).zip(vs) {
            debug_assert_eq!(p.shape(), g.shape(), "{name}");
            update_mat(&self.config, self.step, p, g, m, v);
        }
    }
}

fn update_mat<T: Scalar>(cfg: &AdamConfig, step: u64, p: &mut Mat<T>, g: &Mat<T>, m: &mut Mat<T>, v: &mut Mat<T>) {
    adam_update(cfg, step, p.as_mut_slice(), g.as_slice(), m.as_mut_slice(), v.as_mut_slice());
}
