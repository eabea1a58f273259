use serde::{Deserialize, Serialize};

use super::OptimizerState;
use crate::error::{check_dim, Error, Result};
use crate::vecops::all_finite;

/// Heavy-ball SGD with decoupled weight decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdMomentumConfig {
    pub lr: f64,
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.01 }
    }
}

/// AdamW state: `base.v` holds the first moment, `second_moment` the second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamWState {
    pub base: OptimizerState,
    pub second_moment: Vec<f64>,
}

impl AdamWState {
    pub fn new(x0: Vec<f64>) -> Result<Self> {
        let n = x0.len();
        Ok(Self {
            base: OptimizerState::from_parts(x0, vec![0.0; n], 1.0)?,
            second_moment: vec![0.0; n],
        })
    }
}

/// `buf' = momentum·buf + grad`, `x' = (1 − lr·wd)·x − lr·buf'`, with the
/// buffer stored in `state.v`.
pub fn sgd_momentum_step(
    state: &OptimizerState,
    grad: &[f64],
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) -> Result<OptimizerState> {
    check_dim(state.dim(), grad.len())?;
    if !all_finite(grad) {
        return Err(Error::NonFinite("gradient"));
    }
    let mut next = state.clone();
    let decay = 1.0 - lr * weight_decay;
    for ((x, b), g) in next.x.iter_mut().zip(next.v.iter_mut()).zip(grad) {
        *b = momentum * *b + g;
        *x = decay * *x - lr * *b;
    }
    next.step_count += 1;
    Ok(next)
}

/// AdamW with bias correction and decoupled weight decay.
pub fn adamw_step(state: &AdamWState, grad: &[f64], cfg: &AdamWConfig) -> Result<AdamWState> {
    let n = state.base.dim();
    check_dim(n, grad.len())?;
    check_dim(n, state.second_moment.len())?;
    if !all_finite(grad) {
        return Err(Error::NonFinite("gradient"));
    }
    let mut next = state.clone();
    let t = (state.base.step_count + 1) as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let decay = 1.0 - cfg.lr * cfg.weight_decay;
    for (i, &g) in grad.iter().enumerate().take(n) {
        let m = cfg.beta1 * next.base.v[i] + (1.0 - cfg.beta1) * g;
        let s = cfg.beta2 * next.second_moment[i] + (1.0 - cfg.beta2) * g * g;
        next.base.v[i] = m;
        next.second_moment[i] = s;
        let update = (m / c1) / ((s / c2).sqrt() + cfg.eps);
        next.base.x[i] = decay * next.base.x[i] - cfg.lr * update;
    }
    next.base.step_count += 1;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_reduces_to_gradient_descent() {
        let s = OptimizerState::from_parts(vec![1.0, -2.0], vec![0.0, 0.0], 1.0).unwrap();
        let next = sgd_momentum_step(&s, &[0.5, 3.0], 0.1, 0.0, 0.0).unwrap();
        assert_eq!(next.x, vec![1.0 - 0.05, -2.0 - 0.3]);
    }

    #[test]
    fn sgd_zero_lr_keeps_x() {
        let s = OptimizerState::from_parts(vec![1.0, -2.0], vec![0.3, 0.1], 1.0).unwrap();
        let next = sgd_momentum_step(&s, &[0.5, 3.0], 0.0, 0.9, 0.1).unwrap();
        assert_eq!(next.x, s.x);
    }

    #[test]
    fn sgd_momentum_arithmetic() {
        let s = OptimizerState::from_parts(vec![2.0], vec![1.0], 1.0).unwrap();
        let next = sgd_momentum_step(&s, &[1.0], 0.1, 0.9, 0.0).unwrap();
        assert!((next.v[0] - 1.9).abs() < 1e-15);
        assert!((next.x[0] - (2.0 - 0.19)).abs() < 1e-15);
    }

    #[test]
    fn sgd_rejects_bad_gradients() {
        let s = OptimizerState::from_parts(vec![2.0], vec![1.0], 1.0).unwrap();
        assert!(matches!(
            sgd_momentum_step(&s, &[1.0, 2.0], 0.1, 0.9, 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            sgd_momentum_step(&s, &[f64::INFINITY], 0.1, 0.9, 0.0),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn adamw_zero_gradient_keeps_x() {
        let cfg = AdamWConfig { weight_decay: 0.0, ..AdamWConfig::default() };
        let mut s = AdamWState::new(vec![1.5, -0.5]).unwrap();
        for _ in 0..10 {
            s = adamw_step(&s, &[0.0, 0.0], &cfg).unwrap();
        }
        assert_eq!(s.base.x, vec![1.5, -0.5]);
    }

    #[test]
    fn adamw_first_step_is_signed_lr() {
        let cfg = AdamWConfig { lr: 0.1, weight_decay: 0.0, ..AdamWConfig::default() };
        for g in [-3.0, 1e-3, 42.0] {
            let s = AdamWState::new(vec![0.0]).unwrap();
            let next = adamw_step(&s, &[g], &cfg).unwrap();
            assert!((next.base.x[0] + 0.1 * f64::signum(g)).abs() < 1e-6, "g={g}");
        }
    }

    #[test]
    fn adamw_constant_gradient_replay() {
        let cfg = AdamWConfig { lr: 0.1, ..AdamWConfig::default() };
        let mut s = AdamWState::new(vec![1.0]).unwrap();
        // Scalar replay of the same recursion.
        let (mut x, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        let mut prev = x;
        for t in 1..=2 {
            s = adamw_step(&s, &[1.0], &cfg).unwrap();
            m = 0.9 * m + 0.1;
            v = 0.999 * v + 0.001;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x = x * (1.0 - 0.1 * 0.01) - 0.1 * mh / (vh.sqrt() + 1e-8);
            assert!((s.base.x[0] - x).abs() < 1e-14);
            assert!(s.base.x[0] < prev);
            prev = s.base.x[0];
        }
    }
}
