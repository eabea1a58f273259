use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{GradientOracle, OptimizerState};
use crate::error::{check_dim, Error, Result};
use crate::vecops::{all_finite, norm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NagFiConfig {
    pub alpha: f64,
    pub mu: f64,
    pub gamma0: f64,
    #[serde(default)]
    pub sigma: f64,
    /// Newton stops once `‖g(u)‖ ≤ newton_tol · (1 + ‖anchor‖ + ‖u‖)`,
    /// i.e. relative to the size of the terms being cancelled.
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_max_iter")]
    pub newton_max_iter: usize,
}

fn default_newton_tol() -> f64 {
    1e-12
}

fn default_newton_max_iter() -> usize {
    50
}

impl NagFiConfig {
    pub fn new(alpha: f64, mu: f64, gamma0: f64) -> Result<Self> {
        let cfg = Self {
            alpha,
            mu,
            gamma0,
            sigma: 0.0,
            newton_tol: default_newton_tol(),
            newton_max_iter: default_newton_max_iter(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        self.sigma = sigma;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return Err(Error::InvalidConfig(format!("gamma0 must be positive, got {}", self.gamma0)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        if self.newton_tol.is_nan() || self.newton_tol <= 0.0 {
            return Err(Error::InvalidConfig("newton_tol must be positive".into()));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::InvalidConfig("newton_max_iter must be positive".into()));
        }
        if !self.mu.is_finite() {
            return Err(Error::InvalidConfig("mu must be finite".into()));
        }
        Ok(())
    }
}

/// Outcome of the inner Newton-Raphson solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonStats {
    /// Number of Newton updates applied.
    pub iterations: usize,
    /// `‖g(u)‖` at the returned root.
    pub residual: f64,
}

/// One NAG-FI step; see [`nag_fi_step_with_stats`].
pub fn nag_fi_step(
    state: &OptimizerState,
    oracle: &dyn GradientOracle,
    cfg: &NagFiConfig,
    noise: Option<&[f64]>,
) -> Result<OptimizerState> {
    nag_fi_step_with_stats(state, oracle, cfg, noise).map(|(s, _)| s)
}

/// Fully implicit step. With `γ' = (γ + αμ)/(1 + α)` and `τ = 1/α + μ/γ'`,
/// `x'` is the root of
///
/// ```text
/// g(u) = u − (v + τ x − (α/γ') ∇f(u) + σ √α η) / (1 + τ)
/// ```
///
/// found by Newton-Raphson from `u₀ = x` with Jacobian
/// `I + α/(γ'(1 + τ)) ∇²f(u)`, assembled column by column from
/// Hessian-vector products. Steps that do not reduce `‖g‖` are halved.
/// Then `v' = (x' − x)/α + x'`.
pub fn nag_fi_step_with_stats(
    state: &OptimizerState,
    oracle: &dyn GradientOracle,
    cfg: &NagFiConfig,
    noise: Option<&[f64]>,
) -> Result<(OptimizerState, NewtonStats)> {
    let n = state.dim();
    check_dim(oracle.dim(), n)?;
    if let Some(eta) = noise {
        check_dim(n, eta.len())?;
    }
    let alpha = cfg.alpha;
    let gamma_next = (state.gamma + alpha * cfg.mu) / (1.0 + alpha);
    if gamma_next.is_nan() || gamma_next <= 0.0 {
        return Err(Error::InvalidConfig(format!("gamma left the positive range: {gamma_next}")));
    }
    let tau = 1.0 / alpha + cfg.mu / gamma_next;
    if tau.is_nan() || 1.0 + tau <= 0.0 {
        return Err(Error::InvalidConfig(format!("1 + tau must be positive, got {}", 1.0 + tau)));
    }
    let noise_scale = cfg.sigma * alpha.sqrt();
    let anchor: Vec<f64> = (0..n)
        .map(|i| {
            let eta = noise.map_or(0.0, |e| e[i]);
            (state.v[i] + tau * state.x[i] + noise_scale * eta) / (1.0 + tau)
        })
        .collect();
    let c = alpha / (gamma_next * (1.0 + tau));

    let mut u = state.x.clone();
    let mut grad = vec![0.0; n];
    let mut g = vec![0.0; n];
    let residual_at = |u: &[f64], grad: &mut [f64], g: &mut [f64]| -> Result<f64> {
        oracle.grad(u, grad);
        if !all_finite(grad) {
            return Err(Error::NonFinite("gradient"));
        }
        for i in 0..n {
            g[i] = u[i] - anchor[i] + c * grad[i];
        }
        Ok(norm(g))
    };

    let mut residual = residual_at(&u, &mut grad, &mut g)?;
    let anchor_norm = norm(&anchor);
    let tolerance = |u: &[f64]| cfg.newton_tol * (1.0 + anchor_norm + norm(u));
    let mut iterations = 0;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    while residual > tolerance(&u) {
        if iterations == cfg.newton_max_iter {
            return Err(Error::NewtonNonConvergence { iterations, residual });
        }
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            oracle.hessian_apply(&u, &e, &mut col)?;
            for i in 0..n {
                jac[(i, j)] = c * col[i] + if i == j { 1.0 } else { 0.0 };
            }
        }
        let rhs = DVector::from_column_slice(&g);
        let step = jac.clone().lu().solve(&rhs).ok_or(Error::SingularJacobian)?;
        let base = u.clone();
        let mut t = 1.0;
        loop {
            for i in 0..n {
                u[i] = base[i] - t * step[i];
            }
            let trial = residual_at(&u, &mut grad, &mut g)?;
            if trial < residual || t < 1e-10 {
                residual = trial;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
    }

    let v_next: Vec<f64> = (0..n).map(|i| (u[i] - state.x[i]) / alpha + u[i]).collect();
    let next = OptimizerState {
        x: u,
        v: v_next,
        gamma: gamma_next,
        step_count: state.step_count + 1,
    };
    Ok((next, NewtonStats { iterations, residual }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::FnOracle;

    fn half_square(n: usize) -> impl GradientOracle {
        FnOracle::with_hessian(
            n,
            |x: &[f64], g: &mut [f64]| g.copy_from_slice(x),
            |_x: &[f64], d: &[f64], o: &mut [f64]| o.copy_from_slice(d),
        )
    }

    /// Bisection on the scalar fixed-point residual, independent of Newton.
    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        assert!(f(lo) * f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn scalar_example_against_bisection() {
        // γ0 = 1, μ = 1, α = 1 → γ' = 1, τ = 2.
        let cfg = NagFiConfig::new(1.0, 1.0, 1.0).unwrap();
        let s = OptimizerState::new(vec![1.0], 1.0).unwrap();
        let (next, stats) = nag_fi_step_with_stats(&s, &half_square(1), &cfg, None).unwrap();
        let root = bisect(|u| u - (1.0 + 2.0 * 1.0 - u) / 3.0, -10.0, 10.0);
        assert!((root - 0.75).abs() < 1e-12);
        assert!((next.x[0] - root).abs() < 1e-12);
        assert!((next.v[0] - 0.5).abs() < 1e-12);
        assert_eq!(next.gamma, 1.0);
        assert_eq!(stats.iterations, 1);
    }

    #[test]
    fn quadratic_needs_one_newton_update() {
        let a = [2.0, 0.5, 7.0];
        let oracle = FnOracle::with_hessian(
            3,
            move |x: &[f64], g: &mut [f64]| {
                for i in 0..3 {
                    g[i] = a[i] * (x[i] - 1.0);
                }
            },
            move |_x: &[f64], d: &[f64], o: &mut [f64]| {
                for i in 0..3 {
                    o[i] = a[i] * d[i];
                }
            },
        );
        let cfg = NagFiConfig::new(3.0, 0.5, 2.0).unwrap().with_sigma(0.3).unwrap();
        let s = OptimizerState::from_parts(vec![4.0, -2.0, 0.1], vec![1.0, 9.0, -3.0], 2.0).unwrap();
        let (_, stats) =
            nag_fi_step_with_stats(&s, &oracle, &cfg, Some(&[0.2, -1.0, 0.5])).unwrap();
        assert_eq!(stats.iterations, 1);
        assert!(stats.residual < 1e-10);
    }

    #[test]
    fn stationary_point_is_fixed() {
        let cfg = NagFiConfig::new(2.0, 1.0, 1.0).unwrap();
        let s = OptimizerState::new(vec![0.0, 0.0], 1.0).unwrap();
        let (next, stats) = nag_fi_step_with_stats(&s, &half_square(2), &cfg, None).unwrap();
        assert_eq!(stats.iterations, 0);
        assert_eq!(next.x, vec![0.0, 0.0]);
        assert_eq!(next.v, vec![0.0, 0.0]);
    }

    #[test]
    fn nonlinear_root_satisfies_fixed_point() {
        // f(x) = log cosh x, ∇f = tanh x, ∇²f = sech² x
        let oracle = FnOracle::with_hessian(
            1,
            |x: &[f64], g: &mut [f64]| g[0] = x[0].tanh(),
            |x: &[f64], d: &[f64], o: &mut [f64]| o[0] = d[0] / x[0].cosh().powi(2),
        );
        let cfg = NagFiConfig::new(5.0, 0.2, 1.0).unwrap();
        let s = OptimizerState::from_parts(vec![2.0], vec![-1.0], 1.0).unwrap();
        let (next, stats) = nag_fi_step_with_stats(&s, &oracle, &cfg, None).unwrap();
        let gp = (1.0 + 5.0 * 0.2) / 6.0;
        let tau = 1.0 / 5.0 + 0.2 / gp;
        let root = bisect(
            |u| u - (-1.0 + tau * 2.0 - 5.0 / gp * u.tanh()) / (1.0 + tau),
            -10.0,
            10.0,
        );
        assert!((next.x[0] - root).abs() < 1e-10);
        assert!(stats.iterations >= 2);
    }

    #[test]
    fn reports_missing_hessian_and_non_convergence() {
        let no_hessian = FnOracle::new(1, |x: &[f64], g: &mut [f64]| g[0] = x[0]);
        let cfg = NagFiConfig::new(1.0, 1.0, 1.0).unwrap();
        let s = OptimizerState::new(vec![1.0], 1.0).unwrap();
        assert!(matches!(nag_fi_step(&s, &no_hessian, &cfg, None), Err(Error::MissingHessian)));

        // Newton on a gradient whose Hessian is reported wrongly stalls.
        let wrong = FnOracle::with_hessian(
            1,
            |x: &[f64], g: &mut [f64]| g[0] = x[0].powi(3),
            |_x: &[f64], d: &[f64], o: &mut [f64]| o[0] = 1e-3 * d[0],
        );
        let cfg = NagFiConfig { newton_max_iter: 3, ..NagFiConfig::new(10.0, 0.0, 1.0).unwrap() };
        let s = OptimizerState::new(vec![3.0], 1.0).unwrap();
        match nag_fi_step(&s, &wrong, &cfg, None) {
            Err(Error::NewtonNonConvergence { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-10);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
