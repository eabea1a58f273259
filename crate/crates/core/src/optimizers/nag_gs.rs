use serde::{Deserialize, Serialize};

use super::OptimizerState;
use crate::error::{check_dim, Error, Result};
use crate::vecops::all_finite;

/// Step-size rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepSchedule {
    /// Use `NagGsConfig::alpha` at every step.
    #[default]
    Constant,
    /// Nesterov's rule `L α² = (1 − α) γ + α μ`, solved for `α ∈ (0, 1)`.
    Nesterov { lipschitz: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NagGsConfig {
    pub alpha: f64,
    pub mu: f64,
    pub gamma0: f64,
    /// Noise volatility; only read when a noise vector is supplied.
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "default_update_gamma")]
    pub update_gamma: bool,
    #[serde(default)]
    pub schedule: StepSchedule,
}

fn default_update_gamma() -> bool {
    true
}

impl NagGsConfig {
    /// Deterministic configuration with updatable `gamma`.
    pub fn new(alpha: f64, mu: f64, gamma0: f64) -> Result<Self> {
        let cfg = Self {
            alpha,
            mu,
            gamma0,
            sigma: 0.0,
            update_gamma: true,
            schedule: StepSchedule::Constant,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        self.sigma = sigma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_update_gamma(mut self, update: bool) -> Result<Self> {
        self.update_gamma = update;
        self.validate()?;
        Ok(self)
    }

    pub fn with_schedule(mut self, schedule: StepSchedule) -> Result<Self> {
        self.schedule = schedule;
        self.validate()?;
        Ok(self)
    }

    /// Negative `mu` is accepted as long as `alpha·mu + gamma` stays positive.
    /// With an updatable `gamma` that drifts towards a negative `mu` this
    /// eventually fails, so that combination is rejected outright.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "gamma0 must be positive, got {}",
                self.gamma0
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma must be non-negative, got {}",
                self.sigma
            )));
        }
        if !self.mu.is_finite() {
            return Err(Error::InvalidConfig("mu must be finite".into()));
        }
        if let StepSchedule::Nesterov { lipschitz } = self.schedule {
            if !(lipschitz > 0.0 && lipschitz.is_finite()) {
                return Err(Error::InvalidConfig("Nesterov schedule needs L > 0".into()));
            }
        }
        if self.alpha * self.mu + self.gamma0 <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "alpha*mu + gamma must be positive (alpha={}, mu={}, gamma={})",
                self.alpha, self.mu, self.gamma0
            )));
        }
        if self.update_gamma && self.mu < 0.0 {
            return Err(Error::InvalidConfig(
                "negative mu requires a fixed gamma (update_gamma = false)".into(),
            ));
        }
        Ok(())
    }

    /// Step size used from a state with scaling factor `gamma`.
    pub fn step_size(&self, gamma: f64) -> f64 {
        match self.schedule {
            StepSchedule::Constant => self.alpha,
            StepSchedule::Nesterov { lipschitz } => nesterov_alpha(gamma, self.mu, lipschitz),
        }
    }
}

/// Positive root of `L α² = (1 − α) γ + α μ`.
pub fn nesterov_alpha(gamma: f64, mu: f64, lipschitz: f64) -> f64 {
    let b = gamma - mu;
    (-b + (b * b + 4.0 * lipschitz * gamma).sqrt()) / (2.0 * lipschitz)
}

/// The point `x_{k+1} = (1 − a_k) x_k + a_k v_k` at which the caller must
/// evaluate the gradient before calling [`nag_gs_step`].
pub fn nag_gs_propose(state: &OptimizerState, cfg: &NagGsConfig) -> Vec<f64> {
    let alpha = cfg.step_size(state.gamma);
    let a = alpha / (alpha + 1.0);
    state
        .x
        .iter()
        .zip(&state.v)
        .map(|(x, v)| (1.0 - a) * x + a * v)
        .collect()
}

/// One NAG-GS step. `grad` must be `∇f` at [`nag_gs_propose`]`(state, cfg)`.
/// `noise`, when given, is a standard normal vector and switches on the SDE
/// term `σ √α η / (1 + αμ/γ')` in the `v` update.
pub fn nag_gs_step(
    state: &OptimizerState,
    grad: &[f64],
    cfg: &NagGsConfig,
    noise: Option<&[f64]>,
) -> Result<OptimizerState> {
    let mut next = state.clone();
    nag_gs_step_in_place(&mut next, grad, cfg, noise)?;
    Ok(next)
}

pub fn nag_gs_step_in_place(
    state: &mut OptimizerState,
    grad: &[f64],
    cfg: &NagGsConfig,
    noise: Option<&[f64]>,
) -> Result<()> {
    check_dim(state.dim(), grad.len())?;
    if let Some(eta) = noise {
        check_dim(state.dim(), eta.len())?;
    }
    if !all_finite(grad) {
        return Err(Error::NonFinite("gradient"));
    }
    let alpha = cfg.step_size(state.gamma);
    let a = alpha / (alpha + 1.0);
    let gamma_next = if cfg.update_gamma {
        (1.0 - a) * state.gamma + a * cfg.mu
    } else {
        state.gamma
    };
    let denom = alpha * cfg.mu + gamma_next;
    if !(gamma_next > 0.0 && denom > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha*mu + gamma left the positive range (gamma'={gamma_next}, alpha*mu+gamma'={denom})"
        )));
    }
    let b = alpha * cfg.mu / denom;
    // μ⁻¹·b_k written as α/(αμ + γ') so that μ = 0 is regular.
    let grad_scale = alpha / denom;
    let noise_scale = cfg.sigma * alpha.sqrt() * gamma_next / denom;

    for i in 0..state.x.len() {
        let x_new = (1.0 - a) * state.x[i] + a * state.v[i];
        let mut v_new = (1.0 - b) * state.v[i] + b * x_new - grad_scale * grad[i];
        if let Some(eta) = noise {
            v_new += noise_scale * eta[i];
        }
        state.x[i] = x_new;
        state.v[i] = v_new;
    }
    state.gamma = gamma_next;
    state.step_count += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scalar_step_matches_hand_arithmetic() {
        // a = 1/2, γ' = 1, x' = 1, b = 1/2, v' = 1/2·1 + 1/2·1 − 1·1/2·1.
        let cfg = NagGsConfig::new(1.0, 1.0, 1.0).unwrap();
        let s = OptimizerState::new(vec![1.0], 1.0).unwrap();
        let p = nag_gs_propose(&s, &cfg);
        assert_eq!(p, vec![1.0]);
        let next = nag_gs_step(&s, &[p[0]], &cfg, None).unwrap();
        assert_eq!(next.x, vec![1.0]);
        assert_eq!(next.v, vec![0.5]);
        assert_eq!(next.gamma, 1.0);
        assert_eq!(next.step_count, 1);
    }

    #[test]
    fn stationary_point_is_fixed() {
        let cfg = NagGsConfig::new(3.0, 0.7, 2.0).unwrap();
        let s = OptimizerState::new(vec![0.3, -1.2], 2.0).unwrap();
        let next = nag_gs_step(&s, &[0.0, 0.0], &cfg, None).unwrap();
        assert_eq!(next.x, s.x);
        assert_eq!(next.v, s.v);
    }

    #[test]
    fn gamma_stays_at_mu() {
        let cfg = NagGsConfig::new(0.37, 2.5, 2.5).unwrap();
        let mut s = OptimizerState::new(vec![1.0], 2.5).unwrap();
        for _ in 0..50 {
            let p = nag_gs_propose(&s, &cfg);
            nag_gs_step_in_place(&mut s, &p, &cfg, None).unwrap();
            assert_eq!(s.gamma, 2.5);
        }
    }

    #[test]
    fn propose_examples() {
        let cfg = NagGsConfig::new(1.0, 1.0, 1.0).unwrap();
        let s = OptimizerState::from_parts(vec![0.0], vec![2.0], 1.0).unwrap();
        assert_eq!(nag_gs_propose(&s, &cfg), vec![1.0]);

        // α = 1e-9 moves x by a_k·|v − x| ≈ 1e-9·|v − x|.
        let tiny = NagGsConfig::new(1e-9, 1.0, 1.0).unwrap();
        let s = OptimizerState::from_parts(vec![0.5, -3.0], vec![0.5005, -3.0008], 1.0).unwrap();
        let p = nag_gs_propose(&s, &tiny);
        for ((pi, xi), vi) in p.iter().zip(&s.x).zip(&s.v) {
            assert!((pi - xi).abs() < 1e-12);
            assert!((pi - xi).abs() <= 1e-9 * (vi - xi).abs() * 1.01);
        }
    }

    #[test]
    fn zero_mu_is_regular() {
        let cfg = NagGsConfig::new(0.5, 0.0, 1.0).unwrap();
        let s = OptimizerState::new(vec![2.0], 1.0).unwrap();
        let next = nag_gs_step(&s, &[1.0], &cfg, None).unwrap();
        // b = 0, γ' = 2/3, v' = v − (α/γ')·g = 2 − 0.75.
        assert!((next.gamma - 2.0 / 3.0).abs() < 1e-15);
        assert!((next.v[0] - 1.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_configs_and_inputs() {
        assert!(NagGsConfig::new(0.0, 1.0, 1.0).is_err());
        assert!(NagGsConfig::new(1.0, 1.0, -1.0).is_err());
        assert!(NagGsConfig::new(1.0, 1.0, 1.0).unwrap().with_sigma(-1.0).is_err());
        // α μ + γ ≤ 0
        let fixed = NagGsConfig {
            alpha: 1.0,
            mu: -3.0,
            gamma0: 2.0,
            sigma: 0.0,
            update_gamma: false,
            schedule: StepSchedule::Constant,
        };
        assert!(fixed.validate().is_err());
        let ok = NagGsConfig { mu: -1.0, ..fixed };
        assert!(ok.validate().is_ok());
        assert!(NagGsConfig { update_gamma: true, ..ok }.validate().is_err());

        let cfg = NagGsConfig::new(1.0, 1.0, 1.0).unwrap();
        let s = OptimizerState::new(vec![1.0, 1.0], 1.0).unwrap();
        assert!(matches!(
            nag_gs_step(&s, &[1.0], &cfg, None),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            nag_gs_step(&s, &[1.0, f64::INFINITY], &cfg, None),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn noise_enters_v_with_semi_implicit_scaling() {
        let cfg = NagGsConfig::new(4.0, 1.0, 2.0).unwrap().with_sigma(0.5).unwrap();
        let s = OptimizerState::new(vec![0.0], 2.0).unwrap();
        let quiet = nag_gs_step(&s, &[0.0], &cfg, None).unwrap();
        let noisy = nag_gs_step(&s, &[0.0], &cfg, Some(&[1.0])).unwrap();
        let gamma_next = quiet.gamma;
        let expected = 0.5 * 2.0 / (1.0 + 4.0 * 1.0 / gamma_next);
        assert!((noisy.v[0] - quiet.v[0] - expected).abs() < 1e-14);
        assert_eq!(noisy.x, quiet.x);
    }

    #[test]
    fn nesterov_rule_solves_its_equation() {
        let (gamma, mu, l) = (3.0, 0.5, 10.0);
        let a = nesterov_alpha(gamma, mu, l);
        assert!(a > 0.0 && a < 1.0);
        assert!((l * a * a - ((1.0 - a) * gamma + a * mu)).abs() < 1e-12);
        // γ = μ gives α = √(μ/L)
        assert!((nesterov_alpha(mu, mu, l) - (mu / l).sqrt()).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn gamma_contracts_towards_mu(
            gamma in 1e-3f64..1e3, mu in 0.0f64..1e2, alpha in 1e-3f64..1e3
        ) {
            let cfg = NagGsConfig::new(alpha, mu, gamma).unwrap();
            let s = OptimizerState::new(vec![0.0], gamma).unwrap();
            let next = nag_gs_step(&s, &[0.0], &cfg, None).unwrap();
            let a = alpha / (alpha + 1.0);
            let lhs = (next.gamma - mu).abs();
            let rhs = (1.0 - a) * (gamma - mu).abs();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + gamma.abs() + mu.abs()));
            if mu <= gamma {
                prop_assert!(next.gamma <= gamma && next.gamma >= mu);
            }
        }
    }
}
