//! Optimizers behind a single stepping interface.
//!
//! The free functions ([`nag_gs_step`], [`nag_fi_step`], [`sgd_momentum_step`],
//! [`adamw_step`]) are pure maps from a state to the next state. [`Optimizer`]
//! wraps them for drivers that hold a [`TrainState`] and a [`GradientOracle`].

mod baselines;
mod nag_fi;
mod nag_gs;

pub use baselines::{adamw_step, sgd_momentum_step, AdamWConfig, AdamWState, SgdMomentumConfig};
pub use nag_fi::{nag_fi_step, nag_fi_step_with_stats, NagFiConfig, NewtonStats};
pub use nag_gs::{
    nag_gs_propose, nag_gs_step, nag_gs_step_in_place, nesterov_alpha, NagGsConfig, StepSchedule,
};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::vecops::all_finite;

/// Live state of the paired iteration `(x, v)` with scaling factor `gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub gamma: f64,
    pub step_count: u64,
}

impl OptimizerState {
    /// Start state with `v0 = x0`.
    pub fn new(x0: Vec<f64>, gamma0: f64) -> Result<Self> {
        let v = x0.clone();
        Self::from_parts(x0, v, gamma0)
    }

    pub fn from_parts(x: Vec<f64>, v: Vec<f64>, gamma: f64) -> Result<Self> {
        check_dim(x.len(), v.len())?;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self { x, v, gamma, step_count: 0 })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.gamma.is_finite() && all_finite(&self.x) && all_finite(&self.v)
    }
}

/// First-order (and optionally second-order) access to an objective.
pub trait GradientOracle: Sync {
    fn dim(&self) -> usize;

    /// Writes `∇f(x)` into `out`.
    fn grad(&self, x: &[f64], out: &mut [f64]);

    /// Writes `∇²f(x)·d` into `out`. Oracles without curvature information
    /// return [`Error::MissingHessian`].
    fn hessian_apply(&self, _x: &[f64], _d: &[f64], _out: &mut [f64]) -> Result<()> {
        Err(Error::MissingHessian)
    }

    fn grad_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.grad(x, &mut g);
        g
    }
}

/// Oracle built from closures.
pub struct FnOracle<G, H = fn(&[f64], &[f64], &mut [f64])> {
    dim: usize,
    grad: G,
    hessian: Option<H>,
}

impl<G> FnOracle<G>
where
    G: Fn(&[f64], &mut [f64]) + Sync,
{
    pub fn new(dim: usize, grad: G) -> Self {
        Self { dim, grad, hessian: None }
    }
}

impl<G, H> FnOracle<G, H>
where
    G: Fn(&[f64], &mut [f64]) + Sync,
    H: Fn(&[f64], &[f64], &mut [f64]) + Sync,
{
    pub fn with_hessian(dim: usize, grad: G, hessian: H) -> Self {
        Self { dim, grad, hessian: Some(hessian) }
    }
}

impl<G, H> GradientOracle for FnOracle<G, H>
where
    G: Fn(&[f64], &mut [f64]) + Sync,
    H: Fn(&[f64], &[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn grad(&self, x: &[f64], out: &mut [f64]) {
        (self.grad)(x, out)
    }

    fn hessian_apply(&self, x: &[f64], d: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.hessian {
            Some(h) => {
                h(x, d, out);
                Ok(())
            }
            None => Err(Error::MissingHessian),
        }
    }
}

/// Explicit Euler step of the (stochastic) gradient flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientFlowConfig {
    pub alpha: f64,
    #[serde(default)]
    pub sigma: f64,
}

/// Any of the supported steppers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    NagGs(NagGsConfig),
    NagFi(NagFiConfig),
    SgdMomentum(SgdMomentumConfig),
    AdamW(AdamWConfig),
    GradientFlow(GradientFlowConfig),
}

/// State owned by a driver: the optimizer state plus AdamW's second moment
/// and a divergence flag. Diverged states are frozen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub state: OptimizerState,
    pub second_moment: Option<Vec<f64>>,
    pub diverged: bool,
}

impl TrainState {
    pub fn x(&self) -> &[f64] {
        &self.state.x
    }
}

impl Optimizer {
    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::NagGs(_) => "nag_gs",
            Optimizer::NagFi(_) => "nag_fi",
            Optimizer::SgdMomentum(_) => "sgd_momentum",
            Optimizer::AdamW(_) => "adamw",
            Optimizer::GradientFlow(_) => "gf_euler",
        }
    }

    /// Step size: `alpha` for the SDE steppers, `lr` for the baselines.
    pub fn learning_rate(&self) -> f64 {
        match self {
            Optimizer::NagGs(c) => c.alpha,
            Optimizer::NagFi(c) => c.alpha,
            Optimizer::SgdMomentum(c) => c.lr,
            Optimizer::AdamW(c) => c.lr,
            Optimizer::GradientFlow(c) => c.alpha,
        }
    }

    /// Copy with the step size replaced, revalidated.
    pub fn with_learning_rate(&self, lr: f64) -> Result<Optimizer> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate must be positive, got {lr}")));
        }
        let mut out = self.clone();
        match &mut out {
            Optimizer::NagGs(c) => {
                c.alpha = lr;
                c.validate()?;
            }
            Optimizer::NagFi(c) => {
                c.alpha = lr;
                c.validate()?;
            }
            Optimizer::SgdMomentum(c) => c.lr = lr,
            Optimizer::AdamW(c) => c.lr = lr,
            Optimizer::GradientFlow(c) => c.alpha = lr,
        }
        Ok(out)
    }

    /// Whether [`Optimizer::step`] consumes a noise vector.
    pub fn uses_noise(&self) -> bool {
        match self {
            Optimizer::NagGs(c) => c.sigma > 0.0,
            Optimizer::NagFi(c) => c.sigma > 0.0,
            Optimizer::GradientFlow(c) => c.sigma > 0.0,
            _ => false,
        }
    }

    pub fn init(&self, x0: Vec<f64>) -> Result<TrainState> {
        let n = x0.len();
        let (state, second_moment) = match self {
            Optimizer::NagGs(c) => (OptimizerState::new(x0, c.gamma0)?, None),
            Optimizer::NagFi(c) => (OptimizerState::new(x0, c.gamma0)?, None),
            Optimizer::SgdMomentum(_) | Optimizer::GradientFlow(_) => {
                (OptimizerState::from_parts(x0, vec![0.0; n], 1.0)?, None)
            }
            Optimizer::AdamW(_) => {
                (OptimizerState::from_parts(x0, vec![0.0; n], 1.0)?, Some(vec![0.0; n]))
            }
        };
        Ok(TrainState { state, second_moment, diverged: false })
    }

    /// Advances `st` by one step. `noise` is a standard normal draw of the
    /// problem dimension, used only by the SDE-mode steppers.
    ///
    /// A non-finite gradient or state marks the trajectory diverged; it is
    /// then left untouched by further calls.
    pub fn step(
        &self,
        st: &mut TrainState,
        oracle: &dyn GradientOracle,
        noise: Option<&[f64]>,
    ) -> Result<()> {
        if st.diverged {
            return Ok(());
        }
        check_dim(oracle.dim(), st.state.dim())?;
        let result = match self {
            Optimizer::NagGs(cfg) => {
                let proposal = nag_gs_propose(&st.state, cfg);
                let grad = oracle.grad_vec(&proposal);
                nag_gs_step_in_place(&mut st.state, &grad, cfg, noise)
            }
            Optimizer::NagFi(cfg) => {
                nag_fi_step(&st.state, oracle, cfg, noise).map(|next| st.state = next)
            }
            Optimizer::SgdMomentum(cfg) => {
                let grad = oracle.grad_vec(&st.state.x);
                sgd_momentum_step(&st.state, &grad, cfg.lr, cfg.momentum, cfg.weight_decay)
                    .map(|next| st.state = next)
            }
            Optimizer::AdamW(cfg) => {
                let grad = oracle.grad_vec(&st.state.x);
                let second = st
                    .second_moment
                    .take()
                    .unwrap_or_else(|| vec![0.0; st.state.dim()]);
                let adam = AdamWState { base: st.state.clone(), second_moment: second };
                adamw_step(&adam, &grad, cfg).map(|next| {
                    st.state = next.base;
                    st.second_moment = Some(next.second_moment);
                })
            }
            Optimizer::GradientFlow(cfg) => gradient_flow_step(&mut st.state, oracle, cfg, noise),
        };
        match result {
            Ok(()) => {
                if !st.state.is_finite() {
                    st.diverged = true;
                }
                Ok(())
            }
            Err(Error::NonFinite(_)) => {
                st.diverged = true;
                Ok(())
            }
            Err(e) => Err(e),
        }
    }
}

fn gradient_flow_step(
    state: &mut OptimizerState,
    oracle: &dyn GradientOracle,
    cfg: &GradientFlowConfig,
    noise: Option<&[f64]>,
) -> Result<()> {
    let grad = oracle.grad_vec(&state.x);
    if !all_finite(&grad) {
        return Err(Error::NonFinite("gradient"));
    }
    let scale = cfg.sigma * cfg.alpha.sqrt();
    if let Some(eta) = noise {
        check_dim(state.dim(), eta.len())?;
        for ((x, g), e) in state.x.iter_mut().zip(&grad).zip(eta) {
            *x += -cfg.alpha * g + scale * e;
        }
    } else {
        for (x, g) in state.x.iter_mut().zip(&grad) {
            *x -= cfg.alpha * g;
        }
    }
    state.step_count += 1;
    Ok(())
}
