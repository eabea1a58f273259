//! Seeded Monte Carlo ensembles of SDE discretisations.
//!
//! Every trajectory owns an RNG stream chosen by its index. Trajectories are
//! advanced in parallel between recording epochs and reduced in index order,
//! so results do not depend on the thread count.

mod quadratic;
mod series;
mod stationary;

pub use quadratic::{
    run_quadratic_ensemble, AlphaOutcome, EnsembleMethod, QuadraticExperiment, QuadraticRun, ScatterPoint,
};
pub use series::{MetricRow, MetricSeries};
pub use stationary::{run_stationarity_study, StationarityConfig, StationaryObjective};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optimizers::{GradientFlowConfig, GradientOracle, Optimizer, TrainState};
use crate::rng::{self, StreamRng};

/// A coordinate beyond this magnitude marks a trajectory diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e8;

const INIT_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Stream used to draw the initial point of trajectory `i`, disjoint from
/// the noise streams.
pub(crate) fn init_stream(seed: u64, i: usize) -> StreamRng {
    rng::stream(seed ^ INIT_SALT, i as u64)
}

/// Default recording cadence `⌈n_steps / 200⌉`.
pub fn recording_cadence(n_steps: usize) -> usize {
    n_steps.div_ceil(200).max(1)
}

/// Iterations at which a run of `n_steps` with cadence `every` is recorded:
/// `0, every, 2·every, …` and always `n_steps`.
pub(crate) fn record_points(n_steps: usize, every: usize) -> Vec<usize> {
    let every = every.max(1);
    let mut pts: Vec<usize> = (0..=n_steps).step_by(every).collect();
    if pts.last() != Some(&n_steps) {
        pts.push(n_steps);
    }
    pts
}

/// Fixed set of trajectories driven by one optimizer.
#[derive(Debug, Clone)]
pub struct Ensemble {
    optimizer: Optimizer,
    trajectories: Vec<TrainState>,
    streams: Vec<StreamRng>,
    seed: u64,
}

impl Ensemble {
    pub fn new(optimizer: Optimizer, x0_samples: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        if x0_samples.is_empty() {
            return Err(Error::InvalidConfig("ensemble needs at least one trajectory".into()));
        }
        let dim = x0_samples[0].len();
        let trajectories = x0_samples
            .into_iter()
            .map(|x0| {
                crate::error::check_dim(dim, x0.len())?;
                optimizer.init(x0)
            })
            .collect::<Result<Vec<_>>>()?;
        let streams = (0..trajectories.len()).map(|i| rng::stream(seed, i as u64)).collect();
        Ok(Self { optimizer, trajectories, streams, seed })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn optimizer(&self) -> &Optimizer {
        &self.optimizer
    }

    pub fn trajectories(&self) -> &[TrainState] {
        &self.trajectories
    }

    /// Advances every live trajectory by `n_steps`. Fails with the error of
    /// the lowest-index trajectory that reported one.
    pub fn advance(&mut self, oracle: &dyn GradientOracle, n_steps: usize) -> Result<()> {
        let opt = &self.optimizer;
        let noisy = opt.uses_noise();
        let outcomes: Vec<Result<()>> = self
            .trajectories
            .par_iter_mut()
            .zip(self.streams.par_iter_mut())
            .map(|(st, r)| {
                let mut eta = vec![0.0; st.state.dim()];
                for _ in 0..n_steps {
                    if st.diverged {
                        break;
                    }
                    let noise = if noisy {
                        rng::fill_standard_normal(r, &mut eta);
                        Some(&eta[..])
                    } else {
                        None
                    };
                    opt.step(st, oracle, noise)?;
                    if st.state.x.iter().any(|v| v.abs() > DIVERGENCE_THRESHOLD) {
                        st.diverged = true;
                    }
                }
                Ok(())
            })
            .collect();
        outcomes.into_iter().collect()
    }

    pub fn n_diverged(&self) -> usize {
        self.trajectories.iter().filter(|t| t.diverged).count()
    }

    pub fn diverged_fraction(&self) -> f64 {
        self.n_diverged() as f64 / self.len() as f64
    }

    /// Positions of the live trajectories, in index order.
    pub fn live_positions(&self) -> impl Iterator<Item = &[f64]> {
        self.trajectories.iter().filter(|t| !t.diverged).map(|t| t.x())
    }

    /// Mean position over live trajectories; `None` if all diverged.
    pub fn mean(&self) -> Option<Vec<f64>> {
        let dim = self.trajectories[0].state.dim();
        let mut sum = vec![0.0; dim];
        let mut n = 0usize;
        for x in self.live_positions() {
            sum.iter_mut().zip(x).for_each(|(s, v)| *s += v);
            n += 1;
        }
        (n > 0).then(|| sum.into_iter().map(|s| s / n as f64).collect())
    }

    /// Trace of the sample covariance of live positions.
    pub fn scatter_trace(&self) -> f64 {
        let Some(mean) = self.mean() else { return f64::NAN };
        let mut total = 0.0;
        let mut n = 0usize;
        for x in self.live_positions() {
            total += x.iter().zip(&mean).map(|(v, m)| (v - m) * (v - m)).sum::<f64>();
            n += 1;
        }
        if n < 2 {
            return 0.0;
        }
        total / (n - 1) as f64
    }

    /// Coordinate `j` of every live trajectory.
    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.live_positions().map(|x| x[j]).collect()
    }
}

/// Euler-Maruyama integration of `dx = −∇f dt + σ dW` with step `alpha`:
/// `x ← x − α∇f(x) + σ√α·η` for every sample.
pub fn euler_maruyama_gf(
    oracle: &dyn GradientOracle,
    x0_samples: Vec<Vec<f64>>,
    alpha: f64,
    sigma: f64,
    n_steps: usize,
    seed: u64,
) -> Result<Ensemble> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!("sigma must be non-negative, got {sigma}")));
    }
    let mut ens = Ensemble::new(Optimizer::GradientFlow(GradientFlowConfig { alpha, sigma }), x0_samples, seed)?;
    ens.advance(oracle, n_steps)?;
    Ok(ens)
}
