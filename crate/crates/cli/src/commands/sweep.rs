use naggs_core::optimizers::{GradientOracle, NagGsConfig, StepSchedule};
use naggs_core::problems::{Batch, LogisticRegressionProblem, Quadratic};
use naggs_core::{rng, Optimizer};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::Ctx;
use crate::config::{Axis, Sampling, SweepObjective, SweepSpec};
use crate::error::Result;
use crate::output::Output;

const NOISE_SALT: u64 = 0x6e6f_6973_6500_0000;
const DIVERGENCE_THRESHOLD: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum Status {
    Converged,
    Diverged,
    RejectedConfig,
}

#[derive(Debug, Serialize)]
struct Trial {
    trial: usize,
    alpha: f64,
    gamma: f64,
    mu: f64,
    final_metric: Option<f64>,
    diverged: bool,
    status: Status,
}

enum Problem {
    Quadratic(Quadratic),
    Logistic(LogisticRegressionProblem),
}

impl Problem {
    fn oracle(&self) -> &dyn GradientOracle {
        match self {
            Problem::Quadratic(q) => q,
            Problem::Logistic(p) => p,
        }
    }

    /// `‖x − x*‖` for quadratics, full-batch loss for logistic regression.
    fn metric(&self, x: &[f64]) -> f64 {
        match self {
            Problem::Quadratic(q) => q.minimizer().iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
            Problem::Logistic(p) => p.loss_grad(x, Batch::Full).map_or(f64::NAN, |(l, _)| l),
        }
    }
}

fn sample(spec: &SweepSpec, trial: usize, seed: u64) -> (f64, f64, f64) {
    let mut r = rng::stream(seed, trial as u64);
    let (mut alpha, mut gamma, mut mu) = (spec.alpha, spec.gamma, spec.mu);
    for a in &spec.axes {
        let v = match a.sampling {
            Sampling::Uniform => r.random_range(a.low..a.high),
            Sampling::LogUniform => r.random_range(a.low.ln()..a.high.ln()).exp(),
        };
        match a.name {
            Axis::Alpha => alpha = v,
            Axis::Gamma => gamma = v,
            Axis::Mu => mu = v,
        }
    }
    (alpha, gamma, mu)
}

fn run_trial(spec: &SweepSpec, problem: &Problem, trial: usize, seed: u64) -> naggs_core::Result<Trial> {
    let (alpha, gamma, mu) = sample(spec, trial, seed);
    let rejected = Trial { trial, alpha, gamma, mu, final_metric: None, diverged: false, status: Status::RejectedConfig };
    if alpha * mu + gamma <= 0.0 {
        return Ok(rejected);
    }
    let cfg = NagGsConfig {
        alpha,
        mu,
        gamma0: gamma,
        sigma: spec.sigma,
        update_gamma: false,
        schedule: StepSchedule::Constant,
    };
    if cfg.validate().is_err() {
        return Ok(rejected);
    }
    let opt = Optimizer::NagGs(cfg);
    let oracle = problem.oracle();
    let mut st = opt.init(vec![0.0; oracle.dim()])?;
    let mut noise_rng = rng::stream(seed ^ NOISE_SALT, trial as u64);
    let mut noise = vec![0.0; oracle.dim()];
    for _ in 0..spec.budget {
        let eta = if opt.uses_noise() {
            rng::fill_standard_normal(&mut noise_rng, &mut noise);
            Some(&noise[..])
        } else {
            None
        };
        opt.step(&mut st, oracle, eta)?;
        if st.diverged || st.x().iter().any(|v| v.abs() > DIVERGENCE_THRESHOLD) {
            st.diverged = true;
            break;
        }
    }
    let metric = problem.metric(st.x());
    let diverged = st.diverged || !metric.is_finite();
    Ok(Trial {
        trial,
        alpha,
        gamma,
        mu,
        final_metric: (!diverged).then_some(metric),
        diverged,
        status: if diverged { Status::Diverged } else { Status::Converged },
    })
}

/// Random search over `(α, γ, μ)` for NAG-GS with fixed `γ`. Configurations
/// with `αμ + γ ≤ 0` are recorded as rejected instead of run.
pub fn run(spec: &SweepSpec, ctx: &Ctx) -> Result<Output> {
    spec.validate()?;
    let problem = match &spec.objective {
        SweepObjective::Quadratic { eigenvalues, c } => Problem::Quadratic(Quadratic::diagonal(eigenvalues, *c)?),
        SweepObjective::Logistic { data } => Problem::Logistic(data.load(ctx.seed)?),
    };
    let trials: Vec<Trial> = (0..spec.n_trials)
        .into_par_iter()
        .map(|t| run_trial(spec, &problem, t, ctx.seed))
        .collect::<naggs_core::Result<_>>()?;
    let count = |s: Status| trials.iter().filter(|t| t.status == s).count();
    let summary = serde_json::json!({
        "n_trials": spec.n_trials,
        "converged": count(Status::Converged),
        "diverged": count(Status::Diverged),
        "rejected_config": count(Status::RejectedConfig),
    });
    ctx.info(&format!("sweep: {summary}"));
    let mut out = Output::new(ctx.format);
    out.table("sweep", &["trial", "alpha", "gamma", "mu", "final_metric", "diverged", "status"], &trials)?;
    out.json("summary", &summary)?;
    Ok(out)
}
