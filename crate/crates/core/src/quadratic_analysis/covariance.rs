use nalgebra::{Matrix2, Matrix4, SMatrix, SVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_iteration_matrix, mode_block, spectral_radius, SpectrumConfig};
use crate::error::{Error, Result};
use crate::optimizers::{nag_gs_propose, nag_gs_step_in_place, NagGsConfig, OptimizerState};
use crate::rng;

const COND_WARN: f64 = 1e12;

/// Stationary second moment of the noisy NAG-GS iterates on the two-axis model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryCovariance {
    pub c: Matrix4<f64>,
    /// Eigenvalues of `C`, ascending.
    pub eigenvalues: [f64; 4],
    /// 2-norm condition number of `I − E⊗E`.
    pub condition: f64,
    pub warning: Option<String>,
}

/// Solves `C = E C Eᵀ + Q` through `(I − E⊗E) vec(C) = vec(Q)` and
/// symmetrises the result. Returns `C` and the condition number of the system.
pub fn solve_discrete_lyapunov(e: &Matrix4<f64>, q: &Matrix4<f64>) -> Result<(Matrix4<f64>, f64)> {
    let kron: SMatrix<f64, 16, 16> = e.kronecker(e);
    let system = SMatrix::<f64, 16, 16>::identity() - kron;
    let rhs = SVector::<f64, 16>::from_column_slice(q.as_slice());
    let sol = system.lu().solve(&rhs).ok_or(Error::NonStationary { rho: 1.0 })?;
    let c = Matrix4::from_column_slice(sol.as_slice());
    let sv = system.singular_values();
    let cond = sv.max() / sv.min();
    Ok(((c + c.transpose()) * 0.5, cond))
}

fn noise_matrix(cfg: &SpectrumConfig) -> Matrix4<f64> {
    let q = cfg.alpha * cfg.sigma * cfg.sigma / (1.0 + cfg.tau()).powi(2);
    Matrix4::from_diagonal(&nalgebra::Vector4::new(0.0, 0.0, q, q))
}

/// Stationary covariance of NAG-GS on the two-axis model with noise level `σ`.
pub fn stationary_covariance(cfg: &SpectrumConfig) -> Result<StationaryCovariance> {
    cfg.validate()?;
    let rho = spectral_radius(cfg);
    if rho >= 1.0 {
        return Err(Error::NonStationary { rho });
    }
    let e = build_iteration_matrix(cfg).as_matrix4().expect("two-axis model is 4x4");
    let (c, condition) = solve_discrete_lyapunov(&e, &noise_matrix(cfg))?;
    let mut eigenvalues: [f64; 4] = c.symmetric_eigenvalues().as_slice().try_into().expect("4 eigenvalues");
    eigenvalues.sort_by(f64::total_cmp);
    let warning = (condition > COND_WARN)
        .then(|| format!("Lyapunov system is ill-conditioned (condition {condition:.3e})"));
    Ok(StationaryCovariance { c, eigenvalues, condition, warning })
}

/// Stationary covariance of the `(xᵢ, vᵢ)` pair for a single Hessian
/// eigenvalue `lambda`; the building block of the `n`-dimensional case.
pub fn mode_covariance(lambda: f64, alpha: f64, mu: f64, gamma: f64, sigma: f64) -> Result<Matrix2<f64>> {
    let b = mode_block(lambda, alpha, mu, gamma);
    let rho = b.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if rho >= 1.0 {
        return Err(Error::NonStationary { rho });
    }
    let tau = alpha * mu / gamma;
    let q = alpha * sigma * sigma / (1.0 + tau).powi(2);
    let system = SMatrix::<f64, 4, 4>::identity() - b.kronecker(&b);
    let rhs = SVector::<f64, 4>::new(0.0, 0.0, 0.0, q);
    let sol = system.lu().solve(&rhs).ok_or(Error::NonStationary { rho })?;
    let c = Matrix2::from_column_slice(sol.as_slice());
    Ok((c + c.transpose()) * 0.5)
}

/// Empirical second moment of `y = (x₁, x₂, v₁, v₂)` at the last step of an
/// ensemble started at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloCovariance {
    pub second_moment: Matrix4<f64>,
    /// Standard error of each entry of `second_moment`.
    pub std_error: Matrix4<f64>,
    pub n_traj: usize,
    pub n_diverged: usize,
}

impl MonteCarloCovariance {
    pub fn diverged_fraction(&self) -> f64 {
        self.n_diverged as f64 / self.n_traj as f64
    }
}

/// Runs `n_traj` NAG-GS trajectories with fixed `γ` on
/// `f(x) = ½(μ x₁² + L x₂²)`. Diverged trajectories are counted and excluded.
pub fn montecarlo_covariance_check(
    cfg: &SpectrumConfig,
    n_traj: usize,
    n_steps: usize,
    seed: u64,
) -> Result<MonteCarloCovariance> {
    cfg.validate()?;
    if n_traj == 0 {
        return Err(Error::InvalidConfig("n_traj must be positive".into()));
    }
    let opt = NagGsConfig::new(cfg.alpha, cfg.mu, cfg.gamma)?
        .with_sigma(cfg.sigma)?
        .with_update_gamma(false)?;
    let diag = [cfg.mu, cfg.l];
    let finals: Vec<Option<[f64; 4]>> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let mut s = OptimizerState::new(vec![0.0, 0.0], cfg.gamma).ok()?;
            let mut eta = [0.0; 2];
            for _ in 0..n_steps {
                let p = nag_gs_propose(&s, &opt);
                let g = [diag[0] * p[0], diag[1] * p[1]];
                let noise = if cfg.sigma > 0.0 {
                    rng::fill_standard_normal(&mut r, &mut eta);
                    Some(&eta[..])
                } else {
                    None
                };
                if nag_gs_step_in_place(&mut s, &g, &opt, noise).is_err() || !s.is_finite() {
                    return None;
                }
            }
            Some([s.x[0], s.x[1], s.v[0], s.v[1]])
        })
        .collect();

    let ok: Vec<[f64; 4]> = finals.iter().flatten().copied().collect();
    let n_diverged = n_traj - ok.len();
    let m = ok.len().max(1) as f64;
    let mut mean = Matrix4::zeros();
    let mut sq = Matrix4::zeros();
    for y in &ok {
        for i in 0..4 {
            for j in 0..4 {
                let p = y[i] * y[j];
                mean[(i, j)] += p;
                sq[(i, j)] += p * p;
            }
        }
    }
    mean /= m;
    sq /= m;
    let std_error = (sq - mean.component_mul(&mean)).map(|v: f64| (v.max(0.0) * m / (m - 1.0).max(1.0)).sqrt() / m.sqrt());
    Ok(MonteCarloCovariance { second_moment: mean, std_error, n_traj, n_diverged })
}
