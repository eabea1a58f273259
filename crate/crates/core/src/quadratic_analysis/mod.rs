//! Linear stability theory of NAG-GS on `f(x) = ½ xᵀAx`.
//!
//! On a quadratic the noiseless NAG-GS map is linear, `y' = E y`, with
//! `y = (x, v)`. For a diagonal `A` each eigenvalue `λ` contributes an
//! independent 2×2 block acting on `(x_i, v_i)`:
//!
//! ```text
//! [ 1/(1+α)                          α/(1+α)                               ]
//! [ α(μ−λ)/(γ(1+τ)(1+α))             α²(μ−λ)/(γ(1+τ)(1+α)) + 1/(1+τ)       ]
//! ```
//!
//! with `τ = αμ/γ`. The two-axis model uses the spectrum endpoints `(μ, L)`
//! and the state ordering `(x₁, x₂, v₁, v₂)`.

mod covariance;

pub use covariance::{
    mode_covariance, montecarlo_covariance_check, solve_discrete_lyapunov, stationary_covariance,
    MonteCarloCovariance, StationaryCovariance,
};

use std::io::Write;

use nalgebra::{DMatrix, Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-axis quadratic model with step size and noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    pub mu: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub gamma: f64,
    pub alpha: f64,
    #[serde(default)]
    pub sigma: f64,
}

impl SpectrumConfig {
    pub fn new(mu: f64, l: f64, gamma: f64, alpha: f64, sigma: f64) -> Result<Self> {
        let cfg = Self { mu, l, gamma, alpha, sigma };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_spectrum(self.mu, self.l)?;
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    pub fn with_sigma(self, sigma: f64) -> Self {
        Self { sigma, ..self }
    }

    /// `τ = αμ/γ`.
    pub fn tau(&self) -> f64 {
        self.alpha * self.mu / self.gamma
    }
}

fn check_spectrum(mu: f64, l: f64) -> Result<()> {
    if !(mu > 0.0 && mu <= l && l.is_finite()) {
        return Err(Error::InvalidConfig(format!("need 0 < mu <= L < inf, got mu={mu}, L={l}")));
    }
    Ok(())
}

/// Iteration matrix in `(x, v)` ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationMatrix {
    pub entries: DMatrix<f64>,
}

impl IterationMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn as_matrix4(&self) -> Option<Matrix4<f64>> {
        (self.dim() == 4).then(|| self.entries.fixed_view::<4, 4>(0, 0).into_owned())
    }

    /// `E·y`.
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let v = &self.entries * nalgebra::DVector::from_column_slice(y);
        v.as_slice().to_vec()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.entries
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// The 2×2 block of `E` for a Hessian eigenvalue `lambda`.
pub fn mode_block(lambda: f64, alpha: f64, mu: f64, gamma: f64) -> Matrix2<f64> {
    let tau = alpha * mu / gamma;
    let d = gamma * (1.0 + tau) * (1.0 + alpha);
    Matrix2::new(
        1.0 / (1.0 + alpha),
        alpha / (1.0 + alpha),
        alpha * (mu - lambda) / d,
        alpha * alpha * (mu - lambda) / d + 1.0 / (1.0 + tau),
    )
}

/// 4×4 matrix for the two-axis model with eigenvalues `(μ, L)`.
pub fn build_iteration_matrix(cfg: &SpectrumConfig) -> IterationMatrix {
    build_block_iteration_matrix(&[cfg.mu, cfg.l], cfg.alpha, cfg.mu, cfg.gamma)
}

/// `2n×2n` matrix for a diagonal Hessian with the given eigenvalues, in
/// `(x₁..xₙ, v₁..vₙ)` ordering.
pub fn build_block_iteration_matrix(
    eigenvalues: &[f64],
    alpha: f64,
    mu: f64,
    gamma: f64,
) -> IterationMatrix {
    let n = eigenvalues.len();
    let mut e = DMatrix::zeros(2 * n, 2 * n);
    for (i, &lambda) in eigenvalues.iter().enumerate() {
        let b = mode_block(lambda, alpha, mu, gamma);
        e[(i, i)] = b[(0, 0)];
        e[(i, n + i)] = b[(0, 1)];
        e[(n + i, i)] = b[(1, 0)];
        e[(n + i, n + i)] = b[(1, 1)];
    }
    IterationMatrix { entries: e }
}

/// Closed-form eigenvalues of the 4×4 iteration matrix:
/// `λ₁ = γ/(γ+αμ)`, `λ₂ = 1/(1+α)`, and the pair `λ₃, λ₄` of the `L` block.
/// `λ₄` takes the minus branch of the radical and tends to `1 − L/μ` as
/// `α → ∞`.
pub fn iteration_eigenvalues(cfg: &SpectrumConfig) -> [Complex64; 4] {
    let (mu, l, g, a) = (cfg.mu, cfg.l, cfg.gamma, cfg.alpha);
    let lam1 = g / (g + a * mu);
    let lam2 = 1.0 / (1.0 + a);
    let base = 2.0 * g + a * g + a * mu - l * a * a + a * a * mu;
    let disc = l * l * a * a - 2.0 * l * a * a * mu - 2.0 * l * a * mu - 2.0 * g * l * a
        - 4.0 * g * l
        + a * a * mu * mu
        + 2.0 * a * mu * mu
        + 2.0 * g * a * mu
        + mu * mu
        + 2.0 * g * mu
        + g * g;
    let root = Complex64::new(disc, 0.0).sqrt() * a;
    let denom = 2.0 * (g + a * g + a * mu + a * a * mu);
    let lam3 = (Complex64::new(base, 0.0) + root) / denom;
    let lam4 = (Complex64::new(base, 0.0) - root) / denom;
    [Complex64::new(lam1, 0.0), Complex64::new(lam2, 0.0), lam3, lam4]
}

pub fn spectral_radius(cfg: &SpectrumConfig) -> f64 {
    iteration_eigenvalues(cfg)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Step size minimising `ρ(E)`:
/// `(μ + γ + √((μ−γ)² + 4γL)) / (L − μ)`, which is `(2μ + 2√(μL))/(L − μ)`
/// at `γ = μ`. Infinite when `L = μ`.
pub fn optimal_alpha(mu: f64, l: f64, gamma: f64) -> Result<f64> {
    check_spectrum(mu, l)?;
    if !(gamma >= mu && gamma.is_finite()) {
        return Err(Error::InvalidConfig(format!("optimal step needs gamma >= mu, got gamma={gamma}, mu={mu}")));
    }
    if l == mu {
        return Ok(f64::INFINITY);
    }
    Ok((mu + gamma + ((mu - gamma).powi(2) + 4.0 * gamma * l).sqrt()) / (l - mu))
}

/// Step size at which `ρ(E) = 1` and the stationary covariance blows up.
/// Exists only for `μ < L/2`.
pub fn critical_alpha(mu: f64, l: f64, gamma: f64) -> Result<Option<f64>> {
    check_spectrum(mu, l)?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidConfig(format!("gamma must be positive, got {gamma}")));
    }
    if mu >= l / 2.0 {
        return Ok(None);
    }
    let r = (gamma * gamma - 6.0 * gamma * mu + mu * mu + 4.0 * gamma * l).sqrt();
    Ok(Some((mu + gamma + r) / (l - 2.0 * mu)))
}

/// Eigenvalues, spectral radius and reference step sizes of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub config: SpectrumConfig,
    pub eigenvalues: [Complex64; 4],
    pub spectral_radius: f64,
    /// `None` when `γ < μ`, outside the range where the optimum is derived.
    pub alpha_star: Option<f64>,
    pub alpha_crit: Option<f64>,
    pub stable: bool,
}

pub fn stability_report(cfg: &SpectrumConfig) -> Result<StabilityReport> {
    cfg.validate()?;
    let eigenvalues = iteration_eigenvalues(cfg);
    let rho = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let alpha_star = if cfg.gamma >= cfg.mu { Some(optimal_alpha(cfg.mu, cfg.l, cfg.gamma)?) } else { None };
    Ok(StabilityReport {
        config: *cfg,
        eigenvalues,
        spectral_radius: rho,
        alpha_star,
        alpha_crit: critical_alpha(cfg.mu, cfg.l, cfg.gamma)?,
        stable: rho < 1.0,
    })
}

/// One row of a spectral radius sweep over `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusRow {
    pub alpha: f64,
    pub lam1_abs: f64,
    pub lam2_abs: f64,
    pub lam3_abs: f64,
    pub lam4_abs: f64,
    pub rho: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusCurve {
    pub rows: Vec<RadiusRow>,
    pub alpha_star: Option<f64>,
    pub alpha_crit: Option<f64>,
    /// Whether `ρ` is strictly increasing over the rows with `α ≥ α*`.
    pub increasing_beyond_optimum: bool,
}

impl RadiusCurve {
    /// Columns `alpha, lam1_abs..lam4_abs, rho, stable`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for row in &self.rows {
            wr.serialize(row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// `|λᵢ|` and `ρ(E)` at each `α`, sorted ascending by `α`.
pub fn spectral_radius_curve(mu: f64, l: f64, gamma: f64, alphas: &[f64]) -> Result<RadiusCurve> {
    let mut alphas = alphas.to_vec();
    alphas.sort_by(f64::total_cmp);
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in &alphas {
        let cfg = SpectrumConfig::new(mu, l, gamma, alpha, 0.0)?;
        let ev = iteration_eigenvalues(&cfg);
        let abs = ev.map(|z| z.norm());
        let rho = abs.iter().copied().fold(0.0, f64::max);
        rows.push(RadiusRow {
            alpha,
            lam1_abs: abs[0],
            lam2_abs: abs[1],
            lam3_abs: abs[2],
            lam4_abs: abs[3],
            rho,
            stable: rho < 1.0,
        });
    }
    let alpha_star = if gamma >= mu { Some(optimal_alpha(mu, l, gamma)?) } else { None };
    let increasing_beyond_optimum = match alpha_star {
        Some(a) => rows
            .iter()
            .filter(|r| r.alpha >= a)
            .collect::<Vec<_>>()
            .windows(2)
            .all(|w| w[1].rho > w[0].rho),
        None => false,
    };
    Ok(RadiusCurve { rows, alpha_star, alpha_crit: critical_alpha(mu, l, gamma)?, increasing_beyond_optimum })
}

/// Pairs the eigenvalues of an `n`-dimensional diagonal Hessian into
/// two-axis models; an odd leftover eigenvalue is paired with itself.
pub fn pair_eigenvalues(eigenvalues: &[f64]) -> Vec<(f64, f64)> {
    eigenvalues
        .chunks(2)
        .map(|c| if c.len() == 2 { (c[0], c[1]) } else { (c[0], c[0]) })
        .collect()
}

/// `ρ(E)` for a diagonal Hessian of any dimension, computed blockwise.
pub fn block_spectral_radius(eigenvalues: &[f64], alpha: f64, mu: f64, gamma: f64) -> f64 {
    pair_eigenvalues(eigenvalues)
        .into_iter()
        .flat_map(|(a, b)| [a, b])
        .map(|lambda| {
            let m = mode_block(lambda, alpha, mu, gamma);
            m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}
