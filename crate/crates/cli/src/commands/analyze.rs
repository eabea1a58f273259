use naggs_core::quadratic_analysis::{spectral_radius, spectral_radius_curve, stationary_covariance, SpectrumConfig};
use serde::Serialize;

use super::Ctx;
use crate::config::AnalyzeConfig;
use crate::error::Result;
use crate::output::Output;

#[derive(Serialize)]
struct Summary {
    mu: f64,
    #[serde(rename = "L")]
    l: f64,
    gamma: f64,
    sigma: f64,
    alpha_star: Option<f64>,
    alpha_crit: Option<f64>,
    rho_at_alpha_star: Option<f64>,
    rho_increasing_beyond_alpha_star: bool,
}

#[derive(Serialize)]
struct CovarianceRow {
    alpha: f64,
    rho: f64,
    c_eig1: f64,
    c_eig2: f64,
    c_eig3: f64,
    c_eig4: f64,
    condition: f64,
}

/// Spectral radius curve, reference step sizes and stationary covariance
/// eigenvalues at every stable grid point.
pub fn run(cfg: &AnalyzeConfig, ctx: &Ctx) -> Result<Output> {
    let alphas = cfg.alphas.positive_values("analyze.alphas")?;
    SpectrumConfig::new(cfg.mu, cfg.l, cfg.gamma, alphas[0], cfg.sigma)?;
    let curve = spectral_radius_curve(cfg.mu, cfg.l, cfg.gamma, &alphas)?;

    let mut covariance = Vec::new();
    if cfg.sigma > 0.0 {
        for row in curve.rows.iter().filter(|r| r.stable) {
            let sc = SpectrumConfig::new(cfg.mu, cfg.l, cfg.gamma, row.alpha, cfg.sigma)?;
            let c = stationary_covariance(&sc)?;
            if let Some(w) = &c.warning {
                ctx.warn(&format!("alpha = {}: {w}", row.alpha));
            }
            let [c_eig1, c_eig2, c_eig3, c_eig4] = c.eigenvalues;
            covariance.push(CovarianceRow { alpha: row.alpha, rho: row.rho, c_eig1, c_eig2, c_eig3, c_eig4, condition: c.condition });
        }
    }

    let rho_at_alpha_star = curve
        .alpha_star
        .map(|a| SpectrumConfig::new(cfg.mu, cfg.l, cfg.gamma, a, 0.0).map(|c| spectral_radius(&c)))
        .transpose()?;
    let summary = Summary {
        mu: cfg.mu,
        l: cfg.l,
        gamma: cfg.gamma,
        sigma: cfg.sigma,
        alpha_star: curve.alpha_star,
        alpha_crit: curve.alpha_crit,
        rho_at_alpha_star,
        rho_increasing_beyond_alpha_star: curve.increasing_beyond_optimum,
    };

    let mut out = Output::new(ctx.format);
    out.json("summary", &summary)?;
    out.table("radius_curve", &["alpha", "lam1_abs", "lam2_abs", "lam3_abs", "lam4_abs", "rho", "stable"], &curve.rows)?;
    out.table("covariance", &["alpha", "rho", "c_eig1", "c_eig2", "c_eig3", "c_eig4", "condition"], &covariance)?;
    Ok(out)
}
