use rand::Rng;

use crate::error::{Error, Result};
use crate::problems::ScalarObjective;
use crate::rng;

const ENDPOINT_RATIO: f64 = 1e-12;

/// Gibbs density `ρ*(x) = exp(−2f(x)/σ²)/Z` tabulated on a uniform grid.
///
/// `Z` comes from composite Simpson quadrature and the CDF from the matching
/// per-interval Simpson weights, so `cdf(hi) = 1` by construction.
#[derive(Debug, Clone)]
pub struct StationaryDensity<F> {
    f: F,
    sigma: f64,
    lo: f64,
    hi: f64,
    nodes: Vec<f64>,
    pdf: Vec<f64>,
    cdf: Vec<f64>,
    log_z: f64,
}

impl<F: ScalarObjective> StationaryDensity<F> {
    /// Fails with [`Error::GridTooSmall`] when the density at either end of
    /// `[lo, hi]` exceeds `1e-12` times its maximum on the grid.
    pub fn new(f: F, sigma: f64, lo: f64, hi: f64, n_nodes: usize) -> Result<Self> {
        Self::build(f, sigma, lo, hi, n_nodes, true)
    }

    /// Density conditioned on `[lo, hi]`, without the endpoint-mass check.
    /// Needed for objectives whose Gibbs density is not normalisable on ℝ.
    pub fn truncated(f: F, sigma: f64, lo: f64, hi: f64, n_nodes: usize) -> Result<Self> {
        Self::build(f, sigma, lo, hi, n_nodes, false)
    }

    fn build(f: F, sigma: f64, lo: f64, hi: f64, n_nodes: usize, check_ends: bool) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma must be positive, got {sigma}")));
        }
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidConfig(format!("invalid grid [{lo}, {hi}]")));
        }
        if n_nodes < 3 {
            return Err(Error::InvalidConfig("grid needs at least 3 nodes".into()));
        }
        let n = if n_nodes % 2 == 0 { n_nodes + 1 } else { n_nodes };
        let h = (hi - lo) / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|i| if i == n - 1 { hi } else { lo + h * i as f64 }).collect();
        let scale = 2.0 / (sigma * sigma);
        let logs: Vec<f64> = nodes.iter().map(|&x| -scale * f.value(x)).collect();
        if !logs.iter().all(|v| !v.is_nan()) {
            return Err(Error::NonFinite("log density"));
        }
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|v| (v - top).exp()).collect();
        if check_ends {
            let ratio = w[0].max(w[n - 1]);
            if ratio >= ENDPOINT_RATIO {
                return Err(Error::GridTooSmall { ratio });
            }
        }
        let mut cum = vec![0.0; n];
        for i in (0..n - 1).step_by(2) {
            let (a, b, c) = (w[i], w[i + 1], w[i + 2]);
            cum[i + 1] = cum[i] + h / 12.0 * (5.0 * a + 8.0 * b - c);
            cum[i + 2] = cum[i] + h / 3.0 * (a + 4.0 * b + c);
        }
        let z = cum[n - 1];
        let pdf = w.iter().map(|v| v / z).collect();
        let cdf = cum.iter().map(|v| (v / z).clamp(0.0, 1.0)).collect();
        Ok(Self { f, sigma, lo, hi, nodes, pdf, cdf, log_z: top + z.ln() })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn grid(&self) -> (f64, f64, usize) {
        (self.lo, self.hi, self.nodes.len())
    }

    /// `log Z`, with `Z = ∫ exp(−2f/σ²)` over the grid.
    pub fn log_partition(&self) -> f64 {
        self.log_z
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            return 0.0;
        }
        (-2.0 * self.f.value(x) / (self.sigma * self.sigma) - self.log_z).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        let i = self.nodes.partition_point(|&v| v <= x) - 1;
        let t = (x - self.nodes[i]) / (self.nodes[i + 1] - self.nodes[i]);
        self.cdf[i] + t * (self.cdf[i + 1] - self.cdf[i])
    }

    /// Inverse of the piecewise-linear CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let i = self.cdf.partition_point(|&c| c < u).clamp(1, self.nodes.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.nodes[i - 1] + t * (self.nodes[i] - self.nodes[i - 1])
    }

    /// `n` inverse-CDF draws from a seeded stream.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, 0);
        (0..n).map(|_| self.quantile(r.random::<f64>())).collect()
    }

    /// `∫ g(x) ρ*(x) dx` by composite Simpson on the grid.
    pub fn expectation(&self, g: impl Fn(f64) -> f64) -> f64 {
        let n = self.nodes.len();
        let h = (self.hi - self.lo) / (n - 1) as f64;
        let mut s = 0.0;
        for i in 0..n {
            let w = if i == 0 || i == n - 1 { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * g(self.nodes[i]) * self.pdf[i];
        }
        s * h / 3.0
    }

    /// Grid nodes where the tabulated density has a strict local maximum.
    pub fn modes(&self) -> Vec<f64> {
        (1..self.nodes.len() - 1)
            .filter(|&i| self.pdf[i] > self.pdf[i - 1] && self.pdf[i] > self.pdf[i + 1])
            .map(|i| self.nodes[i])
            .collect()
    }
}
