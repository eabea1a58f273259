//! Matrix-free extreme eigenvalues of symmetric operators.
//!
//! Power iteration supplies a starting vector; the Rayleigh quotient is then
//! optimised by steepest ascent (or descent) with exact line search, i.e. a
//! Rayleigh-Ritz step on `span{v, Hv − λv}`. The opposite end of the spectrum
//! is reached through the shifted operator `H − λ_d I`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::optimizers::GradientOracle;
use crate::rng;
use crate::vecops::{dot, norm};

/// Symmetric linear map given only through its action.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[f64], out: &mut [f64]);

    fn apply_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply(v, &mut out);
        out
    }
}

/// Dense matrix operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    pub matrix: DMatrix<f64>,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidConfig("operator matrix must be square".into()));
        }
        Ok(Self { matrix })
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..n).map(|j| self.matrix[(i, j)] * v[j]).sum();
        }
    }
}

/// Operator from a closure.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        (self.f)(v, out)
    }
}

/// Hessian of an oracle at a fixed point, applied through HVPs.
pub struct HessianOperator<'a> {
    oracle: &'a dyn GradientOracle,
    point: Vec<f64>,
}

impl<'a> HessianOperator<'a> {
    pub fn new(oracle: &'a dyn GradientOracle, point: Vec<f64>) -> Result<Self> {
        check_dim(oracle.dim(), point.len())?;
        let mut probe = vec![0.0; point.len()];
        oracle.hessian_apply(&point, &point.clone(), &mut probe)?;
        Ok(Self { oracle, point })
    }
}

impl LinearOperator for HessianOperator<'_> {
    fn dim(&self) -> usize {
        self.point.len()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        if self.oracle.hessian_apply(&self.point, v, out).is_err() {
            out.fill(f64::NAN);
        }
    }
}

/// `H − shift·I`.
struct Shifted<'a> {
    op: &'a dyn LinearOperator,
    shift: f64,
}

impl LinearOperator for Shifted<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        self.op.apply(v, out);
        for (o, x) in out.iter_mut().zip(v) {
            *o -= self.shift * x;
        }
    }
}

/// Largest relative defects of linearity and symmetry on random probes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorCheck {
    pub linearity: f64,
    pub symmetry: f64,
}

impl OperatorCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.linearity <= tol && self.symmetry <= tol
    }
}

pub fn check_operator(op: &dyn LinearOperator, probes: usize, seed: u64) -> OperatorCheck {
    let n = op.dim();
    let mut r = rng::stream(seed, 0);
    let (mut lin, mut sym) = (0.0f64, 0.0f64);
    for _ in 0..probes {
        let u = rng::standard_normal_vec(&mut r, n);
        let v = rng::standard_normal_vec(&mut r, n);
        let (a, b) = (0.7, -1.3);
        let hu = op.apply_vec(&u);
        let hv = op.apply_vec(&v);
        let comb: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let hc = op.apply_vec(&comb);
        let expect: Vec<f64> = hu.iter().zip(&hv).map(|(x, y)| a * x + b * y).collect();
        let diff: Vec<f64> = hc.iter().zip(&expect).map(|(x, y)| x - y).collect();
        lin = lin.max(norm(&diff) / norm(&expect).max(f64::MIN_POSITIVE));
        let (p, q) = (dot(&u, &hv), dot(&hu, &v));
        sym = sym.max((p - q).abs() / (norm(&u) * norm(&hv)).max(f64::MIN_POSITIVE));
    }
    OperatorCheck { linearity: lin, symmetry: sym }
}

/// Eigenpair estimate with `residual = ‖Hv − λv‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenEstimate {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// `residual ≤ tol·|value|` was reached.
    pub converged: bool,
}

/// Which end of the spectrum a Rayleigh-quotient search moves towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extreme {
    Max,
    Min,
}

fn normalize(v: &mut [f64]) -> Result<()> {
    let n = norm(v);
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::NonFinite("eigenvector iterate"));
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(())
}

fn is_converged(residual: f64, value: f64, tol: f64) -> bool {
    residual <= tol * value.abs() || residual == 0.0
}

/// `(λ, r)` with `λ = vᵀHv` and `r = Hv − λv`, for unit `v`.
fn rayleigh(hv: &[f64], v: &[f64]) -> (f64, Vec<f64>) {
    let lam = dot(v, hv);
    let r: Vec<f64> = hv.iter().zip(v).map(|(h, x)| h - lam * x).collect();
    (lam, r)
}

/// Dominant-modulus eigenpair by power iteration from a seeded random start.
/// Stops once `‖Hv − λv‖ ≤ tol·|λ|`.
pub fn power_iteration(op: &dyn LinearOperator, tol: f64, max_iter: usize, seed: u64) -> Result<EigenEstimate> {
    let n = op.dim();
    if n == 0 {
        return Err(Error::InvalidConfig("operator has dimension 0".into()));
    }
    let mut r = rng::stream(seed, 0);
    let mut v = rng::standard_normal_vec(&mut r, n);
    normalize(&mut v)?;
    let mut hv = op.apply_vec(&v);
    let (mut lam, mut res) = rayleigh(&hv, &v);
    let mut residual = norm(&res);
    let mut it = 0;
    while !is_converged(residual, lam, tol) && it < max_iter {
        v.copy_from_slice(&hv);
        if norm(&v) == 0.0 {
            // v lies in the kernel: λ = 0 is exact.
            v = hv.clone();
            break;
        }
        normalize(&mut v)?;
        op.apply(&v, &mut hv);
        (lam, res) = rayleigh(&hv, &v);
        residual = norm(&res);
        it += 1;
    }
    Ok(EigenEstimate { value: lam, vector: v, residual, iterations: it, converged: is_converged(residual, lam, tol) })
}

/// Maximises (or minimises) the Rayleigh quotient from `v0` by steepest
/// ascent with exact line search over `span{v, Hv − λv}`.
pub fn rayleigh_refine_towards(
    op: &dyn LinearOperator,
    v0: &[f64],
    tol: f64,
    max_iter: usize,
    target: Extreme,
) -> Result<EigenEstimate> {
    check_dim(op.dim(), v0.len())?;
    let mut v = v0.to_vec();
    normalize(&mut v)?;
    let mut hv = op.apply_vec(&v);
    let (mut lam, mut res) = rayleigh(&hv, &v);
    let mut residual = norm(&res);
    let mut it = 0;
    while !is_converged(residual, lam, tol) && it < max_iter {
        let mut q = res.clone();
        normalize(&mut q)?;
        // Rounding in `res` leaves a component along v of size ~eps/‖res‖.
        let along = dot(&v, &q);
        q.iter_mut().zip(&v).for_each(|(qi, vi)| *qi -= along * vi);
        normalize(&mut q)?;
        let hq = op.apply_vec(&q);
        // Rotation angle diagonalising [[λ, b], [b, d]]; +π/2 selects the smaller Ritz value.
        let b = dot(&q, &res);
        let d = dot(&q, &hq);
        let mut theta = 0.5 * (2.0 * b).atan2(lam - d);
        if target == Extreme::Min {
            theta += std::f64::consts::FRAC_PI_2;
        }
        let (c1, c0) = theta.sin_cos();
        for i in 0..v.len() {
            v[i] = c0 * v[i] + c1 * q[i];
            hv[i] = c0 * hv[i] + c1 * hq[i];
        }
        let scale = norm(&v);
        v.iter_mut().for_each(|x| *x /= scale);
        hv.iter_mut().for_each(|x| *x /= scale);
        if it % 32 == 31 {
            // Recompute Hv to keep the recurrence from drifting.
            op.apply(&v, &mut hv);
        }
        (lam, res) = rayleigh(&hv, &v);
        residual = norm(&res);
        it += 1;
    }
    op.apply(&v, &mut hv);
    (lam, res) = rayleigh(&hv, &v);
    residual = norm(&res);
    Ok(EigenEstimate { value: lam, vector: v, residual, iterations: it, converged: is_converged(residual, lam, tol) })
}

/// [`rayleigh_refine_towards`] the top of the spectrum.
pub fn rayleigh_refine(op: &dyn LinearOperator, v0: &[f64], tol: f64, max_iter: usize) -> Result<EigenEstimate> {
    rayleigh_refine_towards(op, v0, tol, max_iter, Extreme::Max)
}

/// `(λ_min, λ_max)`.
///
/// The dominant eigenvalue `λ_d` from power iteration (run to `√tol` as an
/// initialiser) fixes one end: `λ_max` if `λ_d ≥ 0`, else `λ_min`. Power iteration on `H − λ_d I` then reaches
/// the other end, and both estimates are polished by Rayleigh refinement on `H`.
pub fn extreme_eigenvalues(
    op: &dyn LinearOperator,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<(EigenEstimate, EigenEstimate)> {
    let init_tol = tol.sqrt();
    let dominant = power_iteration(op, init_tol, max_iter, seed)?;
    let first_end = if dominant.value >= 0.0 { Extreme::Max } else { Extreme::Min };
    let first = rayleigh_refine_towards(op, &dominant.vector, tol, max_iter, first_end)?;

    let shifted = Shifted { op, shift: first.value };
    let other = power_iteration(&shifted, init_tol, max_iter, seed.wrapping_add(1))?;
    let other_end = match first_end {
        Extreme::Max => Extreme::Min,
        Extreme::Min => Extreme::Max,
    };
    let second = rayleigh_refine_towards(op, &other.vector, tol, max_iter, other_end)?;
    let second = EigenEstimate { iterations: second.iterations + other.iterations, ..second };
    Ok(match first_end {
        Extreme::Max => (second, first),
        Extreme::Min => (first, second),
    })
}
