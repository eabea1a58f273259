use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::optimizers::GradientOracle;
use crate::rng;

/// `f(x) = ½ (x − c·e)ᵀ A (x − c·e)` with minimiser `x* = c·e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub a: DMatrix<f64>,
    pub shift_c: f64,
    /// Eigenvalues of `A`, ascending, when known from construction.
    pub spectrum: Option<Vec<f64>>,
}

impl Quadratic {
    pub fn new(a: DMatrix<f64>, shift_c: f64) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::InvalidConfig("quadratic matrix must be square and non-empty".into()));
        }
        if !a.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("quadratic matrix"));
        }
        let scale = a.amax().max(1.0);
        if (&a - a.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidConfig("quadratic matrix must be symmetric".into()));
        }
        Ok(Self { a, shift_c, spectrum: None })
    }

    pub fn diagonal(eigenvalues: &[f64], shift_c: f64) -> Result<Self> {
        if eigenvalues.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig("diagonal entries must be finite and non-negative".into()));
        }
        let a = DMatrix::from_diagonal(&DVector::from_column_slice(eigenvalues));
        let mut spectrum = eigenvalues.to_vec();
        spectrum.sort_by(f64::total_cmp);
        Ok(Self { a, shift_c, spectrum: Some(spectrum) })
    }

    pub fn with_shift(self, shift_c: f64) -> Self {
        Self { shift_c, ..self }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn minimizer(&self) -> Vec<f64> {
        vec![self.shift_c; self.dim()]
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let d = DVector::from_iterator(self.dim(), x.iter().map(|v| v - self.shift_c));
        0.5 * d.dot(&(&self.a * &d))
    }
}

/// `A (x − c·e)`.
pub fn quadratic_grad(q: &Quadratic, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(q.dim(), x.len())?;
    let mut out = vec![0.0; x.len()];
    q.grad(x, &mut out);
    Ok(out)
}

impl GradientOracle for Quadratic {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn grad(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for (i, o) in out.iter_mut().enumerate().take(n) {
            *o = x.iter().enumerate().take(n).map(|(j, xj)| self.a[(i, j)] * (xj - self.shift_c)).sum();
        }
    }

    fn hessian_apply(&self, _x: &[f64], d: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), d.len())?;
        let n = self.dim();
        for (i, o) in out.iter_mut().enumerate().take(n) {
            *o = (0..n).map(|j| self.a[(i, j)] * d[j]).sum();
        }
        Ok(())
    }
}

/// Random orthogonal matrix: QR of a Gaussian matrix with the signs of
/// `diag(R)` folded into `Q`.
pub(crate) fn random_orthogonal(dim: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng::stream(seed, 0);
    let g = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut r));
    let qr = g.qr();
    let mut q = qr.q();
    let rr = qr.r();
    for j in 0..dim {
        if rr[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `A = Q D Qᵀ` with `D` holding `mu` and `L` at the ends and the interior
/// eigenvalues uniform in `[mu, L]`, and `Q` a random orthogonal matrix.
pub fn make_test_matrix(mu: f64, l: f64, dim: usize, seed: u64) -> Result<Quadratic> {
    if !(mu > 0.0 && mu <= l && l.is_finite()) {
        return Err(Error::InvalidConfig(format!("need 0 < mu <= L < inf, got mu={mu}, L={l}")));
    }
    if dim < 2 {
        return Err(Error::InvalidConfig("test matrix dimension must be at least 2".into()));
    }
    let mut r = rng::stream(seed, 1);
    let interior = Uniform::new_inclusive(mu, l).expect("mu <= L");
    let mut d = vec![mu];
    d.extend((0..dim - 2).map(|_| interior.sample(&mut r)));
    d.push(l);
    d.sort_by(f64::total_cmp);
    let q = random_orthogonal(dim, seed);
    let a = &q * DMatrix::from_diagonal(&DVector::from_column_slice(&d)) * q.transpose();
    let a = (&a + a.transpose()) * 0.5;
    Ok(Quadratic { a, shift_c: 0.0, spectrum: Some(d) })
}
