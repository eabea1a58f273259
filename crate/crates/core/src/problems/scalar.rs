use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::optimizers::GradientOracle;

/// Scalar objective with first and second derivatives.
pub trait ScalarObjective: Sync {
    fn value(&self, x: f64) -> f64;
    fn deriv(&self, x: f64) -> f64;
    fn second_deriv(&self, x: f64) -> f64;
}

/// Non-convex scalar test functions.
///
/// - `TwoPit`: `f₁(x) = (2 log cosh x − 5)² / 50`, minima where `2 log cosh x = 5`.
/// - `FmSin`: `f₂(x) = cos(1.6x + (5/3) sin(0.64x) − π)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarTestFunction {
    TwoPit,
    FmSin,
}

/// `log cosh x` without overflow.
fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl ScalarTestFunction {
    /// Positive minimiser of `f₁`, `arccosh(e^{5/2})`.
    pub fn two_pit_minimizer() -> f64 {
        (2.5f64).exp().acosh()
    }

    fn phase(x: f64) -> (f64, f64, f64) {
        let p = 1.6 * x + (5.0 / 3.0) * (0.64 * x).sin() - std::f64::consts::PI;
        let dp = 1.6 + (5.0 / 3.0) * 0.64 * (0.64 * x).cos();
        let ddp = -(5.0 / 3.0) * 0.64 * 0.64 * (0.64 * x).sin();
        (p, dp, ddp)
    }
}

impl ScalarObjective for ScalarTestFunction {
    fn value(&self, x: f64) -> f64 {
        match self {
            Self::TwoPit => (2.0 * log_cosh(x) - 5.0).powi(2) / 50.0,
            Self::FmSin => Self::phase(x).0.cos(),
        }
    }

    fn deriv(&self, x: f64) -> f64 {
        match self {
            Self::TwoPit => 2.0 / 25.0 * (2.0 * log_cosh(x) - 5.0) * x.tanh(),
            Self::FmSin => {
                let (p, dp, _) = Self::phase(x);
                -p.sin() * dp
            }
        }
    }

    fn second_deriv(&self, x: f64) -> f64 {
        match self {
            Self::TwoPit => {
                let t = x.tanh();
                2.0 / 25.0 * (2.0 * t * t + (2.0 * log_cosh(x) - 5.0) * (1.0 - t * t))
            }
            Self::FmSin => {
                let (p, dp, ddp) = Self::phase(x);
                -p.cos() * dp * dp - p.sin() * ddp
            }
        }
    }
}

/// `k x² / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarQuadratic {
    pub curvature: f64,
}

impl ScalarObjective for ScalarQuadratic {
    fn value(&self, x: f64) -> f64 {
        0.5 * self.curvature * x * x
    }

    fn deriv(&self, x: f64) -> f64 {
        self.curvature * x
    }

    fn second_deriv(&self, _x: f64) -> f64 {
        self.curvature
    }
}

macro_rules! scalar_oracle {
    ($t:ty) => {
        impl GradientOracle for $t {
            fn dim(&self) -> usize {
                1
            }

            fn grad(&self, x: &[f64], out: &mut [f64]) {
                out[0] = self.deriv(x[0]);
            }

            fn hessian_apply(&self, x: &[f64], d: &[f64], out: &mut [f64]) -> Result<()> {
                out[0] = self.second_deriv(x[0]) * d[0];
                Ok(())
            }
        }
    };
}

scalar_oracle!(ScalarTestFunction);
scalar_oracle!(ScalarQuadratic);
