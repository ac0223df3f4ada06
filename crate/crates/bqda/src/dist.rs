//! Multivariate Gaussian and Student-t log densities.
//!
//! Every density is evaluated in log space through the cached Cholesky
//! factor of its covariance or scale matrix: quadratic forms come from a
//! triangular solve, log determinants from the factor diagonal, and the
//! Student-t normalization from log-gamma. Nothing exponentiates an
//! intermediate value, so likelihood ratios stay usable far into the tails.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::spd::SpdMatrix;

const LN_2PI: f64 = 1.837_877_066_409_345_4;

/// Mean vector plus SPD covariance.
#[derive(Debug, Clone)]
pub struct GaussianParams {
    mean: DVector<f64>,
    cov: SpdMatrix,
}

impl GaussianParams {
    pub fn new(mean: DVector<f64>, cov: SpdMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                got: mean.len(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(GaussianParams { mean, cov })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &SpdMatrix {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn logpdf(&self, x: &DVector<f64>) -> Result<f64> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let d = x - &self.mean;
        let q = self.cov.quad_form(&d)?;
        let p = self.mean.len() as f64;
        Ok(-0.5 * (p * LN_2PI + self.cov.log_det() + q))
    }
}

/// Location vector, SPD scale matrix, and degrees of freedom.
///
/// The scale matrix is not the covariance; for dof > 2 the covariance is
/// scale * dof / (dof - 2).
#[derive(Debug, Clone)]
pub struct StudentTParams {
    loc: DVector<f64>,
    scale: SpdMatrix,
    dof: f64,
}

impl StudentTParams {
    pub fn new(loc: DVector<f64>, scale: SpdMatrix, dof: f64) -> Result<Self> {
        if loc.len() != scale.dim() {
            return Err(Error::DimensionMismatch {
                expected: scale.dim(),
                got: loc.len(),
            });
        }
        if loc.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if !dof.is_finite() || dof <= 0.0 {
            return Err(Error::InvalidDof(dof));
        }
        Ok(StudentTParams { loc, scale, dof })
    }

    pub fn loc(&self) -> &DVector<f64> {
        &self.loc
    }

    pub fn scale(&self) -> &SpdMatrix {
        &self.scale
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn dim(&self) -> usize {
        self.loc.len()
    }

    pub fn logpdf(&self, x: &DVector<f64>) -> Result<f64> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let d = x - &self.loc;
        let q = self.scale.quad_form(&d)?;
        let p = self.loc.len() as f64;
        let nu = self.dof;
        Ok(ln_gamma(0.5 * (nu + p)) - ln_gamma(0.5 * nu)
            - 0.5 * self.scale.log_det()
            - 0.5 * p * (nu * PI).ln()
            - 0.5 * (nu + p) * (q / nu).ln_1p())
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Log-gamma via the Lanczos approximation (g = 7, 9 terms), with the
/// reflection formula below 0.5. Relative error stays under 1e-12 across
/// the degree-of-freedom range the classifiers produce.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Gamma(x) Gamma(1-x) = pi / sin(pi x)
        PI.ln() - (PI * x).sin().ln() - ln_gamma(1.0 - x)
    } else {
        let z = x - 1.0;
        let mut a = LANCZOS[0];
        for (i, c) in LANCZOS.iter().enumerate().skip(1) {
            a += c / (z + i as f64);
        }
        let t = z + LANCZOS_G + 0.5;
        0.5 * LN_2PI + (z + 0.5) * t.ln() - t + a.ln()
    }
}
