//! Normal-inverse-Wishart conjugate machinery.
//!
//! The NIW distribution is the conjugate prior for a multivariate Gaussian
//! with unknown mean and covariance. Three operations live here: the
//! closed-form posterior update, the Student-t posterior predictive, and a
//! data-dependent default prior that shrinks toward the per-class sample
//! scatter. Together they are the whole Bayesian core of the classifier;
//! everything above this module is bookkeeping.

use nalgebra::{DMatrix, DVector};

use crate::dist::StudentTParams;
use crate::error::{Error, Result};
use crate::spd::SpdMatrix;

/// Normal-inverse-Wishart parameters (mu0, lambda, Psi, nu).
///
/// lambda >= 0 is allowed so the data-dependent prior can place zero weight
/// on its location; the posterior predictive requires lambda > 0, which any
/// posterior conditioned on at least one observation satisfies.
#[derive(Debug, Clone)]
pub struct NiwParams {
    mu0: DVector<f64>,
    lambda: f64,
    psi: SpdMatrix,
    nu: f64,
}

impl NiwParams {
    pub fn new(mu0: DVector<f64>, lambda: f64, psi: SpdMatrix, nu: f64) -> Result<Self> {
        let p = psi.dim();
        if mu0.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: mu0.len(),
            });
        }
        if mu0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidLambda(lambda));
        }
        let min = p as f64 - 1.0;
        if !nu.is_finite() || nu <= min {
            return Err(Error::InvalidNu { nu, min });
        }
        Ok(NiwParams {
            mu0,
            lambda,
            psi,
            nu,
        })
    }

    pub fn mu0(&self) -> &DVector<f64> {
        &self.mu0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn psi(&self) -> &SpdMatrix {
        &self.psi
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }
}

/// Sample mean and unnormalized scatter sum_i (x_i - mean)(x_i - mean)'.
///
/// Two passes keep the scatter numerically honest; the upper triangle is
/// accumulated and mirrored so the result is exactly symmetric.
pub(crate) fn mean_and_scatter(data: &[DVector<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = data.len();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let p = data[0].len();
    if p == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    for x in data {
        if x.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
    }
    let mut mean = DVector::zeros(p);
    for x in data {
        mean += x;
    }
    mean /= n as f64;
    let mut scatter = DMatrix::zeros(p, p);
    let mut d = DVector::zeros(p);
    for x in data {
        for i in 0..p {
            d[i] = x[i] - mean[i];
        }
        for i in 0..p {
            for j in i..p {
                scatter[(i, j)] += d[i] * d[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            scatter[(i, j)] = scatter[(j, i)];
        }
    }
    Ok((mean, scatter))
}

/// Conjugate posterior update given observations assumed i.i.d. Gaussian:
///
///   lambda_n = lambda + n
///   mu_n     = (lambda mu0 + n xbar) / lambda_n
///   nu_n     = nu + n
///   Psi_n    = Psi + S + (lambda n / lambda_n) (xbar - mu0)(xbar - mu0)'
///
/// where S is the scatter about the sample mean.
pub fn niw_posterior(data: &[DVector<f64>], prior: &NiwParams) -> Result<NiwParams> {
    let (mean, scatter) = mean_and_scatter(data)?;
    let p = prior.dim();
    if mean.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: mean.len(),
        });
    }
    let n = data.len() as f64;
    let lambda_n = prior.lambda + n;
    let mu_n = (&prior.mu0 * prior.lambda + &mean * n) / lambda_n;
    let nu_n = prior.nu + n;
    let dev = &mean - &prior.mu0;
    let coeff = prior.lambda * n / lambda_n;
    let mut psi_n = prior.psi.entries() + scatter;
    for i in 0..p {
        for j in 0..p {
            psi_n[(i, j)] += coeff * dev[i] * dev[j];
        }
    }
    NiwParams::new(mu_n, lambda_n, SpdMatrix::new(psi_n)?, nu_n)
}

/// Marginalizing the Gaussian parameters under an NIW law leaves a
/// multivariate Student-t for the next observation:
///
///   T(mu_n, Psi_n (lambda_n + 1) / (lambda_n (nu_n - p + 1)), nu_n - p + 1)
pub fn niw_posterior_predictive(params: &NiwParams) -> Result<StudentTParams> {
    let p = params.dim() as f64;
    if params.lambda <= 0.0 {
        return Err(Error::ZeroLambdaPredictive(params.lambda));
    }
    let dof = params.nu - p + 1.0;
    if !dof.is_finite() || dof <= 0.0 {
        return Err(Error::InvalidDof(dof));
    }
    let coeff = (params.lambda + 1.0) / (params.lambda * dof);
    let scale = SpdMatrix::new(params.psi.entries() * coeff)?;
    StudentTParams::new(params.mu0.clone(), scale, dof)
}

/// Data-dependent default prior for a K-class problem:
///
///   mu0 = xbar, lambda = 0, nu = p + 2,
///   Psi = diag(S) / (n K^(2/p))
///
/// with S the scatter about the sample mean. lambda = 0 makes the location
/// carry no weight of its own, so the posterior location is exactly the
/// sample mean and the deviation term of the update vanishes. The diagonal
/// shrinkage keeps Psi invertible whenever every band actually varies;
/// all-identical observations are rejected rather than patched.
pub fn default_prior(data: &[DVector<f64>], num_classes: usize) -> Result<NiwParams> {
    if num_classes == 0 {
        return Err(Error::InvalidClassCount(num_classes));
    }
    if data.len() < 2 {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        return Err(Error::InsufficientPriorData);
    }
    let (mean, scatter) = mean_and_scatter(data)?;
    let p = mean.len();
    if (0..p).any(|i| scatter[(i, i)] <= 0.0) {
        return Err(Error::DegenerateScatter);
    }
    let n = data.len() as f64;
    let shrink = n * (num_classes as f64).powf(2.0 / p as f64);
    let mut psi = DMatrix::zeros(p, p);
    for i in 0..p {
        psi[(i, i)] = scatter[(i, i)] / shrink;
    }
    NiwParams::new(mean, 0.0, SpdMatrix::new(psi)?, p as f64 + 2.0)
}
