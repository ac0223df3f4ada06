//! Monte Carlo sampler for normal-inverse-Wishart laws, used as an
//! independent oracle for closed-form posterior predictive densities.
//!
//! Sampling goes through the Bartlett decomposition: W ~ Wishart(Psi^-1, nu)
//! as W = (L A)(L A)^T with L the Cholesky factor of Psi^-1 and A lower
//! triangular with chi distributed diagonal, then Sigma = W^-1 and
//! mu | Sigma ~ N(mu0, Sigma / lambda). Densities and covariance entries
//! are evaluated from the factor C = L A directly, never by forming W.

// Shared by several test targets; not every target uses every helper.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{ChiSquared, StandardNormal};

pub struct NiwSampler {
    mu0: DVector<f64>,
    lambda: f64,
    l_psi_inv: DMatrix<f64>,
    nu: f64,
    p: usize,
}

/// One draw (mu, Sigma), with Sigma held as the lower factor C of
/// Sigma^-1 = C C^T.
pub struct NiwDraw {
    pub mu: DVector<f64>,
    c: DMatrix<f64>,
}

fn solve_lower(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let p = b.len();
    let mut x = DVector::zeros(p);
    for i in 0..p {
        let mut s = b[i];
        for j in 0..i {
            s -= l[(i, j)] * x[j];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves L^T x = b for lower triangular L.
fn solve_lower_transpose(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let p = b.len();
    let mut x = DVector::zeros(p);
    for i in (0..p).rev() {
        let mut s = b[i];
        for j in (i + 1)..p {
            s -= l[(j, i)] * x[j];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

fn cholesky_lower(m: &DMatrix<f64>) -> DMatrix<f64> {
    let p = m.nrows();
    let mut l = DMatrix::zeros(p, p);
    for j in 0..p {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        assert!(d > 0.0, "oracle scale matrix must be positive definite");
        l[(j, j)] = d.sqrt();
        for i in (j + 1)..p {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / l[(j, j)];
        }
    }
    l
}

impl NiwSampler {
    pub fn new(mu0: DVector<f64>, lambda: f64, psi: DMatrix<f64>, nu: f64) -> Self {
        let p = mu0.len();
        assert!(lambda > 0.0, "sampler needs a positive lambda");
        assert!(nu > p as f64 - 1.0, "sampler needs nu > p - 1");
        // Invert Psi through its Cholesky factor, then symmetrize to kill
        // rounding skew before factoring the inverse.
        let l_psi = cholesky_lower(&psi);
        let mut inv = DMatrix::zeros(p, p);
        for col in 0..p {
            let mut e = DVector::zeros(p);
            e[col] = 1.0;
            let y = solve_lower(&l_psi, &e);
            let x = solve_lower_transpose(&l_psi, &y);
            inv.set_column(col, &x);
        }
        let inv = (&inv + inv.transpose()) * 0.5;
        let l_psi_inv = cholesky_lower(&inv);
        NiwSampler {
            mu0,
            lambda,
            l_psi_inv,
            nu,
            p,
        }
    }

    pub fn sample(&self, rng: &mut ChaCha12Rng) -> NiwDraw {
        let p = self.p;
        // Bartlett factor: diagonal sqrt of chi-square with nu - i dof.
        let mut a = DMatrix::zeros(p, p);
        for i in 0..p {
            let chi = ChiSquared::new(self.nu - i as f64).expect("positive dof");
            a[(i, i)] = rng.sample::<f64, _>(chi).sqrt();
            for j in 0..i {
                a[(i, j)] = rng.sample::<f64, _>(StandardNormal);
            }
        }
        let c = &self.l_psi_inv * a;
        // mu = mu0 + C^-T z / sqrt(lambda) has covariance Sigma / lambda.
        let z = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = solve_lower_transpose(&c, &z);
        let mu = &self.mu0 + y / self.lambda.sqrt();
        NiwDraw { mu, c }
    }
}

impl NiwDraw {
    /// log N(x | mu, Sigma) evaluated through the factor of Sigma^-1:
    /// the quadratic form is |C^T (x - mu)|^2 and
    /// ln det Sigma = -2 sum ln diag C.
    pub fn log_gauss(&self, x: &DVector<f64>) -> f64 {
        let p = self.mu.len();
        let d = x - &self.mu;
        let z = self.c.transpose() * d;
        let q = z.dot(&z);
        let log_det_sigma = -2.0 * (0..p).map(|i| self.c[(i, i)].ln()).sum::<f64>();
        -0.5 * (p as f64 * (2.0 * std::f64::consts::PI).ln() + log_det_sigma + q)
    }

    /// log N(x | center, scale * Sigma) for this draw's Sigma, ignoring
    /// the drawn location. Averaging this with center = mu_N and
    /// scale = 1 + 1/lambda_N integrates the location analytically per
    /// covariance draw, which removes the heavy-tailed spikes the joint
    /// estimator produces when a small covariance lands near x; the
    /// covariance mixture stays Monte Carlo.
    pub fn log_gauss_scaled(&self, x: &DVector<f64>, center: &DVector<f64>, scale: f64) -> f64 {
        let p = center.len();
        let d = x - center;
        let z = self.c.transpose() * d;
        let q = z.dot(&z) / scale;
        let log_det = p as f64 * scale.ln()
            - 2.0 * (0..p).map(|i| self.c[(i, i)].ln()).sum::<f64>();
        -0.5 * (p as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + q)
    }

    /// Materializes Sigma = C^-T C^-1.
    pub fn sigma(&self) -> DMatrix<f64> {
        let p = self.mu.len();
        let mut inv_c = DMatrix::zeros(p, p);
        for col in 0..p {
            let mut e = DVector::zeros(p);
            e[col] = 1.0;
            inv_c.set_column(col, &solve_lower(&self.c, &e));
        }
        inv_c.transpose() * inv_c
    }
}

/// Mean and standard-error-of-mean accumulator.
#[derive(Default, Clone)]
pub struct MeanAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn standard_error(&self) -> f64 {
        assert!(self.n > 1);
        (self.m2 / (self.n as f64 - 1.0) / self.n as f64).sqrt()
    }
}
