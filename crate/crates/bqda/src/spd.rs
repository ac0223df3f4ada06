use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry check, scaled by the largest
/// absolute entry of the matrix.
pub(crate) const SYMMETRY_RTOL: f64 = 1e-12;

/// A symmetric positive definite matrix with a cached lower Cholesky factor.
///
/// Construction is the validation gate: the input must be square, finite,
/// symmetric to within [`SYMMETRY_RTOL`] relative to its largest entry, and
/// factorizable with strictly positive pivots. A failed factorization is
/// reported as [`Error::NotPositiveDefinite`]; nothing is regularized on the
/// caller's behalf, because a singular covariance is a meaningful outcome
/// for the classifiers built on top of this type.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    entries: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_det: f64,
}

impl SpdMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows().max(1),
                got: entries.ncols(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let amax = entries.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for i in 0..entries.nrows() {
            for j in 0..i {
                if (entries[(i, j)] - entries[(j, i)]).abs() > SYMMETRY_RTOL * amax {
                    return Err(Error::NotSymmetric);
                }
            }
        }
        let chol = cholesky_lower(&entries).ok_or(Error::NotPositiveDefinite)?;
        let log_det = 2.0 * chol.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(SpdMatrix {
            entries,
            chol,
            log_det,
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn chol_lower(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// log determinant, read off the cached factor.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Quadratic form d' * inv(S) * d, computed as the squared norm of the
    /// forward-substitution solve L z = d. The inverse is never formed.
    pub fn quad_form(&self, d: &DVector<f64>) -> Result<f64> {
        let n = self.dim();
        if d.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: d.len(),
            });
        }
        let mut z = d.clone();
        forward_solve(&self.chol, &mut z);
        Ok(z.dot(&z))
    }

    /// Solves S x = b through the cached factor.
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let mut x = b.clone();
        forward_solve(&self.chol, &mut x);
        backward_solve(&self.chol, &mut x);
        Ok(x)
    }
}

/// Lower-triangular Cholesky factorization with strict pivot checks: a pivot
/// that is zero, negative, or non-finite fails the factorization. This is
/// the code path that turns a rank-deficient class covariance into a hard
/// error instead of a quietly wrong density.
fn cholesky_lower(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !d.is_finite() || d <= 0.0 {
            return None;
        }
        let pivot = d.sqrt();
        l[(j, j)] = pivot;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / pivot;
        }
    }
    Some(l)
}

/// In-place solve of L z = b for lower-triangular L.
fn forward_solve(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// In-place solve of L' z = b for lower-triangular L.
fn backward_solve(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    let n = l.nrows();
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spd2(a: f64, b: f64, c: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, b, b, c])
    }

    #[test]
    fn rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(SpdMatrix::new(m), Err(Error::NotSymmetric)));
    }

    #[test]
    fn rejects_indefinite_and_singular() {
        let indefinite = spd2(1.0, 2.0, 1.0);
        assert!(matches!(
            SpdMatrix::new(indefinite),
            Err(Error::NotPositiveDefinite)
        ));
        // Rank one: the second pivot is exactly zero.
        let singular = spd2(1.0, 1.0, 1.0);
        assert!(matches!(
            SpdMatrix::new(singular),
            Err(Error::NotPositiveDefinite)
        ));
        let zero = DMatrix::zeros(2, 2);
        assert!(matches!(
            SpdMatrix::new(zero),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn rejects_non_finite() {
        let m = spd2(1.0, f64::NAN, 1.0);
        assert!(matches!(SpdMatrix::new(m), Err(Error::NonFinite)));
    }

    #[test]
    fn tolerates_rounding_level_asymmetry() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5 + 1e-16, 0.5, 1.0]);
        assert!(SpdMatrix::new(m).is_ok());
    }

    #[test]
    fn log_det_matches_direct_determinant() {
        let m = spd2(2.0, 0.3, 1.5);
        let s = SpdMatrix::new(m).unwrap();
        let det: f64 = 2.0 * 1.5 - 0.3 * 0.3;
        assert_relative_eq!(s.log_det(), det.ln(), max_relative = 1e-10);
    }

    #[test]
    fn quad_form_matches_explicit_inverse_2x2() {
        let (a, b, c) = (2.0, 0.5, 1.0);
        let s = SpdMatrix::new(spd2(a, b, c)).unwrap();
        let d = DVector::from_row_slice(&[1.0, -2.0]);
        // inv = [[c, -b], [-b, a]] / det for a 2x2 symmetric matrix.
        let det = a * c - b * b;
        let expect =
            (c * d[0] * d[0] - 2.0 * b * d[0] * d[1] + a * d[1] * d[1]) / det;
        assert_relative_eq!(s.quad_form(&d).unwrap(), expect, max_relative = 1e-10);
    }

    #[test]
    fn solve_recovers_rhs() {
        let s = SpdMatrix::new(spd2(3.0, 1.0, 2.0)).unwrap();
        let b = DVector::from_row_slice(&[0.7, -1.1]);
        let x = s.solve(&b).unwrap();
        let back = s.entries() * &x;
        assert_relative_eq!(back[0], b[0], max_relative = 1e-12);
        assert_relative_eq!(back[1], b[1], max_relative = 1e-12);
    }

    #[test]
    fn quad_form_dimension_mismatch() {
        let s = SpdMatrix::new(spd2(1.0, 0.0, 1.0)).unwrap();
        let d = DVector::from_row_slice(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            s.quad_form(&d),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    proptest! {
        // Random SPD matrices built as A'A + I stay factorizable, and the
        // Cholesky quad form agrees with the explicit 2x2 inverse.
        #[test]
        fn quad_form_agrees_with_inverse(
            a in -3.0f64..3.0, b in -3.0f64..3.0,
            c in -3.0f64..3.0, d in -3.0f64..3.0,
            x0 in -5.0f64..5.0, x1 in -5.0f64..5.0,
        ) {
            let m00 = a * a + c * c + 1.0;
            let m01 = a * b + c * d;
            let m11 = b * b + d * d + 1.0;
            let s = SpdMatrix::new(spd2(m00, m01, m11)).unwrap();
            let v = DVector::from_row_slice(&[x0, x1]);
            let det = m00 * m11 - m01 * m01;
            let expect =
                (m11 * x0 * x0 - 2.0 * m01 * x0 * x1 + m00 * x1 * x1) / det;
            let got = s.quad_form(&v).unwrap();
            prop_assert!((got - expect).abs() <= 1e-10 * expect.abs().max(1.0));
        }
    }
}
