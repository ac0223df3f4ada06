//! Principal component projection for diagnostic scatter plots.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Projects rows onto the leading principal components of their sample
/// covariance. Returns the projected rows and the fraction of total
/// variance along each retained component, in descending order.
///
/// Component signs follow a fixed convention: the loading with the
/// largest magnitude (lowest index on ties) is positive, so repeated runs
/// and reflected inputs produce comparable plots.
pub fn pca_project(
    rows: &[&[f64]],
    num_components: usize,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if rows.len() < 2 {
        return Err(Error::InsufficientRows(rows.len()));
    }
    let p = rows[0].len();
    if num_components == 0 || num_components > p {
        return Err(Error::InvalidComponents {
            requested: num_components,
            available: p,
        });
    }
    for r in rows {
        if r.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: r.len(),
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
    }
    let n = rows.len() as f64;
    let mut mean = vec![0.0; p];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(*r) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut cov = DMatrix::zeros(p, p);
    for r in rows {
        for i in 0..p {
            let di = r[i] - mean[i];
            for j in i..p {
                cov[(i, j)] += di * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    cov /= n - 1.0;
    let total = cov.trace();
    if total <= 0.0 {
        return Err(Error::ZeroVariance);
    }

    let eigen = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|a, b| {
        eigen.eigenvalues[*b]
            .partial_cmp(&eigen.eigenvalues[*a])
            .expect("finite eigenvalues")
            .then(a.cmp(b))
    });

    let mut axes: Vec<DVector<f64>> = Vec::with_capacity(num_components);
    let mut fractions = Vec::with_capacity(num_components);
    for &idx in order.iter().take(num_components) {
        let mut v: DVector<f64> = eigen.eigenvectors.column(idx).into_owned();
        let mut lead = 0;
        for i in 1..p {
            if v[i].abs() > v[lead].abs() {
                lead = i;
            }
        }
        if v[lead] < 0.0 {
            v = -v;
        }
        axes.push(v);
        // Small negative eigenvalues are eigensolver noise on rank
        // deficient inputs; report them as zero variance.
        fractions.push(eigen.eigenvalues[idx].max(0.0) / total);
    }

    let mut projected = Vec::with_capacity(rows.len());
    for r in rows {
        let centered = DVector::from_fn(p, |i, _| r[i] - mean[i]);
        projected.push(axes.iter().map(|a| a.dot(&centered)).collect());
    }
    Ok((projected, fractions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn collinear_data_loads_entirely_on_the_first_component() {
        let rows: Vec<Vec<f64>> = (0..5).map(|t| vec![t as f64, 2.0 * t as f64]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let (proj, frac) = pca_project(&refs, 2).unwrap();
        assert_relative_eq!(frac[0], 1.0, epsilon = 1e-12);
        assert!(frac[1].abs() <= 1e-12);
        // Axis (1,2)/sqrt(5) after the sign rule; point (t, 2t) centered
        // at t=2 projects to (t-2) sqrt(5).
        for (t, pr) in proj.iter().enumerate() {
            assert_relative_eq!(
                pr[0],
                (t as f64 - 2.0) * 5.0f64.sqrt(),
                epsilon = 1e-10
            );
            assert!(pr[1].abs() <= 1e-8);
        }
    }

    #[test]
    fn isotropic_data_splits_variance_evenly() {
        let rows = vec![
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
        ];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let (_, frac) = pca_project(&refs, 2).unwrap();
        assert_relative_eq!(frac[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(frac[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn fractions_are_sorted_and_sum_to_one() {
        let rows = vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.1, -0.4],
            vec![2.0, -0.3, 0.2],
            vec![3.0, 0.2, 0.1],
            vec![4.0, -0.1, -0.3],
            vec![5.0, 0.3, 0.4],
        ];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let (_, frac) = pca_project(&refs, 3).unwrap();
        assert!(frac[0] >= frac[1] && frac[1] >= frac[2]);
        assert_relative_eq!(frac.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
        assert!(frac[0] > 0.9, "dominant direction should carry the variance");
    }

    #[test]
    fn sign_convention_makes_the_largest_loading_positive() {
        // Data along (-3, 1): the dominant loading is band 0, so the axis
        // flips to (3, -1)/sqrt(10).
        let rows: Vec<Vec<f64>> = (-2..=2).map(|t| vec![-3.0 * t as f64, t as f64]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let (proj, _) = pca_project(&refs, 1).unwrap();
        // Point at t: centered (-3t, t), projection (-9t - t)/sqrt(10).
        for (i, pr) in proj.iter().enumerate() {
            let t = (i as i64 - 2) as f64;
            assert_relative_eq!(pr[0], -10.0 * t / 10.0f64.sqrt(), epsilon = 1e-10);
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let rows = vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        assert!(matches!(pca_project(&refs, 1), Err(Error::ZeroVariance)));

        let one = [rows[0].as_slice()];
        assert!(matches!(
            pca_project(&one, 1),
            Err(Error::InsufficientRows(1))
        ));

        let rows = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        assert!(matches!(
            pca_project(&refs, 3),
            Err(Error::InvalidComponents { requested: 3, available: 2 })
        ));
        assert!(matches!(
            pca_project(&refs, 0),
            Err(Error::InvalidComponents { .. })
        ));
    }
}
