//! Structural oracles for the classifiers: limiting behaviour and exact
//! invariances that hold by theory, checked without reusing the
//! implementation's own algebra.

use bqda::{fit_bqda, fit_lda, fit_qda, ClassCatalog, ModelKind};

fn catalog() -> ClassCatalog {
    ClassCatalog::new(vec!["a".into(), "b".into()]).unwrap()
}

fn owned(rows: &[Vec<f64>]) -> Vec<&[f64]> {
    rows.iter().map(|r| r.as_slice()).collect()
}

/// With every observation duplicated m times, the Student-t predictives
/// gain degrees of freedom linearly in m and collapse onto the QDA
/// Gaussians, so the probability gap must shrink toward zero.
#[test]
fn bqda_converges_to_qda_under_duplication() {
    let base_a = [
        [0.0, 0.2],
        [1.0, -0.3],
        [0.5, 0.9],
        [-0.7, 0.1],
        [0.3, -0.8],
    ];
    let base_b = [
        [3.0, 2.2],
        [4.0, 1.8],
        [3.5, 3.0],
        [2.6, 2.4],
        [4.2, 2.7],
    ];
    let queries = [
        [1.5, 1.0],
        [2.0, 1.5],
        [0.5, 0.5],
        [3.0, 2.0],
        [1.8, 1.2],
    ];

    let mut gaps = Vec::new();
    for m in [1usize, 4, 16, 64, 256] {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut labels: Vec<&str> = Vec::new();
        for _ in 0..m {
            for r in base_a {
                rows.push(r.to_vec());
                labels.push("a");
            }
            for r in base_b {
                rows.push(r.to_vec());
                labels.push("b");
            }
        }
        let refs = owned(&rows);
        let bayes = fit_bqda(&refs, &labels, &catalog(), &[1.0, 1.0]).unwrap();
        let freq = fit_qda(&refs, &labels, &catalog()).unwrap();
        let mut gap = 0.0f64;
        for q in &queries {
            let pb = bayes.predict_row(q).unwrap();
            let pf = freq.predict_row(q).unwrap();
            for k in 0..2 {
                gap = gap.max((pb[k] - pf[k]).abs());
            }
        }
        gaps.push(gap);
    }
    for w in gaps.windows(2) {
        assert!(w[1] < w[0], "gaps must shrink: {gaps:?}");
    }
    assert!(
        *gaps.last().unwrap() < 5e-3,
        "gap at m=256 too large: {gaps:?}"
    );
}

/// Shared-covariance log odds are exactly linear in x, so their second
/// difference over an equally spaced grid vanishes; per-class covariances
/// leave a genuine quadratic term.
#[test]
fn lda_log_odds_are_linear_qda_log_odds_are_not() {
    let rows: Vec<Vec<f64>> = vec![
        vec![0.0],
        vec![1.0],
        vec![2.0],
        vec![3.0],
        vec![10.0],
        vec![14.0],
        vec![18.0],
        vec![22.0],
    ];
    let labels = vec!["a", "a", "a", "a", "b", "b", "b", "b"];
    let refs = owned(&rows);
    let lda = fit_lda(&refs, &labels, &catalog()).unwrap();
    let qda = fit_qda(&refs, &labels, &catalog()).unwrap();

    // Work with log densities directly; probabilities underflow far from
    // the class means but log densities stay finite.
    let log_odds = |model: &bqda::FittedModel, x: f64| -> f64 {
        let xv = nalgebra::DVector::from_row_slice(&[x]);
        let counts = model.per_class();
        let la = (counts[0].count as f64).ln()
            + model.gaussian(0).unwrap().logpdf(&xv).unwrap();
        let lb = (counts[1].count as f64).ln()
            + model.gaussian(1).unwrap().logpdf(&xv).unwrap();
        la - lb
    };

    let grid = [-5.0, 0.0, 5.0, 10.0, 15.0, 20.0];
    let second_diff = |vals: &[f64]| -> Vec<f64> {
        vals.windows(3)
            .map(|w| w[2] - 2.0 * w[1] + w[0])
            .collect()
    };
    let lda_vals: Vec<f64> = grid.iter().map(|x| log_odds(&lda, *x)).collect();
    let qda_vals: Vec<f64> = grid.iter().map(|x| log_odds(&qda, *x)).collect();
    for d in second_diff(&lda_vals) {
        assert!(d.abs() < 1e-9, "lda log odds must be linear, got {d}");
    }
    assert!(
        second_diff(&qda_vals).iter().any(|d| d.abs() > 0.01),
        "qda log odds should curve: {qda_vals:?}"
    );
}

/// QDA probabilities are invariant under any invertible affine map of the
/// band space: both class densities pick up the same Jacobian factor.
#[test]
fn qda_probabilities_survive_affine_maps() {
    let rows = vec![
        vec![0.0, 0.2],
        vec![1.0, -0.3],
        vec![0.5, 0.9],
        vec![-0.7, 0.1],
        vec![4.0, 2.2],
        vec![5.0, 1.8],
        vec![4.5, 3.0],
        vec![3.6, 2.4],
    ];
    let labels = vec!["a", "a", "a", "a", "b", "b", "b", "b"];
    // x' = A x + t with a shear, unequal scales, and a shift.
    let a = [[1.2, 0.3], [-0.2, 0.8]];
    let t = [3.0, -1.0];
    let map = |r: &[f64]| -> Vec<f64> {
        vec![
            a[0][0] * r[0] + a[0][1] * r[1] + t[0],
            a[1][0] * r[0] + a[1][1] * r[1] + t[1],
        ]
    };
    let mapped: Vec<Vec<f64>> = rows.iter().map(|r| map(r)).collect();

    let base = fit_qda(&owned(&rows), &labels, &catalog()).unwrap();
    let moved = fit_qda(&owned(&mapped), &labels, &catalog()).unwrap();
    for q in [[2.0, 1.0], [0.0, 0.0], [4.4, 2.5], [-1.0, 3.0]] {
        let p0 = base.predict_row(&q).unwrap();
        let p1 = moved.predict_row(&map(&q)).unwrap();
        for k in 0..2 {
            assert!(
                (p0[k] - p1[k]).abs() < 1e-8,
                "query {q:?} class {k}: {} vs {}",
                p0[k],
                p1[k]
            );
        }
    }
}

/// Two observations per class is the fitting floor for the Bayesian kind;
/// the result must still be a proper probability model.
#[test]
fn bqda_works_at_the_observation_floor() {
    let rows = vec![
        vec![0.0, 0.1],
        vec![1.0, -0.1],
        vec![5.0, 4.9],
        vec![6.0, 5.2],
    ];
    let labels = vec!["a", "a", "b", "b"];
    let model = fit_bqda(&owned(&rows), &labels, &catalog(), &[1.0, 1.0]).unwrap();
    assert_eq!(model.kind(), ModelKind::Bqda);
    let table = model.predict_proba(&owned(&rows)).unwrap();
    table.check().unwrap();
    // Training points should lean toward their own class.
    assert!(table.rows[0][0] > 0.5);
    assert!(table.rows[3][1] > 0.5);
}
