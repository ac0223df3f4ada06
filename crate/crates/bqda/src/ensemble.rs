//! Fitting and evaluation protocols over multi-realization cubes.
//!
//! Two ways to consume the realization axis:
//!
//! * pool every realization of every training pixel into one fit
//!   (`fit_pooled`), which inflates class counts by R and is the intended
//!   protocol for the Bayesian model;
//! * fit one model per realization (`ensemble_fit`, frequentist kinds
//!   only) and average their probability rows at prediction time, each
//!   member scoring one realization of the query pixel.
//!
//! Averaging uses a running mean, so an ensemble of identical models
//! applied without permutation reproduces the single-model averaged
//! prediction bit for bit.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::classify::{
    fit_bqda, fit_lda, fit_qda, ClassCatalog, FittedModel, ModelKind, ProbabilityTable,
};
use crate::data::DataCube;
use crate::error::{Error, Result};

fn checked_pixel(cube: &DataCube, pixel: usize) -> Result<usize> {
    if pixel >= cube.num_pixels() {
        return Err(Error::CubeStructure(format!(
            "pixel index {pixel} out of range, cube has {}",
            cube.num_pixels()
        )));
    }
    Ok(pixel)
}

/// Gathers (band vector, label) pairs for the given pixels, over all
/// realizations or a single one.
fn training_rows<'c>(
    cube: &'c DataCube,
    pixels: &[usize],
    realization: Option<usize>,
) -> Result<(Vec<&'c [f64]>, Vec<&'c str>)> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for &pixel in pixels {
        checked_pixel(cube, pixel)?;
        let label = cube
            .label(pixel)
            .ok_or(Error::UnlabeledPixel(cube.pixel_ids()[pixel]))?;
        match realization {
            Some(r) => {
                rows.push(cube.band_vector(pixel, r));
                labels.push(label);
            }
            None => {
                for r in 0..cube.num_realizations() {
                    rows.push(cube.band_vector(pixel, r));
                    labels.push(label);
                }
            }
        }
    }
    Ok((rows, labels))
}

fn fit_kind(
    kind: ModelKind,
    rows: &[&[f64]],
    labels: &[&str],
    catalog: &ClassCatalog,
    alpha: &[f64],
) -> Result<FittedModel> {
    match kind {
        ModelKind::Bqda => fit_bqda(rows, labels, catalog, alpha),
        ModelKind::Qda => fit_qda(rows, labels, catalog),
        ModelKind::Lda => fit_lda(rows, labels, catalog),
    }
}

/// Fits one model on all realizations of the training pixels pooled
/// together. `alpha` only affects the Bayesian kind.
pub fn fit_pooled(
    cube: &DataCube,
    kind: ModelKind,
    pixels: &[usize],
    catalog: &ClassCatalog,
    alpha: &[f64],
) -> Result<FittedModel> {
    let (rows, labels) = training_rows(cube, pixels, None)?;
    fit_kind(kind, &rows, &labels, catalog, alpha)
}

/// Fits one model on a single realization of the training pixels.
pub fn fit_on_realization(
    cube: &DataCube,
    kind: ModelKind,
    realization: usize,
    pixels: &[usize],
    catalog: &ClassCatalog,
    alpha: &[f64],
) -> Result<FittedModel> {
    if realization >= cube.num_realizations() {
        return Err(Error::RealizationOutOfRange {
            given: realization,
            count: cube.num_realizations(),
        });
    }
    let (rows, labels) = training_rows(cube, pixels, Some(realization))?;
    fit_kind(kind, &rows, &labels, catalog, alpha)
}

/// One frequentist model per realization. The Bayesian kind already
/// absorbs the realization spread through pooling, so it is rejected here.
pub fn ensemble_fit(
    cube: &DataCube,
    kind: ModelKind,
    pixels: &[usize],
    catalog: &ClassCatalog,
) -> Result<Vec<FittedModel>> {
    if kind == ModelKind::Bqda {
        return Err(Error::InvalidEnsembleKind(kind.to_string()));
    }
    let mut models = Vec::with_capacity(cube.num_realizations());
    for r in 0..cube.num_realizations() {
        let model = fit_on_realization(cube, kind, r, pixels, catalog, &[])
            .map_err(|e| Error::RealizationFit {
                index: r,
                source: Box::new(e),
            })?;
        models.push(model);
    }
    Ok(models)
}

fn check_bands(model: &FittedModel, cube: &DataCube) -> Result<()> {
    if model.num_bands() != cube.num_bands() {
        return Err(Error::BandMismatch {
            model: model.num_bands(),
            cube: cube.num_bands(),
        });
    }
    Ok(())
}

/// Leaves an exactly normalized row alone so that averaging identical
/// rows stays bit-stable; anything drifted beyond 1e-12 is rescaled.
fn renormalize(row: &mut [f64]) {
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        for p in row.iter_mut() {
            *p /= s;
        }
    }
}

/// Averaged single-model prediction: the model scores every realization
/// of each pixel and the rows are running-mean averaged.
pub fn predict_averaged(
    model: &FittedModel,
    cube: &DataCube,
    pixels: &[usize],
) -> Result<ProbabilityTable> {
    check_bands(model, cube)?;
    let k = model.catalog().len();
    let mut rows = Vec::with_capacity(pixels.len());
    let mut pixel_ids = Vec::with_capacity(pixels.len());
    for &pixel in pixels {
        checked_pixel(cube, pixel)?;
        let mut mean = vec![0.0; k];
        for r in 0..cube.num_realizations() {
            let row = model.predict_row(cube.band_vector(pixel, r))?;
            for (m, x) in mean.iter_mut().zip(&row) {
                *m += (x - *m) / (r as f64 + 1.0);
            }
        }
        renormalize(&mut mean);
        rows.push(mean);
        pixel_ids.push(cube.pixel_ids()[pixel]);
    }
    Ok(ProbabilityTable {
        classes: model.catalog().names().to_vec(),
        pixel_ids,
        rows,
    })
}

/// Ensemble prediction: member j scores realization perm(j) of each pixel
/// and the rows are running-mean averaged. With `permute` the assignment
/// of members to realizations is a seeded uniform permutation; without it
/// member j scores realization j.
pub fn ensemble_predict(
    models: &[FittedModel],
    cube: &DataCube,
    pixels: &[usize],
    seed: u64,
    permute: bool,
) -> Result<ProbabilityTable> {
    if models.is_empty() {
        return Err(Error::EmptyData);
    }
    if models.len() != cube.num_realizations() {
        return Err(Error::EnsembleSizeMismatch {
            models: models.len(),
            realizations: cube.num_realizations(),
        });
    }
    for m in models {
        check_bands(m, cube)?;
        if m.catalog() != models[0].catalog() {
            return Err(Error::ModelFormat(
                "ensemble members disagree on classes".into(),
            ));
        }
    }
    let mut perm: Vec<usize> = (0..models.len()).collect();
    if permute {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        perm.shuffle(&mut rng);
    }
    let k = models[0].catalog().len();
    let mut rows = Vec::with_capacity(pixels.len());
    let mut pixel_ids = Vec::with_capacity(pixels.len());
    for &pixel in pixels {
        checked_pixel(cube, pixel)?;
        let mut mean = vec![0.0; k];
        for (j, model) in models.iter().enumerate() {
            let row = model.predict_row(cube.band_vector(pixel, perm[j]))?;
            for (m, x) in mean.iter_mut().zip(&row) {
                *m += (x - *m) / (j as f64 + 1.0);
            }
        }
        renormalize(&mut mean);
        rows.push(mean);
        pixel_ids.push(cube.pixel_ids()[pixel]);
    }
    Ok(ProbabilityTable {
        classes: models[0].catalog().names().to_vec(),
        pixel_ids,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DataCube;

    // 6 pixels, 2 realizations, 1 band. Realization 1 is realization 0
    // shifted by small per-pixel offsets, so per-realization fits differ.
    fn cube() -> DataCube {
        let labels = ["a", "a", "a", "b", "b", "b"];
        let base = [0.0, 1.0, 2.5, 10.0, 11.5, 12.0];
        let offset = [0.1, -0.2, 0.3, -0.1, 0.2, -0.3];
        let mut values = Vec::new();
        for i in 0..6 {
            values.push(base[i]);
            values.push(base[i] + offset[i]);
        }
        DataCube::from_parts(
            (0..6).collect(),
            labels.iter().map(|l| Some(l.to_string())).collect(),
            1,
            2,
            values,
        )
        .unwrap()
    }

    fn catalog() -> ClassCatalog {
        ClassCatalog::new(vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn pooling_inflates_counts_by_realizations() {
        let cube = cube();
        let model = fit_pooled(&cube, ModelKind::Bqda, &[0, 1, 2, 3, 4, 5], &catalog(), &[1.0, 1.0])
            .unwrap();
        assert_eq!(model.per_class()[0].count, 6);
        assert_eq!(model.per_class()[1].count, 6);
        let single =
            fit_on_realization(&cube, ModelKind::Bqda, 0, &[0, 1, 2, 3, 4, 5], &catalog(), &[1.0, 1.0])
                .unwrap();
        assert_eq!(single.per_class()[0].count, 3);
    }

    #[test]
    fn ensemble_fit_is_frequentist_only() {
        let cube = cube();
        assert!(matches!(
            ensemble_fit(&cube, ModelKind::Bqda, &[0, 1, 2, 3, 4, 5], &catalog()),
            Err(Error::InvalidEnsembleKind(k)) if k == "bqda"
        ));
        let models = ensemble_fit(&cube, ModelKind::Qda, &[0, 1, 2, 3, 4, 5], &catalog()).unwrap();
        assert_eq!(models.len(), 2);
    }

    #[test]
    fn unpermuted_ensemble_matches_brute_force_average() {
        let cube = cube();
        let pixels = [0, 1, 2, 3, 4, 5];
        let models = ensemble_fit(&cube, ModelKind::Qda, &pixels, &catalog()).unwrap();
        let table = ensemble_predict(&models, &cube, &pixels, 7, false).unwrap();
        for (i, &pixel) in pixels.iter().enumerate() {
            let a = models[0].predict_row(cube.band_vector(pixel, 0)).unwrap();
            let b = models[1].predict_row(cube.band_vector(pixel, 1)).unwrap();
            for k in 0..2 {
                let mut want = a[k];
                want += (b[k] - want) / 2.0;
                let got = table.rows[i][k];
                assert!((got - want).abs() <= 1e-15, "pixel {pixel} class {k}");
            }
        }
        table.check().unwrap();
    }

    #[test]
    fn identical_members_reproduce_the_averaged_single_model() {
        // All realizations equal: per-realization fits are identical, and
        // the unpermuted ensemble must equal the averaged single model to
        // the bit.
        let labels = ["a", "a", "b", "b"];
        let base = [0.0, 1.0, 10.0, 11.0];
        let mut values = Vec::new();
        for b in base {
            for _ in 0..3 {
                values.push(b);
            }
        }
        let cube = DataCube::from_parts(
            (0..4).collect(),
            labels.iter().map(|l| Some(l.to_string())).collect(),
            1,
            3,
            values,
        )
        .unwrap();
        let pixels = [0, 1, 2, 3];
        let models = ensemble_fit(&cube, ModelKind::Qda, &pixels, &catalog()).unwrap();
        let ensemble = ensemble_predict(&models, &cube, &pixels, 123, false).unwrap();
        let single = predict_averaged(&models[0], &cube, &pixels).unwrap();
        for (er, sr) in ensemble.rows.iter().zip(&single.rows) {
            for (e, s) in er.iter().zip(sr) {
                assert_eq!(e.to_bits(), s.to_bits());
            }
        }
    }

    #[test]
    fn permutation_is_seed_deterministic() {
        let cube = cube();
        let pixels = [0, 1, 2, 3, 4, 5];
        let models = ensemble_fit(&cube, ModelKind::Lda, &pixels, &catalog()).unwrap();
        let a = ensemble_predict(&models, &cube, &pixels, 11, true).unwrap();
        let b = ensemble_predict(&models, &cube, &pixels, 11, true).unwrap();
        for (ar, br) in a.rows.iter().zip(&b.rows) {
            for (x, y) in ar.iter().zip(br) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        a.check().unwrap();
    }

    #[test]
    fn structural_errors() {
        let cube = cube();
        let pixels = [0, 1, 2, 3, 4, 5];
        let models = ensemble_fit(&cube, ModelKind::Qda, &pixels, &catalog()).unwrap();
        assert!(matches!(
            ensemble_predict(&models[..1], &cube, &pixels, 0, true),
            Err(Error::EnsembleSizeMismatch { models: 1, realizations: 2 })
        ));
        assert!(matches!(
            fit_on_realization(&cube, ModelKind::Qda, 2, &pixels, &catalog(), &[]),
            Err(Error::RealizationOutOfRange { given: 2, count: 2 })
        ));

        // A model fitted on a wider cube cannot score this one.
        let wide = DataCube::from_parts(
            (0..4).collect(),
            vec![Some("a".into()), Some("a".into()), Some("b".into()), Some("b".into())],
            2,
            1,
            vec![0.0, 0.1, 1.0, -0.1, 10.0, 0.2, 11.0, -0.2],
        )
        .unwrap();
        let wide_model =
            fit_pooled(&wide, ModelKind::Lda, &[0, 1, 2, 3], &catalog(), &[]).unwrap();
        assert!(matches!(
            predict_averaged(&wide_model, &cube, &pixels),
            Err(Error::BandMismatch { model: 2, cube: 1 })
        ));
    }

    #[test]
    fn unlabeled_training_pixel_is_an_error() {
        let cube = DataCube::from_parts(
            vec![5, 6],
            vec![Some("a".into()), None],
            1,
            1,
            vec![0.0, 1.0],
        )
        .unwrap();
        let err = fit_pooled(&cube, ModelKind::Qda, &[0, 1], &catalog(), &[]);
        assert!(matches!(err, Err(Error::UnlabeledPixel(6))));
    }
}
