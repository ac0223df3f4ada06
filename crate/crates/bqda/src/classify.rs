//! Generative classifiers over band vectors.
//!
//! Three model kinds share one container. `bqda` scores a point with the
//! Student-t posterior predictive of a normal-inverse-Wishart law fitted
//! per class under the data-dependent prior from [`crate::niw`], weighting
//! classes by count plus Dirichlet hyperparameter. `qda` and `lda` are the
//! frequentist baselines: per-class or pooled sample covariances with
//! count-proportional weights. The frequentist kinds fail loudly on
//! singular covariances; the Bayesian kind exists precisely because it does
//! not.
//!
//! A fitted model stores per-class sufficient statistics (count, mean,
//! scatter) and regenerates its predictive densities deterministically from
//! them, so a model serialized to JSON and read back scores points exactly
//! like the original.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dist::{GaussianParams, StudentTParams};
use crate::error::{Error, Result};
use crate::niw::{niw_posterior_predictive, NiwParams};
use crate::spd::SpdMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Bqda,
    Qda,
    Lda,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Bqda => "bqda",
            ModelKind::Qda => "qda",
            ModelKind::Lda => "lda",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bqda" => Ok(ModelKind::Bqda),
            "qda" => Ok(ModelKind::Qda),
            "lda" => Ok(ModelKind::Lda),
            other => Err(Error::ModelFormat(format!("unknown model kind {other:?}"))),
        }
    }
}

/// The closed set of class names for one fitted model, held in lexicographic
/// order. Every per-class array in this crate (alpha, statistics, probability
/// columns) is aligned to this order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCatalog {
    names: Vec<String>,
}

impl ClassCatalog {
    pub fn new(mut names: Vec<String>) -> Result<Self> {
        names.sort();
        if names.len() < 2 {
            return Err(Error::TooFewClasses(names.len()));
        }
        if names.iter().any(|n| n.is_empty()) {
            return Err(Error::EmptyClassName);
        }
        for w in names.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateClass(w[0].clone()));
            }
        }
        Ok(ClassCatalog { names })
    }

    pub fn from_labels<'a, I>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let set: BTreeSet<&str> = labels.into_iter().collect();
        ClassCatalog::new(set.into_iter().map(String::from).collect())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, k: usize) -> &str {
        &self.names[k]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }
}

/// Sufficient statistics of one class: observation count, sample mean, and
/// unnormalized scatter about the mean.
#[derive(Debug, Clone)]
pub struct ClassStats {
    pub count: usize,
    pub mean: DVector<f64>,
    pub scatter: DMatrix<f64>,
}

impl ClassStats {
    pub fn from_rows(rows: &[&[f64]], num_bands: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyData);
        }
        for r in rows {
            if r.len() != num_bands {
                return Err(Error::DimensionMismatch {
                    expected: num_bands,
                    got: r.len(),
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        let n = rows.len();
        let mut mean = DVector::zeros(num_bands);
        for r in rows {
            for i in 0..num_bands {
                mean[i] += r[i];
            }
        }
        mean /= n as f64;
        let mut scatter = DMatrix::zeros(num_bands, num_bands);
        let mut d = vec![0.0; num_bands];
        for r in rows {
            for i in 0..num_bands {
                d[i] = r[i] - mean[i];
            }
            for i in 0..num_bands {
                for j in i..num_bands {
                    scatter[(i, j)] += d[i] * d[j];
                }
            }
        }
        for i in 0..num_bands {
            for j in 0..i {
                scatter[(i, j)] = scatter[(j, i)];
            }
        }
        Ok(ClassStats {
            count: n,
            mean,
            scatter,
        })
    }

    /// scatter / (count - 1); undefined below two observations.
    pub fn sample_covariance(&self) -> Result<DMatrix<f64>> {
        if self.count < 2 {
            return Err(Error::EmptyData);
        }
        Ok(&self.scatter / (self.count as f64 - 1.0))
    }
}

#[derive(Debug, Clone)]
enum ClassDensity {
    StudentT(StudentTParams),
    Gaussian(GaussianParams),
}

impl ClassDensity {
    fn logpdf(&self, x: &DVector<f64>) -> Result<f64> {
        match self {
            ClassDensity::StudentT(t) => t.logpdf(x),
            ClassDensity::Gaussian(g) => g.logpdf(x),
        }
    }
}

/// Per-pixel class probabilities, columns aligned to a class catalog.
#[derive(Debug, Clone)]
pub struct ProbabilityTable {
    pub classes: Vec<String>,
    pub pixel_ids: Vec<u64>,
    pub rows: Vec<Vec<f64>>,
}

impl ProbabilityTable {
    /// Index of the row maximum; ties resolve to the lowest class index.
    pub fn argmax_row(row: &[f64]) -> usize {
        let mut best = 0;
        for (k, v) in row.iter().enumerate().skip(1) {
            if *v > row[best] {
                best = k;
            }
        }
        best
    }

    pub fn argmax_labels(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| self.classes[Self::argmax_row(r)].clone())
            .collect()
    }

    /// Structural validation: rectangular, finite, each row summing to one
    /// within 1e-12.
    pub fn check(&self) -> Result<()> {
        if self.rows.len() != self.pixel_ids.len() {
            return Err(Error::MalformedTable(format!(
                "{} rows for {} pixel ids",
                self.rows.len(),
                self.pixel_ids.len()
            )));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.classes.len() {
                return Err(Error::MalformedTable(format!(
                    "row {i} has {} entries for {} classes",
                    row.len(),
                    self.classes.len()
                )));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::MalformedTable(format!("row {i} is not a probability row")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::MalformedTable(format!("row {i} sums to {s}")));
            }
        }
        Ok(())
    }
}

/// A fitted classifier: class catalog, Dirichlet hyperparameters, per-class
/// sufficient statistics, and the predictive densities derived from them.
#[derive(Debug, Clone)]
pub struct FittedModel {
    kind: ModelKind,
    catalog: ClassCatalog,
    alpha: Vec<f64>,
    num_bands: usize,
    per_class: Vec<ClassStats>,
    densities: Vec<ClassDensity>,
    log_weights: Vec<f64>,
}

/// Student-t predictive for one class under the data-dependent prior.
///
/// With lambda = 0 the posterior collapses to
///   mu_n = xbar, lambda_n = n, nu_n = n + p + 2,
///   Psi_n = diag(S)/(n K^(2/p)) + S
/// so the predictive is T(xbar, (n+1)/(n(n+3)) Psi_n, n + 3). Fitting and
/// reloading a serialized model both pass through this function, which is
/// what makes regeneration exact.
fn bqda_predictive(stats: &ClassStats, num_classes: usize) -> Result<StudentTParams> {
    let p = stats.mean.len();
    let n = stats.count as f64;
    if stats.count < 2 {
        return Err(Error::InsufficientPriorData);
    }
    if (0..p).any(|i| stats.scatter[(i, i)] <= 0.0) {
        return Err(Error::DegenerateScatter);
    }
    let shrink = n * (num_classes as f64).powf(2.0 / p as f64);
    let mut psi_n = stats.scatter.clone();
    for i in 0..p {
        psi_n[(i, i)] += stats.scatter[(i, i)] / shrink;
    }
    let posterior = NiwParams::new(
        stats.mean.clone(),
        n,
        SpdMatrix::new(psi_n)?,
        n + p as f64 + 2.0,
    )?;
    niw_posterior_predictive(&posterior)
}

fn singularity(e: Error, class: Option<&str>) -> Error {
    match e {
        Error::NotPositiveDefinite | Error::NotSymmetric | Error::NonFinite => match class {
            Some(name) => Error::SingularClassCovariance(name.to_string()),
            None => Error::SingularPooledCovariance,
        },
        other => other,
    }
}

impl FittedModel {
    /// Builds the predictive densities and class log-weights from stored
    /// statistics. Both fitting and deserialization funnel through here.
    fn assemble(
        kind: ModelKind,
        catalog: ClassCatalog,
        alpha: Vec<f64>,
        per_class: Vec<ClassStats>,
        num_bands: usize,
    ) -> Result<Self> {
        let k = catalog.len();
        debug_assert_eq!(per_class.len(), k);
        let mut densities = Vec::with_capacity(k);
        match kind {
            ModelKind::Bqda => {
                for (stats, name) in per_class.iter().zip(catalog.names()) {
                    if stats.count < 2 {
                        return Err(Error::TooFewClassObservations {
                            class: name.clone(),
                            count: stats.count,
                        });
                    }
                    let t = bqda_predictive(stats, k).map_err(|e| e.for_class(name))?;
                    densities.push(ClassDensity::StudentT(t));
                }
            }
            ModelKind::Qda => {
                for (stats, name) in per_class.iter().zip(catalog.names()) {
                    if stats.count < 2 {
                        return Err(Error::SingularClassCovariance(name.clone()));
                    }
                    let cov = SpdMatrix::new(stats.sample_covariance()?)
                        .map_err(|e| singularity(e, Some(name)))?;
                    let g = GaussianParams::new(stats.mean.clone(), cov)?;
                    densities.push(ClassDensity::Gaussian(g));
                }
            }
            ModelKind::Lda => {
                let total: usize = per_class.iter().map(|s| s.count).sum();
                if total <= k {
                    return Err(Error::InsufficientPooledData { total, classes: k });
                }
                let mut pooled = DMatrix::zeros(num_bands, num_bands);
                for stats in &per_class {
                    pooled += &stats.scatter;
                }
                pooled /= (total - k) as f64;
                let pooled = SpdMatrix::new(pooled).map_err(|e| singularity(e, None))?;
                for stats in &per_class {
                    let g = GaussianParams::new(stats.mean.clone(), pooled.clone())?;
                    densities.push(ClassDensity::Gaussian(g));
                }
            }
        }
        let log_weights = per_class
            .iter()
            .enumerate()
            .map(|(i, s)| match kind {
                ModelKind::Bqda => (s.count as f64 + alpha[i]).ln(),
                _ => (s.count as f64).ln(),
            })
            .collect();
        Ok(FittedModel {
            kind,
            catalog,
            alpha,
            num_bands,
            per_class,
            densities,
            log_weights,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn catalog(&self) -> &ClassCatalog {
        &self.catalog
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn num_bands(&self) -> usize {
        self.num_bands
    }

    pub fn per_class(&self) -> &[ClassStats] {
        &self.per_class
    }

    /// Derived Student-t parameters for class k (bqda models only).
    pub fn student_t(&self, k: usize) -> Option<&StudentTParams> {
        match self.densities.get(k)? {
            ClassDensity::StudentT(t) => Some(t),
            ClassDensity::Gaussian(_) => None,
        }
    }

    /// Derived Gaussian parameters for class k (qda and lda models only).
    pub fn gaussian(&self, k: usize) -> Option<&GaussianParams> {
        match self.densities.get(k)? {
            ClassDensity::Gaussian(g) => Some(g),
            ClassDensity::StudentT(_) => None,
        }
    }

    /// One row of class probabilities via log-sum-exp over
    /// log weight + log density.
    pub fn predict_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.num_bands {
            return Err(Error::DimensionMismatch {
                expected: self.num_bands,
                got: x.len(),
            });
        }
        let xv = DVector::from_row_slice(x);
        let mut logs = Vec::with_capacity(self.densities.len());
        for (d, w) in self.densities.iter().zip(&self.log_weights) {
            logs.push(w + d.logpdf(&xv)?);
        }
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut row: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
        let s: f64 = row.iter().sum();
        for p in &mut row {
            *p /= s;
        }
        Ok(row)
    }

    pub fn predict_proba(&self, rows: &[&[f64]]) -> Result<ProbabilityTable> {
        let mut out = Vec::with_capacity(rows.len());
        for r in rows {
            out.push(self.predict_row(r)?);
        }
        Ok(ProbabilityTable {
            classes: self.catalog.names().to_vec(),
            pixel_ids: (0..rows.len() as u64).collect(),
            rows: out,
        })
    }

    /// Hard labels: argmax of the probability row, ties to the lowest class
    /// index.
    pub fn predict(&self, rows: &[&[f64]]) -> Result<Vec<String>> {
        let mut out = Vec::with_capacity(rows.len());
        for r in rows {
            let p = self.predict_row(r)?;
            out.push(self.catalog.name(ProbabilityTable::argmax_row(&p)).to_string());
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            kind: self.kind,
            classes: self.catalog.names().to_vec(),
            alpha: self.alpha.clone(),
            per_class: self
                .per_class
                .iter()
                .map(|s| ClassStatsFile {
                    count: s.count,
                    mean: s.mean.iter().cloned().collect(),
                    scatter: (0..s.scatter.nrows())
                        .map(|i| (0..s.scatter.ncols()).map(|j| s.scatter[(i, j)]).collect())
                        .collect(),
                })
                .collect(),
            num_bands: self.num_bands,
            format_version: FORMAT_VERSION,
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serialization");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported format_version {}, expected {FORMAT_VERSION}",
                file.format_version
            )));
        }
        if file.num_bands == 0 {
            return Err(Error::ModelFormat("num_bands must be positive".into()));
        }
        if !file.classes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::ModelFormat(
                "classes must be sorted and unique".into(),
            ));
        }
        let catalog = ClassCatalog::new(file.classes)?;
        let k = catalog.len();
        if file.alpha.len() != k {
            return Err(Error::ModelFormat(format!(
                "alpha has {} entries for {k} classes",
                file.alpha.len()
            )));
        }
        check_alpha(&file.alpha)?;
        if file.per_class.len() != k {
            return Err(Error::ModelFormat(format!(
                "per_class has {} entries for {k} classes",
                file.per_class.len()
            )));
        }
        let p = file.num_bands;
        let mut per_class = Vec::with_capacity(k);
        for (c, name) in file.per_class.into_iter().zip(catalog.names()) {
            if c.mean.len() != p
                || c.scatter.len() != p
                || c.scatter.iter().any(|r| r.len() != p)
            {
                return Err(Error::ModelFormat(format!(
                    "class {name:?} has statistics of the wrong dimension"
                )));
            }
            if c.count == 0 {
                return Err(Error::ModelFormat(format!("class {name:?} has zero count")));
            }
            let mean = DVector::from_row_slice(&c.mean);
            let scatter =
                DMatrix::from_fn(p, p, |i, j| c.scatter[i][j]);
            if mean.iter().any(|v| !v.is_finite()) || scatter.iter().any(|v| !v.is_finite()) {
                return Err(Error::ModelFormat(format!(
                    "class {name:?} has non-finite statistics"
                )));
            }
            per_class.push(ClassStats {
                count: c.count,
                mean,
                scatter,
            });
        }
        FittedModel::assemble(
            file.kind,
            catalog,
            file.alpha,
            per_class,
            file.num_bands,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ClassStatsFile {
    count: usize,
    mean: Vec<f64>,
    scatter: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    kind: ModelKind,
    classes: Vec<String>,
    alpha: Vec<f64>,
    per_class: Vec<ClassStatsFile>,
    num_bands: usize,
    format_version: u32,
}

fn check_alpha(alpha: &[f64]) -> Result<()> {
    if let Some(a) = alpha.iter().find(|a| !a.is_finite() || **a <= 0.0) {
        return Err(Error::InvalidAlpha(format!(
            "entries must be positive and finite, got {a}"
        )));
    }
    Ok(())
}

fn group_stats<L: AsRef<str>>(
    rows: &[&[f64]],
    labels: &[L],
    catalog: &ClassCatalog,
) -> Result<(Vec<ClassStats>, usize)> {
    if rows.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: rows.len(),
            right: labels.len(),
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyData);
    }
    let num_bands = rows[0].len();
    if num_bands == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    let mut groups: Vec<Vec<&[f64]>> = vec![Vec::new(); catalog.len()];
    for (row, label) in rows.iter().zip(labels) {
        let label = label.as_ref();
        let k = catalog
            .index_of(label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
        groups[k].push(row);
    }
    let mut stats = Vec::with_capacity(catalog.len());
    for (k, group) in groups.iter().enumerate() {
        if group.is_empty() {
            return Err(Error::MissingClass(catalog.name(k).to_string()));
        }
        stats.push(ClassStats::from_rows(group, num_bands)?);
    }
    Ok((stats, num_bands))
}

/// Fits the Bayesian model: per-class NIW posterior predictives under the
/// data-dependent prior, with Dirichlet class weights count + alpha.
pub fn fit_bqda<L: AsRef<str>>(
    rows: &[&[f64]],
    labels: &[L],
    catalog: &ClassCatalog,
    alpha: &[f64],
) -> Result<FittedModel> {
    if alpha.len() != catalog.len() {
        return Err(Error::InvalidAlpha(format!(
            "{} entries for {} classes",
            alpha.len(),
            catalog.len()
        )));
    }
    check_alpha(alpha)?;
    let (stats, num_bands) = group_stats(rows, labels, catalog)?;
    FittedModel::assemble(
        ModelKind::Bqda,
        catalog.clone(),
        alpha.to_vec(),
        stats,
        num_bands,
    )
}

/// Fits frequentist QDA: per-class sample covariances, count weights. A
/// rank-deficient class covariance is a hard error naming the class.
pub fn fit_qda<L: AsRef<str>>(
    rows: &[&[f64]],
    labels: &[L],
    catalog: &ClassCatalog,
) -> Result<FittedModel> {
    let (stats, num_bands) = group_stats(rows, labels, catalog)?;
    FittedModel::assemble(
        ModelKind::Qda,
        catalog.clone(),
        vec![1.0; catalog.len()],
        stats,
        num_bands,
    )
}

/// Fits LDA: one covariance pooled across classes,
/// sum_k scatter_k / (N - K), shared by every class density.
pub fn fit_lda<L: AsRef<str>>(
    rows: &[&[f64]],
    labels: &[L],
    catalog: &ClassCatalog,
) -> Result<FittedModel> {
    let (stats, num_bands) = group_stats(rows, labels, catalog)?;
    FittedModel::assemble(
        ModelKind::Lda,
        catalog.clone(),
        vec![1.0; catalog.len()],
        stats,
        num_bands,
    )
}
