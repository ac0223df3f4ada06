//! Classification quality metrics.
//!
//! Hard-label quality is a prior-weighted F-beta over per-class scores.
//! Probabilistic quality uses two normalized proper scores:
//!
//! * `xe_norm`: cross-entropy divided by the entropy of the class prior,
//!   so predicting the prior everywhere scores exactly 1 and perfect
//!   one-hot prediction scores 0;
//! * `bs_norm`: Brier score divided by the prior Brier score, with the
//!   same two anchor points.
//!
//! The prior is the class frequency of the evaluated label multiset
//! unless a caller supplies one explicitly.

use serde::{Deserialize, Serialize};

use crate::classify::{ClassCatalog, ProbabilityTable};
use crate::error::{Error, Result};

const CLIP: f64 = 1e-15;

/// Row-major true-by-predicted counts aligned to a catalog.
#[derive(Debug, Clone)]
pub struct ConfusionMatrix {
    catalog: ClassCatalog,
    counts: Vec<u64>,
}

pub fn confusion<T, P>(truth: &[T], predicted: &[P], catalog: &ClassCatalog) -> Result<ConfusionMatrix>
where
    T: AsRef<str>,
    P: AsRef<str>,
{
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: predicted.len(),
        });
    }
    let k = catalog.len();
    let mut counts = vec![0u64; k * k];
    for (t, p) in truth.iter().zip(predicted) {
        let ti = catalog
            .index_of(t.as_ref())
            .ok_or_else(|| Error::UnknownLabel(t.as_ref().to_string()))?;
        let pi = catalog
            .index_of(p.as_ref())
            .ok_or_else(|| Error::UnknownLabel(p.as_ref().to_string()))?;
        counts[ti * k + pi] += 1;
    }
    Ok(ConfusionMatrix {
        catalog: catalog.clone(),
        counts,
    })
}

impl ConfusionMatrix {
    pub fn catalog(&self) -> &ClassCatalog {
        &self.catalog
    }

    pub fn count(&self, true_class: usize, predicted_class: usize) -> u64 {
        self.counts[true_class * self.catalog.len() + predicted_class]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn tp(&self, k: usize) -> u64 {
        self.count(k, k)
    }

    pub fn fp(&self, k: usize) -> u64 {
        (0..self.catalog.len())
            .filter(|t| *t != k)
            .map(|t| self.count(t, k))
            .sum()
    }

    pub fn fn_count(&self, k: usize) -> u64 {
        (0..self.catalog.len())
            .filter(|p| *p != k)
            .map(|p| self.count(k, p))
            .sum()
    }

    pub fn tn(&self, k: usize) -> u64 {
        self.total() - self.tp(k) - self.fp(k) - self.fn_count(k)
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        let k = self.catalog.len();
        (0..k)
            .map(|t| (0..k).map(|p| self.count(t, p)).collect())
            .collect()
    }

    /// CSV with a `true` label column and one column per predicted class.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("true");
        for name in self.catalog.names() {
            s.push(',');
            s.push_str(name);
        }
        s.push('\n');
        for t in 0..self.catalog.len() {
            s.push_str(self.catalog.name(t));
            for p in 0..self.catalog.len() {
                s.push(',');
                s.push_str(&self.count(t, p).to_string());
            }
            s.push('\n');
        }
        s
    }
}

/// A class prior aligned to a catalog: strictly positive, summing to one.
#[derive(Debug, Clone)]
pub struct PriorClassDistribution {
    q: Vec<f64>,
}

impl PriorClassDistribution {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::InvalidPrior("empty prior".into()));
        }
        if let Some(v) = q.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(Error::InvalidPrior(format!(
                "entries must be positive and finite, got {v}"
            )));
        }
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidPrior(format!("entries sum to {total}, not 1")));
        }
        Ok(PriorClassDistribution { q })
    }

    /// Class frequencies of a label multiset. Every catalog class must
    /// appear at least once, otherwise the normalizing entropy would be
    /// taken over a different support than the catalog.
    pub fn from_labels<L: AsRef<str>>(labels: &[L], catalog: &ClassCatalog) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidPrior("no labels to take frequencies from".into()));
        }
        let mut counts = vec![0u64; catalog.len()];
        for l in labels {
            let k = catalog
                .index_of(l.as_ref())
                .ok_or_else(|| Error::UnknownLabel(l.as_ref().to_string()))?;
            counts[k] += 1;
        }
        for (k, c) in counts.iter().enumerate() {
            if *c == 0 {
                return Err(Error::InvalidPrior(format!(
                    "class {:?} has no labels",
                    catalog.name(k)
                )));
            }
        }
        let n = labels.len() as f64;
        PriorClassDistribution::new(counts.iter().map(|c| *c as f64 / n).collect())
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }
}

/// Prior-weighted F-beta:
/// sum_k q_k (beta^2+1) tp_k / ((beta^2+1) tp_k + beta^2 fn_k + fp_k).
/// A class with no true or predicted instances scores a vacuous 1.
pub fn f_beta(cm: &ConfusionMatrix, q: &PriorClassDistribution, beta: f64) -> Result<f64> {
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::InvalidBeta(beta));
    }
    if q.len() != cm.catalog().len() {
        return Err(Error::LengthMismatch {
            left: q.len(),
            right: cm.catalog().len(),
        });
    }
    let b2 = beta * beta;
    let mut total = 0.0;
    for k in 0..cm.catalog().len() {
        let tp = cm.tp(k) as f64;
        let fno = cm.fn_count(k) as f64;
        let fp = cm.fp(k) as f64;
        let score = if tp + fno + fp == 0.0 {
            1.0
        } else {
            (b2 + 1.0) * tp / ((b2 + 1.0) * tp + b2 * fno + fp)
        };
        total += q.q()[k] * score;
    }
    Ok(total)
}

fn column_of(classes: &[String], label: &str) -> Result<usize> {
    classes
        .iter()
        .position(|c| c == label)
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))
}

fn check_table_against_truth<L: AsRef<str>>(
    table: &ProbabilityTable,
    truth: &[L],
    q: &PriorClassDistribution,
) -> Result<()> {
    if table.rows.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: table.rows.len(),
            right: truth.len(),
        });
    }
    if q.len() != table.classes.len() {
        return Err(Error::LengthMismatch {
            left: q.len(),
            right: table.classes.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyData);
    }
    Ok(())
}

/// Normalized cross-entropy: mean over pixels of
/// ln p(true class) / sum_k q_k ln q_k. Probabilities are clipped to
/// [1e-15, 1 - 1e-15] before the logarithm.
pub fn xe_norm<L: AsRef<str>>(
    table: &ProbabilityTable,
    truth: &[L],
    q: &PriorClassDistribution,
) -> Result<f64> {
    check_table_against_truth(table, truth, q)?;
    let denom: f64 = q.q().iter().map(|v| v * v.ln()).sum();
    if denom == 0.0 {
        return Err(Error::InvalidPrior("prior has zero entropy".into()));
    }
    let mut acc = 0.0;
    for (row, label) in table.rows.iter().zip(truth) {
        let col = column_of(&table.classes, label.as_ref())?;
        let p = row[col].clamp(CLIP, 1.0 - CLIP);
        acc += p.ln() / denom;
    }
    Ok(acc / truth.len() as f64)
}

/// Normalized Brier score: mean over pixels of
/// sum_k (y_k - p_k)^2 / sum_k q_k (1 - q_k), y one-hot at the true class.
pub fn bs_norm<L: AsRef<str>>(
    table: &ProbabilityTable,
    truth: &[L],
    q: &PriorClassDistribution,
) -> Result<f64> {
    check_table_against_truth(table, truth, q)?;
    let denom: f64 = q.q().iter().map(|v| v * (1.0 - v)).sum();
    if denom == 0.0 {
        return Err(Error::InvalidPrior("prior has zero Brier score".into()));
    }
    let mut acc = 0.0;
    for (row, label) in table.rows.iter().zip(truth) {
        let col = column_of(&table.classes, label.as_ref())?;
        let mut sq = 0.0;
        for (k, p) in row.iter().enumerate() {
            let y = if k == col { 1.0 } else { 0.0 };
            sq += (y - p) * (y - p);
        }
        acc += sq / denom;
    }
    Ok(acc / truth.len() as f64)
}

/// Per-class counts and rates. Rates with an empty denominator take their
/// vacuous value: no positives means tpr 1 and fnr 0, no negatives means
/// tnr 1 and fpr 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassRates {
    pub class: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_count: u64,
    pub tn: u64,
    pub tpr: f64,
    pub fpr: f64,
    pub tnr: f64,
    pub fnr: f64,
}

pub fn class_rates(cm: &ConfusionMatrix) -> Vec<ClassRates> {
    (0..cm.catalog().len())
        .map(|k| {
            let tp = cm.tp(k);
            let fp = cm.fp(k);
            let fno = cm.fn_count(k);
            let tn = cm.tn(k);
            let pos = tp + fno;
            let neg = fp + tn;
            let (tpr, fnr) = if pos == 0 {
                (1.0, 0.0)
            } else {
                (tp as f64 / pos as f64, fno as f64 / pos as f64)
            };
            let (tnr, fpr) = if neg == 0 {
                (1.0, 0.0)
            } else {
                (tn as f64 / neg as f64, fp as f64 / neg as f64)
            };
            ClassRates {
                class: cm.catalog().name(k).to_string(),
                tp,
                fp,
                fn_count: fno,
                tn,
                tpr,
                fpr,
                tnr,
                fnr,
            }
        })
        .collect()
}

/// Provenance carried into an evaluation report.
#[derive(Debug, Clone)]
pub struct EvalMeta {
    pub model_kind: String,
    pub protocol: String,
    pub seed: u64,
    pub training_fraction: f64,
    pub num_training_pixels: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_kind: String,
    pub protocol: String,
    pub seed: u64,
    pub training_fraction: f64,
    pub num_training_pixels: usize,
    pub num_validation_pixels: usize,
    pub classes: Vec<String>,
    pub confusion: Vec<Vec<u64>>,
    pub per_class: Vec<ClassRates>,
    pub f1: f64,
    pub f2: f64,
    pub xe_norm: f64,
    pub bs_norm: f64,
    pub generated_at_unix: u64,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }
}

/// Scores a probability table against true labels: argmax confusion,
/// prior-weighted F1/F2, and both normalized proper scores, with the
/// prior taken from the truth multiset.
pub fn evaluate_table<L: AsRef<str>>(
    table: &ProbabilityTable,
    truth: &[L],
    catalog: &ClassCatalog,
    meta: &EvalMeta,
) -> Result<EvalReport> {
    table.check()?;
    if table.classes != catalog.names() {
        return Err(Error::MalformedTable(
            "table classes do not match the catalog".into(),
        ));
    }
    let q = PriorClassDistribution::from_labels(truth, catalog)?;
    let predicted = table.argmax_labels();
    let cm = confusion(truth, &predicted, catalog)?;
    let f1 = f_beta(&cm, &q, 1.0)?;
    let f2 = f_beta(&cm, &q, 2.0)?;
    let xe = xe_norm(table, truth, &q)?;
    let bs = bs_norm(table, truth, &q)?;
    let generated_at_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(EvalReport {
        model_kind: meta.model_kind.clone(),
        protocol: meta.protocol.clone(),
        seed: meta.seed,
        training_fraction: meta.training_fraction,
        num_training_pixels: meta.num_training_pixels,
        num_validation_pixels: truth.len(),
        classes: catalog.names().to_vec(),
        confusion: cm.rows(),
        per_class: class_rates(&cm),
        f1,
        f2,
        xe_norm: xe,
        bs_norm: bs,
        generated_at_unix,
    })
}
