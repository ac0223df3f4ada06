//! Synthetic data-cube generation.
//!
//! Each pixel draws a class by weight, a latent band vector chi from that
//! class's Gaussian, and R observed realizations chi + s_r * eps with eps
//! drawn from a shared noise covariance. The optional per-realization AOD
//! values modulate the noise amplitude as s_r = u(tau_r) / u(0), so
//! realization noise grows with the retrieval uncertainty of the
//! atmospheric state it was generated under.
//!
//! Generation is deterministic: pixel i consumes stream i of a counter
//! based generator seeded from the `SynthSpec`, so the cube depends only
//! on that spec's contents.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{aod_standard_uncertainty, check_label_text, DataCube};
use crate::error::{Error, Result};
use crate::spd::SpdMatrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthClass {
    pub name: String,
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov_chi: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: Vec<SynthClass>,
    /// Noise covariance shared by all realizations of all pixels.
    pub cov_x: Vec<Vec<f64>>,
    pub num_pixels: usize,
    pub num_realizations: usize,
    pub seed: u64,
    /// Aerosol optical depth per realization; scales the noise by
    /// u(tau_r)/u(0). Omitted means unit scale everywhere.
    #[serde(default)]
    pub aod_tau: Option<Vec<f64>>,
}

impl SynthSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSynthSpec(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("spec serialization");
        s.push('\n');
        s
    }
}

fn spd_from_rows(rows: &[Vec<f64>], p: usize, what: &str) -> Result<SpdMatrix> {
    if rows.len() != p || rows.iter().any(|r| r.len() != p) {
        return Err(Error::InvalidSynthSpec(format!("{what} must be {p}x{p}")));
    }
    let m = DMatrix::from_fn(p, p, |i, j| rows[i][j]);
    SpdMatrix::new(m).map_err(|e| Error::InvalidSynthSpec(format!("{what}: {e}")))
}

struct Plan {
    names: Vec<String>,
    cum_weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    chol_chi: Vec<DMatrix<f64>>,
    chol_x: DMatrix<f64>,
    noise_scale: Vec<f64>,
}

fn plan(spec: &SynthSpec) -> Result<Plan> {
    if spec.classes.is_empty() {
        return Err(Error::InvalidSynthSpec("need at least one class".into()));
    }
    if spec.num_pixels == 0 {
        return Err(Error::InvalidSynthSpec("num_pixels must be positive".into()));
    }
    if spec.num_realizations == 0 {
        return Err(Error::InvalidSynthSpec(
            "num_realizations must be positive".into(),
        ));
    }
    let p = spec.classes[0].mean.len();
    if p == 0 {
        return Err(Error::InvalidSynthSpec("class means must be non-empty".into()));
    }

    let mut names: Vec<&str> = spec.classes.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidSynthSpec("class names must be unique".into()));
    }

    let mut cum_weights = Vec::with_capacity(spec.classes.len());
    let mut means = Vec::with_capacity(spec.classes.len());
    let mut chol_chi = Vec::with_capacity(spec.classes.len());
    let mut total = 0.0;
    for c in &spec.classes {
        if c.name.is_empty() {
            return Err(Error::InvalidSynthSpec("class names must be non-empty".into()));
        }
        check_label_text(&c.name)
            .map_err(|e| Error::InvalidSynthSpec(format!("class {:?}: {e}", c.name)))?;
        if !c.weight.is_finite() || c.weight <= 0.0 {
            return Err(Error::InvalidSynthSpec(format!(
                "class {:?}: weight must be positive and finite, got {}",
                c.name, c.weight
            )));
        }
        if c.mean.len() != p {
            return Err(Error::InvalidSynthSpec(format!(
                "class {:?}: mean has {} bands, expected {p}",
                c.name,
                c.mean.len()
            )));
        }
        if c.mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSynthSpec(format!(
                "class {:?}: mean must be finite",
                c.name
            )));
        }
        total += c.weight;
        cum_weights.push(total);
        means.push(DVector::from_row_slice(&c.mean));
        let cov = spd_from_rows(&c.cov_chi, p, &format!("class {:?} cov_chi", c.name))?;
        chol_chi.push(cov.chol_lower().clone());
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidSynthSpec(format!(
            "class weights must sum to 1, got {total}"
        )));
    }

    let chol_x = spd_from_rows(&spec.cov_x, p, "cov_x")?.chol_lower().clone();

    let noise_scale = match &spec.aod_tau {
        None => vec![1.0; spec.num_realizations],
        Some(taus) => {
            if taus.len() != spec.num_realizations {
                return Err(Error::InvalidSynthSpec(format!(
                    "aod_tau has {} entries for {} realizations",
                    taus.len(),
                    spec.num_realizations
                )));
            }
            let u0 = aod_standard_uncertainty(0.0)?;
            let mut scales = Vec::with_capacity(taus.len());
            for (r, tau) in taus.iter().enumerate() {
                let u = aod_standard_uncertainty(*tau)
                    .map_err(|e| Error::InvalidSynthSpec(format!("aod_tau[{r}]: {e}")))?;
                scales.push(u / u0);
            }
            scales
        }
    };

    Ok(Plan {
        names: spec.classes.iter().map(|c| c.name.clone()).collect(),
        cum_weights,
        means,
        chol_chi,
        chol_x,
        noise_scale,
    })
}

fn standard_normal_vector(rng: &mut ChaCha12Rng, p: usize) -> DVector<f64> {
    DVector::from_fn(p, |_, _| rng.sample(StandardNormal))
}

pub fn synth_cube(spec: &SynthSpec) -> Result<DataCube> {
    let plan = plan(spec)?;
    let p = plan.means[0].len();
    let n = spec.num_pixels;
    let big_r = spec.num_realizations;
    let total = *plan.cum_weights.last().expect("non-empty classes");

    let mut values = Vec::with_capacity(n * big_r * p);
    let mut labels = Vec::with_capacity(n);
    for pixel in 0..n {
        let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
        rng.set_stream(pixel as u64);

        let u: f64 = rng.random::<f64>() * total;
        let class = plan
            .cum_weights
            .iter()
            .position(|c| u < *c)
            .unwrap_or(plan.cum_weights.len() - 1);
        labels.push(Some(plan.names[class].clone()));

        let chi = &plan.means[class] + &plan.chol_chi[class] * standard_normal_vector(&mut rng, p);
        for r in 0..big_r {
            let eps = &plan.chol_x * standard_normal_vector(&mut rng, p);
            for b in 0..p {
                values.push(chi[b] + plan.noise_scale[r] * eps[b]);
            }
        }
    }

    DataCube::from_parts((0..n as u64).collect(), labels, p, big_r, values)
}
