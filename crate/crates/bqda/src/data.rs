//! Multi-realization data cubes and their CSV interchange format.
//!
//! A cube holds `num_pixels x num_realizations x num_bands` values plus an
//! optional label per pixel. The CSV form is long format, one realization
//! per row:
//!
//! ```text
//! pixel_id,realization,label,b0,b1,...,b{p-1}
//! ```
//!
//! An empty label field means the pixel is unlabeled. Every pixel must
//! carry realizations 0..R-1 exactly once and one consistent label. Floats
//! are written with the shortest representation that parses back to the
//! identical bits, so a save/load round trip preserves values exactly.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::classify::ClassCatalog;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct DataCube {
    pixel_ids: Vec<u64>,
    labels: Vec<Option<String>>,
    num_bands: usize,
    num_realizations: usize,
    // Layout: [pixel][realization][band].
    values: Vec<f64>,
}

/// Constraints applied while loading a cube.
#[derive(Debug, Clone, Default)]
pub struct CubeSchema {
    /// When set, every non-empty label must be one of these.
    pub allowed_labels: Option<Vec<String>>,
}

pub(crate) fn check_label_text(label: &str) -> Result<()> {
    if label.contains(',') || label.contains('\n') || label.contains('\r') {
        return Err(Error::CubeStructure(format!(
            "label {label:?} contains a delimiter character"
        )));
    }
    Ok(())
}

impl DataCube {
    pub fn from_parts(
        pixel_ids: Vec<u64>,
        labels: Vec<Option<String>>,
        num_bands: usize,
        num_realizations: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if pixel_ids.is_empty() {
            return Err(Error::CubeStructure("cube has no pixels".into()));
        }
        if num_bands == 0 || num_realizations == 0 {
            return Err(Error::CubeStructure(
                "cube needs at least one band and one realization".into(),
            ));
        }
        if labels.len() != pixel_ids.len() {
            return Err(Error::LengthMismatch {
                left: pixel_ids.len(),
                right: labels.len(),
            });
        }
        let want = pixel_ids.len() * num_realizations * num_bands;
        if values.len() != want {
            return Err(Error::CubeStructure(format!(
                "{} values cannot fill {} pixels x {} realizations x {} bands",
                values.len(),
                pixel_ids.len(),
                num_realizations,
                num_bands
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut seen = pixel_ids.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::CubeStructure("duplicate pixel id".into()));
        }
        for label in labels.iter().flatten() {
            if label.is_empty() {
                return Err(Error::CubeStructure(
                    "labels must be non-empty; use None for unlabeled pixels".into(),
                ));
            }
            check_label_text(label)?;
        }
        Ok(DataCube {
            pixel_ids,
            labels,
            num_bands,
            num_realizations,
            values,
        })
    }

    pub fn num_pixels(&self) -> usize {
        self.pixel_ids.len()
    }

    pub fn num_bands(&self) -> usize {
        self.num_bands
    }

    pub fn num_realizations(&self) -> usize {
        self.num_realizations
    }

    pub fn pixel_ids(&self) -> &[u64] {
        &self.pixel_ids
    }

    pub fn label(&self, pixel: usize) -> Option<&str> {
        self.labels[pixel].as_deref()
    }

    /// Band vector of one realization of one pixel.
    pub fn band_vector(&self, pixel: usize, realization: usize) -> &[f64] {
        let start = (pixel * self.num_realizations + realization) * self.num_bands;
        &self.values[start..start + self.num_bands]
    }

    /// Indices of labeled pixels in cube order.
    pub fn labeled_indices(&self) -> Vec<usize> {
        (0..self.num_pixels())
            .filter(|i| self.labels[*i].is_some())
            .collect()
    }

    /// Catalog of the distinct labels present in the cube.
    pub fn class_catalog(&self) -> Result<ClassCatalog> {
        let labels: Vec<&str> = self.labels.iter().flatten().map(String::as_str).collect();
        if labels.is_empty() {
            return Err(Error::NoLabeledPixels);
        }
        ClassCatalog::from_labels(labels)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_cube(self, path)
    }
}

fn cube_err(path: &Path, line: usize, msg: String) -> Error {
    Error::CubeFormat {
        path: path.display().to_string(),
        line,
        msg,
    }
}

pub fn load_cube(path: &Path, schema: &CubeSchema) -> Result<DataCube> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));

    let (_, header) = lines
        .next()
        .ok_or_else(|| cube_err(path, 1, "empty file".into()))?;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() < 4 || fields[0] != "pixel_id" || fields[1] != "realization" || fields[2] != "label" {
        return Err(cube_err(
            path,
            1,
            format!("header must start with pixel_id,realization,label,b0,... got {header:?}"),
        ));
    }
    let num_bands = fields.len() - 3;
    for (i, f) in fields[3..].iter().enumerate() {
        let want = format!("b{i}");
        if *f != want {
            return Err(cube_err(path, 1, format!("band column {i} must be named {want}, got {f:?}")));
        }
    }

    let mut pixel_ids: Vec<u64> = Vec::new();
    let mut labels: Vec<Option<String>> = Vec::new();
    let mut slot_of: HashMap<u64, usize> = HashMap::new();
    // (slot, realization, source line) per data row; band values go to a
    // flat side buffer until the realization count is known.
    let mut rows: Vec<(usize, usize, usize)> = Vec::new();
    let mut bands_flat: Vec<f64> = Vec::new();
    let mut max_r = 0usize;

    for (line_no, line) in lines {
        let mut it = line.split(',');
        let id_s = it.next().unwrap_or("");
        let r_s = it.next().unwrap_or("");
        let label_s = it.next();
        let pixel_id: u64 = id_s
            .parse()
            .map_err(|_| cube_err(path, line_no, format!("bad pixel_id {id_s:?}")))?;
        let realization: usize = r_s
            .parse()
            .map_err(|_| cube_err(path, line_no, format!("bad realization {r_s:?}")))?;
        let label_s = label_s
            .ok_or_else(|| cube_err(path, line_no, "missing label field".into()))?;
        let label = if label_s.is_empty() {
            None
        } else {
            if let Some(allowed) = &schema.allowed_labels {
                if !allowed.iter().any(|a| a == label_s) {
                    return Err(cube_err(path, line_no, format!("label {label_s:?} is not allowed")));
                }
            }
            Some(label_s.to_string())
        };

        let mut count = 0;
        for band in it {
            let v: f64 = band
                .parse()
                .map_err(|_| cube_err(path, line_no, format!("bad band value {band:?}")))?;
            if !v.is_finite() {
                return Err(cube_err(path, line_no, format!("non-finite band value {band:?}")));
            }
            bands_flat.push(v);
            count += 1;
        }
        if count != num_bands {
            bands_flat.truncate(bands_flat.len() - count);
            return Err(cube_err(
                path,
                line_no,
                format!("expected {num_bands} band values, got {count}"),
            ));
        }

        let slot = match slot_of.get(&pixel_id) {
            Some(s) => {
                if labels[*s] != label {
                    return Err(cube_err(
                        path,
                        line_no,
                        format!(
                            "pixel {pixel_id} label {:?} conflicts with earlier {:?}",
                            label.as_deref().unwrap_or(""),
                            labels[*s].as_deref().unwrap_or("")
                        ),
                    ));
                }
                *s
            }
            None => {
                let s = pixel_ids.len();
                slot_of.insert(pixel_id, s);
                pixel_ids.push(pixel_id);
                labels.push(label);
                s
            }
        };
        max_r = max_r.max(realization);
        rows.push((slot, realization, line_no));
    }

    if rows.is_empty() {
        return Err(Error::CubeStructure(format!(
            "{} has no data rows",
            path.display()
        )));
    }
    let num_realizations = max_r + 1;
    // Cheap structural check before sizing the value buffer: a complete
    // cube has exactly pixels x realizations rows.
    if rows.len() != pixel_ids.len() * num_realizations {
        return Err(Error::CubeStructure(format!(
            "{} data rows cannot cover {} pixels x {} realizations",
            rows.len(),
            pixel_ids.len(),
            num_realizations
        )));
    }

    let mut values = vec![0.0; pixel_ids.len() * num_realizations * num_bands];
    let mut seen = vec![false; pixel_ids.len() * num_realizations];
    for (i, (slot, r, line_no)) in rows.iter().enumerate() {
        let cell = slot * num_realizations + r;
        if seen[cell] {
            return Err(cube_err(
                path,
                *line_no,
                format!("duplicate realization {r} for pixel {}", pixel_ids[*slot]),
            ));
        }
        seen[cell] = true;
        values[cell * num_bands..(cell + 1) * num_bands]
            .copy_from_slice(&bands_flat[i * num_bands..(i + 1) * num_bands]);
    }
    for (slot, id) in pixel_ids.iter().enumerate() {
        let found = seen[slot * num_realizations..(slot + 1) * num_realizations]
            .iter()
            .filter(|s| **s)
            .count();
        if found != num_realizations {
            return Err(Error::IncompleteRealizations {
                pixel: *id,
                found,
                expected: num_realizations,
            });
        }
    }

    DataCube::from_parts(pixel_ids, labels, num_bands, num_realizations, values)
}

pub fn save_cube(cube: &DataCube, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut res: std::io::Result<()> = (|| {
        write!(w, "pixel_id,realization,label")?;
        for b in 0..cube.num_bands() {
            write!(w, ",b{b}")?;
        }
        writeln!(w)?;
        let mut line = String::new();
        for pixel in 0..cube.num_pixels() {
            let label = cube.label(pixel).unwrap_or("");
            for r in 0..cube.num_realizations() {
                line.clear();
                line.push_str(&format!("{},{},{}", cube.pixel_ids[pixel], r, label));
                for v in cube.band_vector(pixel, r) {
                    line.push(',');
                    line.push_str(&format!("{v}"));
                }
                line.push('\n');
                w.write_all(line.as_bytes())?;
            }
        }
        Ok(())
    })();
    if res.is_ok() {
        res = w.flush();
    }
    res.map_err(|e| Error::io(path, e))
}

/// How to divide labeled pixels into training and validation sets.
#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    pub training_fraction: f64,
    pub seed: u64,
}

/// Splits the labeled pixel indices into disjoint (training, validation)
/// sets, both ascending. Training size is ceil(fraction * labeled); the
/// draw is uniform without replacement and fully determined by the seed.
pub fn split_pixels(cube: &DataCube, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let f = spec.training_fraction;
    if !f.is_finite() || f <= 0.0 || f >= 1.0 {
        return Err(Error::InvalidFraction(f));
    }
    let labeled = cube.labeled_indices();
    if labeled.is_empty() {
        return Err(Error::NoLabeledPixels);
    }
    let n_train = (f * labeled.len() as f64).ceil() as usize;
    let n_train = n_train.min(labeled.len());
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let chosen = rand::seq::index::sample(&mut rng, labeled.len(), n_train);
    let mut picked = vec![false; labeled.len()];
    for i in chosen {
        picked[i] = true;
    }
    let mut train = Vec::with_capacity(n_train);
    let mut validation = Vec::with_capacity(labeled.len() - n_train);
    for (i, idx) in labeled.iter().enumerate() {
        if picked[i] {
            train.push(*idx);
        } else {
            validation.push(*idx);
        }
    }
    Ok((train, validation))
}

/// Standard uncertainty of an aerosol optical depth measurement:
/// (0.1 tau + 0.03) + |0.09 - 0.46 tau|.
pub fn aod_standard_uncertainty(tau: f64) -> Result<f64> {
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::InvalidAod(tau));
    }
    Ok((0.1 * tau + 0.03) + (-0.46 * tau + 0.09).abs())
}

/// Count, mean, and standard deviation of one band within one class, over
/// all realizations of all pixels carrying that label.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ClassBandSummary {
    pub class: String,
    pub band: usize,
    pub count: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
}

/// Per-class per-band summaries in catalog-then-band order. Classes in the
/// catalog but absent from the cube get count 0 and empty statistics.
pub fn class_summary(cube: &DataCube, catalog: &ClassCatalog) -> Result<Vec<ClassBandSummary>> {
    let k = catalog.len();
    let p = cube.num_bands();
    // Welford accumulators per (class, band).
    let mut count = vec![0usize; k * p];
    let mut mean = vec![0.0f64; k * p];
    let mut m2 = vec![0.0f64; k * p];
    for pixel in 0..cube.num_pixels() {
        let Some(label) = cube.label(pixel) else {
            continue;
        };
        let class = catalog
            .index_of(label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
        for r in 0..cube.num_realizations() {
            let bands = cube.band_vector(pixel, r);
            for (b, v) in bands.iter().enumerate() {
                let cell = class * p + b;
                count[cell] += 1;
                let delta = v - mean[cell];
                mean[cell] += delta / count[cell] as f64;
                m2[cell] += delta * (v - mean[cell]);
            }
        }
    }
    let mut out = Vec::with_capacity(k * p);
    for class in 0..k {
        for b in 0..p {
            let cell = class * p + b;
            out.push(ClassBandSummary {
                class: catalog.name(class).to_string(),
                band: b,
                count: count[cell],
                mean: (count[cell] > 0).then_some(mean[cell]),
                sd: (count[cell] > 1).then(|| (m2[cell] / (count[cell] as f64 - 1.0)).sqrt()),
            });
        }
    }
    Ok(out)
}
