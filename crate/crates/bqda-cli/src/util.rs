//! Exit-code discipline and small file helpers shared by the commands.
//!
//! Exit codes: 1 for bad invocations and configs, 2 for unreadable or
//! malformed data files, 3 for fitting failures, 4 for evaluation
//! failures. Success is 0.

use std::collections::HashMap;
use std::path::Path;

use bqda::{ClassCatalog, ProbabilityTable};
use serde::{Deserialize, Serialize};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_FIT: i32 = 3;
pub const EXIT_EVAL: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

pub fn usage(message: impl Into<String>) -> CliError {
    CliError::new(EXIT_USAGE, message)
}

pub fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::new(EXIT_DATA, e.to_string())
}

pub fn fit_err(e: impl std::fmt::Display) -> CliError {
    CliError::new(EXIT_FIT, e.to_string())
}

pub fn eval_err(e: impl std::fmt::Display) -> CliError {
    CliError::new(EXIT_EVAL, e.to_string())
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| data_err(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| data_err(format!("{}: {e}", path.display())))
}

/// Record of which pixels a training run consumed, written next to the
/// model so evaluation can reconstruct the held-out set exactly.
#[derive(Debug, Serialize, Deserialize)]
pub struct SplitManifest {
    pub format_version: u32,
    pub seed: u64,
    pub training_fraction: f64,
    pub num_labeled: usize,
    pub training_pixel_ids: Vec<u64>,
}

pub const SPLIT_FORMAT_VERSION: u32 = 1;

impl SplitManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serialization");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = read_text(path)?;
        let manifest: SplitManifest = serde_json::from_str(&text)
            .map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        if manifest.format_version != SPLIT_FORMAT_VERSION {
            return Err(data_err(format!(
                "{}: unsupported format_version {}",
                path.display(),
                manifest.format_version
            )));
        }
        Ok(manifest)
    }
}

/// Writes a probability table as CSV: pixel_id, the pixel's true label
/// when known, then one p_<class> column per catalog class.
pub fn write_probability_csv(
    path: &Path,
    table: &ProbabilityTable,
    truth: &[Option<&str>],
) -> Result<(), CliError> {
    let mut s = String::from("pixel_id,label");
    for c in &table.classes {
        s.push_str(",p_");
        s.push_str(c);
    }
    s.push('\n');
    for (i, row) in table.rows.iter().enumerate() {
        s.push_str(&table.pixel_ids[i].to_string());
        s.push(',');
        if let Some(Some(label)) = truth.get(i) {
            s.push_str(label);
        }
        for p in row {
            s.push(',');
            s.push_str(&format!("{p}"));
        }
        s.push('\n');
    }
    write_text(path, &s)
}

/// Reads a probability CSV back. The p_<class> columns must match the
/// catalog exactly; each row must sum to 1 within 1e-6. Rows off by more
/// than 1e-12 are renormalized; closer ones are kept bit-identical.
pub fn read_probability_csv(
    path: &Path,
    catalog: &ClassCatalog,
) -> Result<ProbabilityTable, CliError> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let (_, header) = lines
        .next()
        .ok_or_else(|| data_err(format!("{}: empty file", path.display())))?;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() < 3 || fields[0] != "pixel_id" || fields[1] != "label" {
        return Err(data_err(format!(
            "{}:1: header must be pixel_id,label,p_<class>,...",
            path.display()
        )));
    }
    let classes: Vec<String> = fields[2..]
        .iter()
        .map(|f| {
            f.strip_prefix("p_").map(String::from).ok_or_else(|| {
                data_err(format!(
                    "{}:1: probability column {f:?} must be named p_<class>",
                    path.display()
                ))
            })
        })
        .collect::<Result<_, _>>()?;
    if classes != catalog.names() {
        return Err(eval_err(format!(
            "{}: probability columns {:?} do not match the cube classes {:?}",
            path.display(),
            classes,
            catalog.names()
        )));
    }
    let k = classes.len();
    let mut pixel_ids = Vec::new();
    let mut rows = Vec::new();
    for (line_no, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != k + 2 {
            return Err(data_err(format!(
                "{}:{line_no}: expected {} fields, got {}",
                path.display(),
                k + 2,
                fields.len()
            )));
        }
        let id: u64 = fields[0].parse().map_err(|_| {
            data_err(format!("{}:{line_no}: bad pixel_id {:?}", path.display(), fields[0]))
        })?;
        let mut row = Vec::with_capacity(k);
        for f in &fields[2..] {
            let p: f64 = f.parse().map_err(|_| {
                data_err(format!("{}:{line_no}: bad probability {f:?}", path.display()))
            })?;
            if !p.is_finite() || p < 0.0 {
                return Err(data_err(format!(
                    "{}:{line_no}: probability {p} out of range",
                    path.display()
                )));
            }
            row.push(p);
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(data_err(format!(
                "{}:{line_no}: probabilities sum to {sum}",
                path.display()
            )));
        }
        if (sum - 1.0).abs() > 1e-12 {
            for p in &mut row {
                *p /= sum;
            }
        }
        pixel_ids.push(id);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(data_err(format!("{}: no probability rows", path.display())));
    }
    Ok(ProbabilityTable {
        classes: catalog.names().to_vec(),
        pixel_ids,
        rows,
    })
}

/// Reorders an externally supplied table to match the wanted pixel ids.
pub fn align_table_to_pixels(
    table: &ProbabilityTable,
    wanted_ids: &[u64],
) -> Result<ProbabilityTable, CliError> {
    let by_id: HashMap<u64, usize> = table
        .pixel_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (*id, i))
        .collect();
    if by_id.len() != table.pixel_ids.len() {
        return Err(eval_err("probability table repeats a pixel_id"));
    }
    let mut rows = Vec::with_capacity(wanted_ids.len());
    for id in wanted_ids {
        let i = by_id
            .get(id)
            .ok_or_else(|| eval_err(format!("probability table has no row for pixel {id}")))?;
        rows.push(table.rows[*i].clone());
    }
    Ok(ProbabilityTable {
        classes: table.classes.clone(),
        pixel_ids: wanted_ids.to_vec(),
        rows,
    })
}
