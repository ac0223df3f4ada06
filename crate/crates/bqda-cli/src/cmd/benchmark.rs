use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bqda::{
    ensemble_fit, ensemble_predict, evaluate_table, fit_pooled, load_cube, predict_averaged,
    split_pixels, ClassCatalog, CubeSchema, DataCube, EvalMeta, ModelKind, SplitSpec,
};
use clap::Args;
use serde::Deserialize;

use crate::util::{data_err, read_text, usage, write_text, CliError};

#[derive(Args)]
pub struct BenchmarkArgs {
    /// Experiment grid description (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Use this cube instead of the one named in the config.
    #[arg(long)]
    pub cube: Option<PathBuf>,
    /// Write results here instead of the config's out_dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Grid description. Relative `cube` and `out_dir` paths are resolved
/// against the config file's directory.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentConfig {
    cube: String,
    models: Vec<String>,
    fractions: Vec<f64>,
    seeds: Vec<u64>,
    #[serde(default)]
    alpha: Option<Vec<f64>>,
    #[serde(default = "default_true")]
    ensemble: bool,
    out_dir: String,
}

fn default_true() -> bool {
    true
}

struct CellOk {
    f1: f64,
    f2: f64,
    xe_norm: f64,
    bs_norm: f64,
    train_seconds: f64,
    eval_seconds: f64,
}

struct Row {
    model: ModelKind,
    fraction: f64,
    seed: u64,
    outcome: Result<CellOk, String>,
}

pub fn run(args: &BenchmarkArgs) -> Result<(), CliError> {
    let text = read_text(&args.config)?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| usage(format!("{}: {e}", args.config.display())))?;

    let mut kinds = Vec::new();
    for name in &config.models {
        let kind: ModelKind = name.parse().map_err(|_| {
            usage(format!("unknown model kind {name:?}; use bqda, qda, or lda"))
        })?;
        kinds.push(kind);
    }
    if kinds.is_empty() {
        return Err(usage("config lists no models"));
    }
    if config.fractions.is_empty() {
        return Err(usage("config lists no fractions"));
    }
    for f in &config.fractions {
        if !(*f > 0.0 && *f < 1.0) {
            return Err(usage(format!(
                "training fraction must lie strictly between 0 and 1, got {f}"
            )));
        }
    }
    if config.seeds.is_empty() {
        return Err(usage("config lists no seeds"));
    }

    let base = args.config.parent().unwrap_or(Path::new("."));
    let cube_path = match &args.cube {
        Some(p) => p.clone(),
        None => base.join(&config.cube),
    };
    let out_dir = match &args.out {
        Some(p) => p.clone(),
        None => base.join(&config.out_dir),
    };
    let cube = load_cube(&cube_path, &CubeSchema::default()).map_err(data_err)?;
    let catalog = cube.class_catalog().map_err(data_err)?;
    let alpha = match &config.alpha {
        Some(a) => {
            if a.len() != catalog.len() {
                return Err(usage(format!(
                    "alpha needs {} values for classes {:?}, got {}",
                    catalog.len(),
                    catalog.names(),
                    a.len()
                )));
            }
            a.clone()
        }
        None => vec![1.0; catalog.len()],
    };

    let total = kinds.len() * config.fractions.len() * config.seeds.len();
    let mut rows: Vec<Row> = Vec::with_capacity(total);
    let mut done = 0usize;
    for &kind in &kinds {
        for &fraction in &config.fractions {
            for &seed in &config.seeds {
                done += 1;
                let outcome = run_cell(
                    &cube,
                    &catalog,
                    kind,
                    fraction,
                    seed,
                    &alpha,
                    config.ensemble,
                );
                match &outcome {
                    Ok(cell) => println!(
                        "[{done}/{total}] {kind} fraction {fraction} seed {seed}: \
                         f1 {:.4} xe_norm {:.4} bs_norm {:.4} ({:.2}s train, {:.2}s eval)",
                        cell.f1, cell.xe_norm, cell.bs_norm, cell.train_seconds, cell.eval_seconds
                    ),
                    Err(msg) => {
                        println!("[{done}/{total}] {kind} fraction {fraction} seed {seed}: error: {msg}")
                    }
                }
                rows.push(Row {
                    model: kind,
                    fraction,
                    seed,
                    outcome,
                });
            }
        }
    }

    let min_train = rows
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|c| c.train_seconds))
        .fold(f64::INFINITY, f64::min);
    let min_eval = rows
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|c| c.eval_seconds))
        .fold(f64::INFINITY, f64::min);

    let mut csv = String::from(
        "model,fraction,seed,status,f1,f2,xe_norm,bs_norm,train_seconds,eval_seconds,\
         train_rel_cost,eval_rel_cost,error\n",
    );
    for row in &rows {
        match &row.outcome {
            Ok(c) => {
                let tr = rel_cost(c.train_seconds, min_train);
                let er = rel_cost(c.eval_seconds, min_eval);
                writeln!(
                    csv,
                    "{},{},{},ok,{},{},{},{},{:.6},{:.6},{:.3},{:.3},",
                    row.model,
                    row.fraction,
                    row.seed,
                    c.f1,
                    c.f2,
                    c.xe_norm,
                    c.bs_norm,
                    c.train_seconds,
                    c.eval_seconds,
                    tr,
                    er
                )
                .expect("string write");
            }
            Err(msg) => {
                let clean: String = msg
                    .chars()
                    .map(|ch| if ch == ',' || ch == '\n' || ch == '\r' { ';' } else { ch })
                    .collect();
                writeln!(
                    csv,
                    "{},{},{},error,,,,,,,,,{clean}",
                    row.model, row.fraction, row.seed
                )
                .expect("string write");
            }
        }
    }

    std::fs::create_dir_all(&out_dir)
        .map_err(|e| data_err(format!("{}: {e}", out_dir.display())))?;
    let metrics_path = out_dir.join("metrics.csv");
    write_text(&metrics_path, &csv)?;

    let ok = rows.iter().filter(|r| r.outcome.is_ok()).count();
    println!(
        "benchmark finished: {ok} ok, {} error of {total} cells, wrote {}",
        total - ok,
        metrics_path.display()
    );
    Ok(())
}

/// Relative cost against the cheapest successful cell; 1.0 when timings
/// are too small to compare meaningfully.
fn rel_cost(seconds: f64, min: f64) -> f64 {
    if !min.is_finite() || min <= 0.0 {
        1.0
    } else {
        seconds / min
    }
}

fn run_cell(
    cube: &DataCube,
    catalog: &ClassCatalog,
    kind: ModelKind,
    fraction: f64,
    seed: u64,
    alpha: &[f64],
    ensemble: bool,
) -> Result<CellOk, String> {
    let split = SplitSpec {
        training_fraction: fraction,
        seed,
    };
    let (training, validation) = split_pixels(cube, &split).map_err(|e| e.to_string())?;
    if validation.is_empty() {
        return Err("no validation pixels left after the split".to_string());
    }

    let use_ensemble = ensemble && kind != ModelKind::Bqda;
    let train_start = Instant::now();
    let models = if use_ensemble {
        ensemble_fit(cube, kind, &training, catalog).map_err(|e| e.to_string())?
    } else {
        vec![fit_pooled(cube, kind, &training, catalog, alpha).map_err(|e| e.to_string())?]
    };
    let train_seconds = train_start.elapsed().as_secs_f64();

    let eval_start = Instant::now();
    let (table, protocol) = if models.len() == 1 {
        let table = predict_averaged(&models[0], cube, &validation).map_err(|e| e.to_string())?;
        (table, "averaged".to_string())
    } else {
        let table = ensemble_predict(&models, cube, &validation, seed, true)
            .map_err(|e| e.to_string())?;
        (table, format!("ensemble-permuted(seed={seed})"))
    };
    let truth: Vec<&str> = validation
        .iter()
        .map(|i| cube.label(*i).expect("validation pixels are labeled"))
        .collect();
    let meta = EvalMeta {
        model_kind: kind.to_string(),
        protocol,
        seed,
        training_fraction: fraction,
        num_training_pixels: training.len(),
    };
    let report = evaluate_table(&table, &truth, catalog, &meta).map_err(|e| e.to_string())?;
    let eval_seconds = eval_start.elapsed().as_secs_f64();

    Ok(CellOk {
        f1: report.f1,
        f2: report.f2,
        xe_norm: report.xe_norm,
        bs_norm: report.bs_norm,
        train_seconds,
        eval_seconds,
    })
}
