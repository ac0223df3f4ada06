use std::collections::{HashMap, HashSet};
use std::path::PathBuf;

use bqda::{
    ensemble_predict, load_cube, predict_averaged, CubeSchema, EvalMeta, FittedModel,
    PriorClassDistribution, ProbabilityTable,
};
use clap::Args;

use crate::util::{
    align_table_to_pixels, data_err, eval_err, read_probability_csv, usage, write_text, CliError,
    SplitManifest,
};

#[derive(Args)]
pub struct EvaluateArgs {
    /// Input cube CSV.
    #[arg(long)]
    pub cube: PathBuf,
    /// Split manifest written by train; its complement is scored.
    #[arg(long)]
    pub split: PathBuf,
    /// Model file; repeat for an ensemble (one member per realization).
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    /// Output directory for report, probabilities, and confusion files.
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for the ensemble member-to-realization permutation.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Assign ensemble member j to realization j instead of permuting.
    #[arg(long)]
    pub no_permute: bool,
    /// Score the constant validation-frequency row instead of a model;
    /// both normalized scores then equal 1 by construction.
    #[arg(long, conflicts_with_all = ["models", "prob_table"])]
    pub prior_only: bool,
    /// Score an externally produced probability CSV instead of a model.
    #[arg(long, conflicts_with = "models")]
    pub prob_table: Option<PathBuf>,
}

pub fn run(args: &EvaluateArgs) -> Result<(), CliError> {
    let cube = load_cube(&args.cube, &CubeSchema::default()).map_err(data_err)?;
    let manifest = SplitManifest::load(&args.split)?;
    let catalog = cube.class_catalog().map_err(data_err)?;

    let index_of_id: HashMap<u64, usize> = cube
        .pixel_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (*id, i))
        .collect();
    let mut training = HashSet::new();
    for id in &manifest.training_pixel_ids {
        let idx = index_of_id.get(id).ok_or_else(|| {
            data_err(format!("split references pixel {id}, which the cube does not contain"))
        })?;
        if cube.label(*idx).is_none() {
            return Err(data_err(format!(
                "split references pixel {id}, which is unlabeled"
            )));
        }
        training.insert(*idx);
    }
    let validation: Vec<usize> = cube
        .labeled_indices()
        .into_iter()
        .filter(|i| !training.contains(i))
        .collect();
    if validation.is_empty() {
        return Err(eval_err("no validation pixels: the split consumed every labeled pixel"));
    }
    let truth: Vec<&str> = validation
        .iter()
        .map(|i| cube.label(*i).expect("validation pixels are labeled"))
        .collect();
    let validation_ids: Vec<u64> = validation.iter().map(|i| cube.pixel_ids()[*i]).collect();

    let (table, model_kind, protocol) = if args.prior_only {
        let q = PriorClassDistribution::from_labels(&truth, &catalog).map_err(eval_err)?;
        let table = ProbabilityTable {
            classes: catalog.names().to_vec(),
            pixel_ids: validation_ids.clone(),
            rows: vec![q.q().to_vec(); validation.len()],
        };
        (table, "prior".to_string(), "prior".to_string())
    } else if let Some(path) = &args.prob_table {
        let raw = read_probability_csv(path, &catalog)?;
        let table = align_table_to_pixels(&raw, &validation_ids)?;
        (table, "table".to_string(), "table".to_string())
    } else {
        if args.models.is_empty() {
            return Err(usage(
                "nothing to score: pass --model (repeatable), --prob-table, or --prior-only",
            ));
        }
        let mut models = Vec::with_capacity(args.models.len());
        for path in &args.models {
            models.push(FittedModel::load(path).map_err(|e| {
                data_err(format!("{}: {e}", path.display()))
            })?);
        }
        let first = &models[0];
        for m in &models[1..] {
            if m.kind() != first.kind() {
                return Err(eval_err("ensemble members disagree on model kind"));
            }
        }
        if first.catalog() != &catalog {
            return Err(eval_err(format!(
                "model classes {:?} do not match cube classes {:?}",
                first.catalog().names(),
                catalog.names()
            )));
        }
        if models.len() == 1 {
            let table = predict_averaged(first, &cube, &validation).map_err(eval_err)?;
            (table, first.kind().to_string(), "averaged".to_string())
        } else {
            let table = ensemble_predict(&models, &cube, &validation, args.seed, !args.no_permute)
                .map_err(eval_err)?;
            let protocol = if args.no_permute {
                "ensemble-unpermuted".to_string()
            } else {
                format!("ensemble-permuted(seed={})", args.seed)
            };
            (table, first.kind().to_string(), protocol)
        }
    };

    let meta = EvalMeta {
        model_kind,
        protocol,
        seed: args.seed,
        training_fraction: manifest.training_fraction,
        num_training_pixels: manifest.training_pixel_ids.len(),
    };
    let report = bqda::evaluate_table(&table, &truth, &catalog, &meta).map_err(eval_err)?;

    std::fs::create_dir_all(&args.out)
        .map_err(|e| data_err(format!("{}: {e}", args.out.display())))?;
    write_text(&args.out.join("report.json"), &report.to_json())?;
    let truth_opt: Vec<Option<&str>> = truth.iter().map(|t| Some(*t)).collect();
    crate::util::write_probability_csv(
        &args.out.join("probabilities.csv"),
        &table,
        &truth_opt,
    )?;
    let mut confusion = String::from("true");
    for c in &report.classes {
        confusion.push(',');
        confusion.push_str(c);
    }
    confusion.push('\n');
    for (t, row) in report.classes.iter().zip(&report.confusion) {
        confusion.push_str(t);
        for v in row {
            confusion.push(',');
            confusion.push_str(&v.to_string());
        }
        confusion.push('\n');
    }
    write_text(&args.out.join("confusion.csv"), &confusion)?;

    println!(
        "{} {}: f1 {:.4} f2 {:.4} xe_norm {:.4} bs_norm {:.4} ({} validation pixels), wrote {}",
        report.model_kind,
        report.protocol,
        report.f1,
        report.f2,
        report.xe_norm,
        report.bs_norm,
        report.num_validation_pixels,
        args.out.display()
    );
    Ok(())
}
