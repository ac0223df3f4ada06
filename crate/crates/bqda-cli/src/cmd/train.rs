use std::path::PathBuf;

use bqda::{
    ensemble_fit, fit_pooled, load_cube, split_pixels, CubeSchema, Error, ModelKind, SplitSpec,
};
use clap::Args;

use crate::util::{
    data_err, fit_err, usage, write_text, CliError, SplitManifest, SPLIT_FORMAT_VERSION,
};

#[derive(Args)]
pub struct TrainArgs {
    /// Input cube CSV.
    #[arg(long)]
    pub cube: PathBuf,
    /// Classifier kind: bqda, qda, or lda.
    #[arg(long)]
    pub model: String,
    /// Fraction of labeled pixels used for training, in (0, 1).
    #[arg(long)]
    pub fraction: f64,
    /// Seed driving the training split.
    #[arg(long)]
    pub seed: u64,
    /// Output directory for model and split files.
    #[arg(long)]
    pub out: PathBuf,
    /// Dirichlet hyperparameters, one per class in lexicographic class
    /// order (bqda only). Defaults to all ones.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    /// Fit one model per realization instead of pooling (qda/lda only).
    #[arg(long)]
    pub ensemble: bool,
}

pub fn run(args: &TrainArgs) -> Result<(), CliError> {
    let kind: ModelKind = args.model.parse().map_err(|_| {
        usage(format!(
            "unknown model kind {:?}; use bqda, qda, or lda",
            args.model
        ))
    })?;
    if args.alpha.is_some() && kind != ModelKind::Bqda {
        return Err(usage("--alpha only applies to the bqda model"));
    }
    if args.ensemble && kind == ModelKind::Bqda {
        return Err(usage("--ensemble only applies to qda and lda models"));
    }

    let cube = load_cube(&args.cube, &CubeSchema::default()).map_err(data_err)?;
    let catalog = cube.class_catalog().map_err(data_err)?;
    let alpha = match &args.alpha {
        Some(a) => {
            if a.len() != catalog.len() {
                return Err(usage(format!(
                    "--alpha needs {} values for classes {:?}, got {}",
                    catalog.len(),
                    catalog.names(),
                    a.len()
                )));
            }
            a.clone()
        }
        None => vec![1.0; catalog.len()],
    };

    let split = SplitSpec {
        training_fraction: args.fraction,
        seed: args.seed,
    };
    let (training, validation) = split_pixels(&cube, &split).map_err(|e| match e {
        Error::InvalidFraction(_) => usage(e.to_string()),
        other => data_err(other),
    })?;

    std::fs::create_dir_all(&args.out)
        .map_err(|e| data_err(format!("{}: {e}", args.out.display())))?;

    let manifest = SplitManifest {
        format_version: SPLIT_FORMAT_VERSION,
        seed: args.seed,
        training_fraction: args.fraction,
        num_labeled: training.len() + validation.len(),
        training_pixel_ids: training.iter().map(|i| cube.pixel_ids()[*i]).collect(),
    };
    let split_path = args.out.join("split.json");
    write_text(&split_path, &manifest.to_json())?;

    if args.ensemble {
        let models = ensemble_fit(&cube, kind, &training, &catalog).map_err(fit_err)?;
        for (r, model) in models.iter().enumerate() {
            let path = args.out.join(format!("model_{r:03}.json"));
            model.save(&path).map_err(data_err)?;
        }
        println!(
            "trained {} ensemble: {} members on {} pixels ({} per-member observations), wrote {}",
            kind,
            models.len(),
            training.len(),
            training.len(),
            args.out.display()
        );
    } else {
        let model = fit_pooled(&cube, kind, &training, &catalog, &alpha).map_err(fit_err)?;
        let path = args.out.join("model.json");
        model.save(&path).map_err(data_err)?;
        println!(
            "trained {} on {} pixels ({} pooled observations), wrote {}",
            kind,
            training.len(),
            training.len() * cube.num_realizations(),
            path.display()
        );
    }
    println!(
        "split: {} training / {} validation of {} labeled pixels (seed {}), manifest {}",
        training.len(),
        validation.len(),
        manifest.num_labeled,
        args.seed,
        split_path.display()
    );
    Ok(())
}
