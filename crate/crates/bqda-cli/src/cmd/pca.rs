use std::fmt::Write as _;
use std::path::PathBuf;

use bqda::{load_cube, pca_project, CubeSchema};
use clap::Args;

use crate::util::{data_err, eval_err, write_text, CliError};

#[derive(Args)]
pub struct PcaArgs {
    /// Input cube CSV.
    #[arg(long)]
    pub cube: PathBuf,
    /// Realization whose band vectors are projected.
    #[arg(long, default_value_t = 0)]
    pub realization: usize,
    /// Output CSV of two-component scores.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &PcaArgs) -> Result<(), CliError> {
    let cube = load_cube(&args.cube, &CubeSchema::default()).map_err(data_err)?;
    if args.realization >= cube.num_realizations() {
        return Err(eval_err(format!(
            "realization {} out of range; cube has {}",
            args.realization,
            cube.num_realizations()
        )));
    }

    let rows: Vec<&[f64]> = (0..cube.num_pixels())
        .map(|i| cube.band_vector(i, args.realization))
        .collect();
    let (scores, explained) = pca_project(&rows, 2).map_err(eval_err)?;

    let mut csv = format!("# explained_variance,{},{}\n", explained[0], explained[1]);
    csv.push_str("pixel_id,label,pc1,pc2\n");
    for (i, score) in scores.iter().enumerate() {
        writeln!(
            csv,
            "{},{},{},{}",
            cube.pixel_ids()[i],
            cube.label(i).unwrap_or(""),
            score[0],
            score[1]
        )
        .expect("string write");
    }
    write_text(&args.out, &csv)?;

    println!(
        "projected {} pixels at realization {}: pc1 explains {:.4} of variance, pc2 {:.4}, wrote {}",
        cube.num_pixels(),
        args.realization,
        explained[0],
        explained[1],
        args.out.display()
    );
    Ok(())
}
