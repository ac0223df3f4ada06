use std::path::PathBuf;

use bqda::{class_summary, synth_cube, SynthSpec};
use clap::Args;

use crate::util::{data_err, read_text, CliError};

#[derive(Args)]
pub struct SynthArgs {
    /// JSON synthesis spec.
    #[arg(long)]
    pub spec: PathBuf,
    /// Output cube CSV.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &SynthArgs) -> Result<(), CliError> {
    let text = read_text(&args.spec)?;
    let spec = SynthSpec::from_json(&text).map_err(data_err)?;
    let cube = synth_cube(&spec).map_err(data_err)?;
    cube.save(&args.out).map_err(data_err)?;
    println!(
        "wrote {}: {} pixels x {} realizations x {} bands",
        args.out.display(),
        cube.num_pixels(),
        cube.num_realizations(),
        cube.num_bands()
    );

    let catalog = cube.class_catalog().map_err(data_err)?;
    let summary = class_summary(&cube, &catalog).map_err(data_err)?;
    for class in catalog.names() {
        let pixels = (0..cube.num_pixels())
            .filter(|i| cube.label(*i) == Some(class.as_str()))
            .count();
        println!("class {class}: {pixels} pixels");
        for row in summary.iter().filter(|r| &r.class == class) {
            match (row.mean, row.sd) {
                (Some(m), Some(sd)) => println!("  b{}: mean {m:.6} sd {sd:.6}", row.band),
                (Some(m), None) => println!("  b{}: mean {m:.6}", row.band),
                _ => println!("  b{}: no observations", row.band),
            }
        }
    }
    Ok(())
}
