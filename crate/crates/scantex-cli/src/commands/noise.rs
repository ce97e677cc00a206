//! `noise add`: Gaussian-noise control images.

use std::path::PathBuf;

use clap::{Args, Subcommand};
use rayon::prelude::*;
use scantex_core::imgcore::{load_image, save_image};
use scantex_core::protocol::derive_seed;
use scantex_core::texsim::add_gaussian_noise;
use scantex_core::Error;

use super::{collect_images, CmdResult, Context};

#[derive(Subcommand)]
pub enum NoiseCommand {
    /// Add i.i.d. Gaussian noise to every image under a directory.
    Add(AddArgs),
}

#[derive(Args)]
pub struct AddArgs {
    /// Noise standard deviation in intensity levels.
    #[arg(long)]
    sigma: f64,

    /// Input image directory (recursed).
    #[arg(long, name = "in")]
    input: PathBuf,

    /// Output directory mirroring the input tree.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(ctx: &Context, command: NoiseCommand) -> CmdResult {
    match command {
        NoiseCommand::Add(args) => add(ctx, args),
    }
}

fn add(ctx: &Context, args: AddArgs) -> CmdResult {
    let files = collect_images(&args.input)?;
    // Per-file seeds derive from the relative path, so results are stable
    // under any traversal or thread order.
    let count = files
        .par_iter()
        .map(|path| -> Result<(), Error> {
            let rel = path.strip_prefix(&args.input).expect("walked under input");
            let seed = derive_seed(ctx.seed, &rel.to_string_lossy());
            let img = load_image(path)?;
            let noisy = add_gaussian_noise(&img, args.sigma, seed)?;
            let dest = args.out.join(rel);
            if let Some(parent) = dest.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            save_image(&noisy, &dest)
        })
        .collect::<Result<Vec<_>, Error>>()?
        .len();
    println!(
        "added sigma={} noise to {count} images under {}",
        args.sigma,
        args.out.display()
    );
    Ok(())
}
