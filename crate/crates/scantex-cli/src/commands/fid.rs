//! `fid`: Fréchet distance between two image sets.

use std::path::Path;

use clap::Args;
use scantex_core::evalmetrics::{
    embed_builtin, fid, gaussian_stats, load_embeddings, GaussianStats,
};
use scantex_core::imgcore::load_image;
use scantex_core::Error;

use super::{collect_images, CmdResult, Context};

#[derive(Args)]
pub struct FidArgs {
    /// First set: an image directory or a packed embeddings file.
    #[arg(long)]
    a: std::path::PathBuf,

    /// Second set: an image directory or a packed embeddings file.
    #[arg(long)]
    b: std::path::PathBuf,
}

/// Embeds a directory with the builtin embedder, or loads precomputed
/// vectors when the path is a packed embeddings file.
fn stats_for(path: &Path) -> Result<GaussianStats, Error> {
    let vectors = if path.is_dir() {
        collect_images(path)?
            .iter()
            .map(|p| load_image(p).map(|img| embed_builtin(&img)))
            .collect::<Result<Vec<_>, Error>>()?
    } else {
        load_embeddings(path)?
    };
    gaussian_stats(&vectors)
}

pub fn run(_ctx: &Context, args: FidArgs) -> CmdResult {
    let a = stats_for(&args.a)?;
    let b = stats_for(&args.b)?;
    let value = fid(&a, &b)?;
    println!("{value:?}");
    Ok(())
}
