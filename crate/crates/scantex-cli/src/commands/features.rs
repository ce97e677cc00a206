//! `features extract`: batch feature dumps from a manifest.

use std::path::PathBuf;

use clap::{Args, Subcommand};
use rayon::prelude::*;
use scantex_core::features::{
    save_features, ExtractorParams, FeatureExtractor, FeatureKind, FeatureVector,
};
use scantex_core::imgcore::{load_image, read_manifest};
use scantex_core::Error;

use super::{CmdResult, CommandError, Context};

#[derive(Subcommand)]
pub enum FeaturesCommand {
    /// Extract one feature family for every record of a manifest.
    Extract(ExtractArgs),
}

#[derive(Args)]
pub struct ExtractArgs {
    /// Feature method name.
    #[arg(long)]
    method: String,

    /// Manifest CSV (paths relative to --root).
    #[arg(long)]
    manifest: PathBuf,

    /// Output directory; the dump lands at `<out>/<method>.bin` (or
    /// `.csv`).
    #[arg(long)]
    out: PathBuf,

    /// Dump format.
    #[arg(long, default_value = "packed", value_parser = ["packed", "csv"])]
    format: String,

    /// Resize side for image-shaped features.
    #[arg(long, default_value_t = 64)]
    d: usize,

    /// JPEG quality for error-level analysis.
    #[arg(long, default_value_t = 70)]
    ela_quality: u32,

    /// Singular values kept by the SVD feature.
    #[arg(long, default_value_t = 100)]
    svd_k: usize,
}

pub fn run(ctx: &Context, command: FeaturesCommand) -> CmdResult {
    match command {
        FeaturesCommand::Extract(args) => extract(ctx, args),
    }
}

pub fn parse_method(name: &str) -> Result<FeatureKind, CommandError> {
    FeatureKind::parse(name).ok_or_else(|| {
        let valid: Vec<&str> = FeatureKind::ALL.iter().map(|k| k.as_str()).collect();
        CommandError::usage(Error::Domain(format!(
            "unknown --method '{name}'; valid methods: {}",
            valid.join(", ")
        )))
    })
}

fn extract(ctx: &Context, args: ExtractArgs) -> CmdResult {
    let kind = parse_method(&args.method)?;
    let manifest = read_manifest(&args.manifest)?;
    let extractor = FeatureExtractor::new(ExtractorParams {
        d: args.d,
        ela_quality: args.ela_quality,
        svd_k: args.svd_k,
        ..ExtractorParams::default()
    });

    let features: Vec<FeatureVector> = manifest
        .records
        .par_iter()
        .map(|record| -> Result<FeatureVector, Error> {
            let img = load_image(ctx.root.join(&record.path))?;
            extractor.extract(kind, &img)
        })
        .collect::<Result<Vec<_>, Error>>()?;

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CommandError::from(Error::io(&args.out, e)))?;
    let path = match args.format.as_str() {
        "csv" => {
            let path = args.out.join(format!("{kind}.csv"));
            let mut text = String::new();
            text.push_str(&format!(
                "# method={} params={} length={} count={}\n",
                features[0].method,
                features[0].params,
                features[0].values.len(),
                features.len()
            ));
            for (record, feature) in manifest.records.iter().zip(&features) {
                text.push_str(&record.path);
                text.push(',');
                text.push_str(record.label.as_str());
                for v in &feature.values {
                    text.push_str(&format!(",{v}"));
                }
                text.push('\n');
            }
            std::fs::write(&path, text).map_err(|e| CommandError::from(Error::io(&path, e)))?;
            path
        }
        _ => {
            let path = args.out.join(format!("{kind}.bin"));
            save_features(&features, &path)?;
            path
        }
    };
    println!(
        "extracted {} x {} ({} values each) to {}",
        features.len(),
        kind,
        features[0].values.len(),
        path.display()
    );
    Ok(())
}
