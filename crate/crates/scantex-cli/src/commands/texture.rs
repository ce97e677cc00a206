//! `texture extract|apply|select`.

use std::path::PathBuf;

use clap::{Args, Subcommand};
use rayon::prelude::*;
use scantex_core::evalmetrics::BuiltinEmbedder;
use scantex_core::imgcore::{load_image, save_image, ImageBuffer};
use scantex_core::qrpalette::{
    isolate_texture, locate_patches_with, parse_color_payload, qr_decode, save_texture, Dpi,
    PaperKind, Rect, SegmentationParams,
};
use scantex_core::texsim::{apply_texture, select_best_texture, FitPolicy, TextureBank};
use scantex_core::Error;

use super::palette::LayoutFile;
use super::{collect_images, CmdResult, CommandError, Context};

#[derive(Subcommand)]
pub enum TextureCommand {
    /// Locate patches on a scanned sheet, decode their QRs (layout JSON
    /// as fallback), and write one texture file per patch.
    Extract(ExtractArgs),
    /// Add a bank texture to every image under a directory.
    Apply(ApplyArgs),
    /// Pick the bank texture whose candidate image set has the lowest FID
    /// against a reference set.
    Select(SelectArgs),
}

#[derive(Args)]
pub struct ExtractArgs {
    /// Scanned palette sheet.
    #[arg(long)]
    scan: PathBuf,

    /// Output texture bank directory.
    #[arg(long)]
    out: PathBuf,

    /// Layout JSON from `palette gen`, used when a QR cannot be decoded.
    #[arg(long)]
    layout: Option<PathBuf>,

    /// Background luma threshold for segmentation.
    #[arg(long, default_value_t = 240.0)]
    bg_threshold: f64,

    /// Margin fraction eroded per patch side before isolation.
    #[arg(long, default_value_t = 0.05)]
    margin: f64,

    /// Subtract the patch mean, keeping only the texture-only residual.
    #[arg(long, default_value_t = false)]
    zero_mean: bool,

    /// Scan resolution recorded in the texture sidecars.
    #[arg(long, default_value_t = 600, value_parser = parse_dpi)]
    dpi: u32,

    /// Paper stock recorded in the texture sidecars.
    #[arg(long, default_value = "glossy", value_parser = ["bond", "glossy"])]
    paper: String,
}

#[derive(Args)]
pub struct ApplyArgs {
    /// Texture bank directory (tex_NNN.png files).
    #[arg(long)]
    bank: PathBuf,

    /// 1-based texture id.
    #[arg(long)]
    id: usize,

    /// Input image directory (recursed).
    #[arg(long, name = "in")]
    input: PathBuf,

    /// Output directory mirroring the input tree.
    #[arg(long)]
    out: PathBuf,

    /// Fit policy for size mismatches.
    #[arg(long, default_value = "center_crop", value_parser = ["center_crop", "mirror_tile"])]
    fit: String,
}

#[derive(Args)]
pub struct SelectArgs {
    /// Texture bank directory.
    #[arg(long)]
    bank: PathBuf,

    /// Directory with one subdirectory per texture id (1, 2, ...), each
    /// holding that texture's candidate images.
    #[arg(long)]
    candidates: PathBuf,

    /// Reference image directory.
    #[arg(long)]
    reference: PathBuf,
}

fn parse_dpi(s: &str) -> Result<u32, String> {
    match s {
        "300" => Ok(300),
        "600" => Ok(600),
        other => Err(format!("dpi must be 300 or 600, got {other}")),
    }
}

pub fn run(ctx: &Context, command: TextureCommand) -> CmdResult {
    match command {
        TextureCommand::Extract(args) => extract(ctx, args),
        TextureCommand::Apply(args) => apply(args),
        TextureCommand::Select(args) => select(args),
    }
}

fn extract(_ctx: &Context, args: ExtractArgs) -> CmdResult {
    // Every failure here is a usage-level problem per the command's
    // contract (bad scan, missing layout): exit 2.
    extract_inner(args).map_err(|e| CommandError::usage(e.error))
}

fn extract_inner(args: ExtractArgs) -> CmdResult {
    let scan = load_image(&args.scan)?;
    let dpi = Dpi::from_value(args.dpi)?;
    let paper = if args.paper == "bond" {
        PaperKind::Bond
    } else {
        PaperKind::Glossy
    };

    let layout: Option<LayoutFile> = match &args.layout {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CommandError::from(Error::io(path, e)))?;
            Some(
                serde_json::from_str(&text)
                    .map_err(|e| Error::Format(format!("bad layout JSON: {e}")))?,
            )
        }
        None => None,
    };

    let params = SegmentationParams {
        bg_threshold: args.bg_threshold,
        ..SegmentationParams::default()
    };
    // Segmentation first; the layout stands in when the scan cannot be
    // segmented at all.
    let pairs: Vec<(Rect, Rect)> = match locate_patches_with(&scan, &params) {
        Ok(pairs) => pairs,
        Err(err) => match &layout {
            Some(file) => {
                eprintln!("warning: segmentation failed ({err}); using layout rectangles");
                file.layout
                    .cells
                    .iter()
                    .map(|c| (c.patch, c.qr))
                    .collect()
            }
            None => return Err(err.into()),
        },
    };

    let mut colors: Vec<Option<[u8; 3]>> = Vec::with_capacity(pairs.len());
    let mut fallbacks = 0usize;
    let mut diagnostics = Vec::new();
    for (idx, (_, qr_rect)) in pairs.iter().enumerate() {
        match qr_decode(&scan, *qr_rect).and_then(|p| parse_color_payload(&p)) {
            Ok(color) => colors.push(Some(color)),
            Err(err) => {
                let from_layout = layout
                    .as_ref()
                    .and_then(|f| f.layout.cells.get(idx))
                    .map(|c| c.color);
                match from_layout {
                    Some(color) => {
                        eprintln!(
                            "warning: patch {}: QR undecodable ({err}); using layout color",
                            idx + 1
                        );
                        fallbacks += 1;
                        colors.push(Some(color));
                    }
                    None => {
                        diagnostics.push(format!("patch {}: {err}", idx + 1));
                        colors.push(None);
                    }
                }
            }
        }
    }
    if !diagnostics.is_empty() {
        for d in &diagnostics {
            eprintln!("error: {d}");
        }
        return Err(Error::Uncorrectable(format!(
            "{} of {} patches have no declared color (no layout fallback)",
            diagnostics.len(),
            pairs.len()
        ))
        .into());
    }

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CommandError::from(Error::io(&args.out, e)))?;
    for (idx, ((patch_rect, _), color)) in pairs.iter().zip(&colors).enumerate() {
        let mut texture = isolate_texture(
            &scan,
            *patch_rect,
            color.expect("failures already handled"),
            args.margin,
        )?;
        texture.resolution_dpi = dpi;
        texture.paper_kind = paper;
        if args.zero_mean {
            texture = texture.zero_meaned();
        }
        let path = args.out.join(format!("tex_{:03}.png", idx + 1));
        save_texture(&texture, &path)?;
    }

    println!(
        "extracted {} textures to {} ({} via layout fallback)",
        pairs.len(),
        args.out.display(),
        fallbacks
    );
    Ok(())
}

fn apply(args: ApplyArgs) -> CmdResult {
    let bank = TextureBank::from_dir(&args.bank)?;
    let texture = bank.get(args.id)?;
    let fit = if args.fit == "mirror_tile" {
        FitPolicy::MirrorTile
    } else {
        FitPolicy::CenterCrop
    };
    let files = collect_images(&args.input)?;
    let outputs: Vec<PathBuf> = files
        .par_iter()
        .map(|path| -> Result<PathBuf, Error> {
            let rel = path.strip_prefix(&args.input).expect("walked under input");
            let img = load_image(path)?;
            let out = apply_texture(&img, texture, fit)?;
            let dest = args.out.join(rel);
            if let Some(parent) = dest.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            save_image(&out, &dest)?;
            Ok(dest)
        })
        .collect::<Result<Vec<_>, Error>>()?;
    println!(
        "applied texture {} to {} images under {}",
        args.id,
        outputs.len(),
        args.out.display()
    );
    Ok(())
}

fn load_dir(dir: &std::path::Path) -> Result<Vec<ImageBuffer>, Error> {
    collect_images(dir)?.iter().map(load_image).collect()
}

fn select(args: SelectArgs) -> CmdResult {
    let bank = TextureBank::from_dir(&args.bank)?;
    let reference = load_dir(&args.reference)?;
    let candidates: Vec<Vec<ImageBuffer>> = (1..=bank.len())
        .map(|id| load_dir(&args.candidates.join(id.to_string())))
        .collect::<Result<Vec<_>, Error>>()?;
    let (best_id, best_fid) =
        select_best_texture(&bank, &candidates, &reference, &BuiltinEmbedder)?;
    println!("best texture: id {best_id} (FID {best_fid:?})");
    Ok(())
}
