//! `palette gen`: render a QR-tracked color palette sheet.

use std::path::PathBuf;

use clap::{Args, Subcommand};
use scantex_core::imgcore::save_image;
use scantex_core::qrpalette::{
    default_palette_colors, render_palette_sheet, Dpi, PaletteSpec, SheetLayout,
};
use scantex_core::Error;

use super::{CmdResult, CommandError, Context};

#[derive(Subcommand)]
pub enum PaletteCommand {
    /// Render a palette sheet plus its layout JSON.
    Gen(GenArgs),
}

#[derive(Args)]
pub struct GenArgs {
    /// Number of palette colors.
    #[arg(long, default_value_t = 50)]
    colors: usize,

    /// Output sheet image (a `.layout.json` sibling is written too).
    #[arg(long, default_value = "sheet.png")]
    out: PathBuf,

    /// Scan resolution this sheet is intended for (recorded in the
    /// layout).
    #[arg(long, default_value_t = 600, value_parser = parse_dpi)]
    dpi: u32,

    /// Patch width in pixels.
    #[arg(long, default_value_t = 120)]
    patch_w: usize,

    /// Patch height in pixels.
    #[arg(long, default_value_t = 160)]
    patch_h: usize,

    /// Pixels per QR module.
    #[arg(long, default_value_t = 4)]
    module_px: usize,
}

#[derive(serde::Serialize, serde::Deserialize)]
pub struct LayoutFile {
    pub dpi: u32,
    pub layout: SheetLayout,
}

pub fn run(_ctx: &Context, command: PaletteCommand) -> CmdResult {
    match command {
        PaletteCommand::Gen(args) => gen(args),
    }
}

fn gen(args: GenArgs) -> CmdResult {
    Dpi::from_value(args.dpi)?;
    let cols = 5.min(args.colors.max(1));
    let spec = PaletteSpec {
        colors: default_palette_colors(args.colors),
        patch_w: args.patch_w,
        patch_h: args.patch_h,
        qr_module_px: args.module_px,
        rows: args.colors.max(1).div_ceil(cols),
        cols,
    };
    let (sheet, layout) = render_palette_sheet(&spec)?;
    save_image(&sheet, &args.out)?;

    let layout_path = layout_path_for(&args.out);
    let file = LayoutFile {
        dpi: args.dpi,
        layout,
    };
    std::fs::write(
        &layout_path,
        serde_json::to_string_pretty(&file).expect("layout serializes"),
    )
    .map_err(|e| CommandError::from(Error::io(&layout_path, e)))?;

    println!(
        "wrote {} ({} patches, {}x{}) and {}",
        args.out.display(),
        args.colors,
        sheet.width(),
        sheet.height(),
        layout_path.display()
    );
    Ok(())
}

fn parse_dpi(s: &str) -> Result<u32, String> {
    match s {
        "300" => Ok(300),
        "600" => Ok(600),
        other => Err(format!("dpi must be 300 or 600, got {other}")),
    }
}

pub fn layout_path_for(sheet: &std::path::Path) -> PathBuf {
    let mut name = sheet
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "sheet".into());
    name.push_str(".layout.json");
    sheet.with_file_name(name)
}
