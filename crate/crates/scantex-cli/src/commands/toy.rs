//! `toy gen`: the bundled desk-scale dataset generator.

use std::path::PathBuf;

use clap::{Args, Subcommand};
use scantex_core::protocol::toy::{generate_toy_dataset, ToyOptions};

use super::{CmdResult, Context};

#[derive(Subcommand)]
pub enum ToyCommand {
    /// Generate synthetic subjects, pseudo-morphs for four blend-weight
    /// tools, degraded domains, a manifest, and experiment configs.
    Gen(GenArgs),
}

#[derive(Args)]
pub struct GenArgs {
    /// Output dataset root.
    #[arg(long)]
    out: PathBuf,

    /// Number of synthetic subjects.
    #[arg(long, default_value_t = 48)]
    subjects: usize,

    /// Bona fide images per subject.
    #[arg(long, default_value_t = 2)]
    shots: usize,

    /// Pseudo-morphs per tool.
    #[arg(long, default_value_t = 150)]
    morphs_per_tool: usize,

    /// Image side length in pixels.
    #[arg(long, default_value_t = 96)]
    size: usize,
}

pub fn run(ctx: &Context, command: ToyCommand) -> CmdResult {
    match command {
        ToyCommand::Gen(args) => gen(ctx, args),
    }
}

fn gen(ctx: &Context, args: GenArgs) -> CmdResult {
    let opts = ToyOptions {
        subjects: args.subjects,
        shots_per_subject: args.shots,
        morphs_per_tool: args.morphs_per_tool,
        size: args.size,
        seed: ctx.seed,
        ..ToyOptions::default()
    };
    let toy = generate_toy_dataset(&args.out, &opts)?;
    println!(
        "generated {} records under {} (manifest {}, configs {} / {})",
        toy.manifest.records.len(),
        args.out.display(),
        toy.manifest_path.display(),
        toy.exp1_config_path.display(),
        toy.exp3_config_path.display()
    );
    Ok(())
}
