//! `scantex`: palette sheets, texture extraction and transfer, feature
//! dumps, FID, SVM training, and the leave-one-tool-out evaluation
//! harness, all behind one reproducible binary.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or
//! configuration errors.

mod commands;

use clap::{Parser, Subcommand};
use scantex_core::Error;

#[derive(Parser)]
#[command(
    name = "scantex",
    version,
    about = "Print/scan texture simulation and morphing-attack detection toolkit"
)]
struct Cli {
    /// Dataset root; manifest paths resolve against it.
    #[arg(long, global = true, env = "SCANTEX_ROOT", default_value = ".")]
    root: std::path::PathBuf,

    /// Seed behind every random choice a command makes.
    #[arg(long, global = true, env = "SCANTEX_SEED", default_value_t = 42)]
    seed: u64,

    /// Worker threads for batch commands (0 = all logical cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Emit errors as JSON records on stderr.
    #[arg(long, global = true, default_value_t = false)]
    json_errors: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Palette calibration sheets.
    Palette {
        #[command(subcommand)]
        command: commands::palette::PaletteCommand,
    },
    /// Texture isolation, transfer, and selection.
    Texture {
        #[command(subcommand)]
        command: commands::texture::TextureCommand,
    },
    /// Noise controls.
    Noise {
        #[command(subcommand)]
        command: commands::noise::NoiseCommand,
    },
    /// Feature extraction.
    Features {
        #[command(subcommand)]
        command: commands::features::FeaturesCommand,
    },
    /// Fréchet distance between two image sets (directories of images or
    /// packed embedding files).
    Fid(commands::fid::FidArgs),
    /// Train one detector per configured feature on the full training
    /// sources.
    Train(commands::evalcmd::TrainArgs),
    /// Score an external manifest with a trained detector.
    Score(commands::evalcmd::ScoreArgs),
    /// Evaluation protocols.
    Eval {
        #[command(subcommand)]
        command: commands::evalcmd::EvalCommand,
    },
    /// DET curve rendering.
    Det {
        #[command(subcommand)]
        command: commands::evalcmd::DetCommand,
    },
    /// Bundled desk-scale dataset generator.
    Toy {
        #[command(subcommand)]
        command: commands::toy::ToyCommand,
    },
}

/// Exit code 2 covers usage and configuration mistakes; everything else
/// that fails at runtime is 1.
fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Domain(_)
        | Error::Layout(_)
        | Error::Parse { .. }
        | Error::Consistency(_)
        | Error::Version { .. }
        | Error::InsufficientSubjects { .. }
        | Error::InsufficientTools { .. } => 2,
        _ => 1,
    }
}

fn main() {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // Thread count affects wall time only; outputs are ordered by
        // input index everywhere.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }

    let ctx = commands::Context {
        root: cli.root,
        seed: cli.seed,
    };
    let result = match cli.command {
        Command::Palette { command } => commands::palette::run(&ctx, command),
        Command::Texture { command } => commands::texture::run(&ctx, command),
        Command::Noise { command } => commands::noise::run(&ctx, command),
        Command::Features { command } => commands::features::run(&ctx, command),
        Command::Fid(args) => commands::fid::run(&ctx, args),
        Command::Train(args) => commands::evalcmd::run_train(&ctx, args),
        Command::Score(args) => commands::evalcmd::run_score(&ctx, args),
        Command::Eval { command } => commands::evalcmd::run_eval(&ctx, command),
        Command::Det { command } => commands::evalcmd::run_det(&ctx, command),
        Command::Toy { command } => commands::toy::run(&ctx, command),
    };

    if let Err(outcome) = result {
        let code = outcome.exit_code.unwrap_or_else(|| exit_code_for(&outcome.error));
        if cli.json_errors {
            let record = serde_json::json!({
                "error": outcome.error.to_string(),
                "exit_code": code,
            });
            eprintln!("{record}");
        } else {
            eprintln!("error: {}", outcome.error);
        }
        std::process::exit(code);
    }
}
