//! `train`, `score`, `eval loo`, and `det plot`.

use std::path::PathBuf;

use clap::{Args, Subcommand};
use scantex_core::evalmetrics::{det_curve, eer, ScoreSet};
use scantex_core::imgcore::{read_manifest, Label, MorphTool};
use scantex_core::protocol::{
    load_detector, report, run_experiment, save_detector, score_manifest, train_full,
    ExperimentConfig,
};
use scantex_core::Error;

use super::{CmdResult, CommandError, Context};

#[derive(Args)]
pub struct TrainArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,

    /// Manifest CSV (paths relative to --root).
    #[arg(long)]
    manifest: PathBuf,

    /// Output directory for model files.
    #[arg(long, default_value = "models")]
    out: PathBuf,
}

#[derive(Args)]
pub struct ScoreArgs {
    /// Model stem (the path passed to train, without extensions).
    #[arg(long)]
    model: PathBuf,

    /// Manifest CSV to score (paths relative to --root).
    #[arg(long)]
    manifest: PathBuf,

    /// Output scores CSV.
    #[arg(long, default_value = "scores.csv")]
    out: PathBuf,
}

#[derive(Subcommand)]
pub enum EvalCommand {
    /// Leave-one-morph-tool-out protocol over every configured feature.
    Loo(LooArgs),
}

#[derive(Args)]
pub struct LooArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,

    /// Manifest CSV (paths relative to --root).
    #[arg(long)]
    manifest: PathBuf,

    /// Report root; results land under `<out>/<experiment name>/`.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Subcommand)]
pub enum DetCommand {
    /// Render a DET curve SVG from a scores CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
pub struct PlotArgs {
    /// Scores CSV written by `score` (path,score,label,morph_tool).
    #[arg(long)]
    scores: PathBuf,

    /// Output SVG path.
    #[arg(long, default_value = "det.svg")]
    out: PathBuf,
}

pub fn run_train(ctx: &Context, args: TrainArgs) -> CmdResult {
    let config = ExperimentConfig::load(&args.config)?;
    let manifest = read_manifest(&args.manifest)?;
    let detectors = train_full(&config, &manifest, &ctx.root)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CommandError::from(Error::io(&args.out, e)))?;
    for detector in &detectors {
        let stem = args.out.join(format!("{}_{}", config.name, detector.kind));
        save_detector(detector, &stem)?;
        println!(
            "trained {} ({} support vectors) -> {}.svmjson",
            detector.kind,
            detector.model.support_vectors.len(),
            stem.display()
        );
    }
    Ok(())
}

pub fn run_score(ctx: &Context, args: ScoreArgs) -> CmdResult {
    let detector = load_detector(&args.model)?;
    let manifest = read_manifest(&args.manifest)?;
    let scores = score_manifest(&detector, &manifest, &ctx.root)?;

    let mut text = String::from("path,score,label,morph_tool\n");
    for (record, entry) in manifest.records.iter().zip(&scores.entries) {
        text.push_str(&format!(
            "{},{},{},{}\n",
            record.path, entry.score, entry.label, entry.morph_tool
        ));
    }
    std::fs::write(&args.out, text)
        .map_err(|e| CommandError::from(Error::io(&args.out, e)))?;

    let classes: (usize, usize) = scores.entries.iter().fold((0, 0), |(b, m), e| match e.label {
        Label::Bonafide => (b + 1, m),
        Label::Morph => (b, m + 1),
    });
    if classes.0 > 0 && classes.1 > 0 {
        let (value, thr) = eer(&det_curve(&scores)?)?;
        println!(
            "scored {} records ({} bona fide / {} morph), EER {:?} at threshold {:?} -> {}",
            scores.entries.len(),
            classes.0,
            classes.1,
            value,
            thr,
            args.out.display()
        );
    } else {
        println!(
            "scored {} records -> {}",
            scores.entries.len(),
            args.out.display()
        );
    }
    Ok(())
}

pub fn run_eval(ctx: &Context, command: EvalCommand) -> CmdResult {
    match command {
        EvalCommand::Loo(args) => loo(ctx, args),
    }
}

fn loo(ctx: &Context, args: LooArgs) -> CmdResult {
    let config = ExperimentConfig::load(&args.config)?;
    let manifest = read_manifest(&args.manifest)?;
    let results = run_experiment(&config, &manifest, &ctx.root, &args.out)?;
    for r in &results {
        println!(
            "fold={} feature={} eer={:?} (test {} bona fide / {} morph)",
            r.held_out_tool, r.feature, r.eer, r.n_test_bonafide, r.n_test_morph
        );
    }
    println!(
        "wrote {}",
        args.out.join(&config.name).join("summary.csv").display()
    );
    Ok(())
}

pub fn run_det(_ctx: &Context, command: DetCommand) -> CmdResult {
    match command {
        DetCommand::Plot(args) => plot(args),
    }
}

/// Parses the `score` output format back into a score set.
fn read_scores_csv(path: &std::path::Path) -> Result<ScoreSet, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut scores = ScoreSet::default();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let score: f64 = fields[1].parse().map_err(|e| Error::Parse {
            line: idx + 1,
            msg: format!("bad score: {e}"),
        })?;
        let label = Label::parse(fields[2]).ok_or_else(|| Error::Parse {
            line: idx + 1,
            msg: format!("bad label '{}'", fields[2]),
        })?;
        let tool = MorphTool::parse(fields[3]).ok_or_else(|| Error::Parse {
            line: idx + 1,
            msg: "empty morph_tool".into(),
        })?;
        scores.push(score, label, tool)?;
    }
    Ok(scores)
}

fn plot(args: PlotArgs) -> CmdResult {
    let scores = read_scores_csv(&args.scores)?;
    let curve = det_curve(&scores)?;
    let (value, _) = eer(&curve)?;
    let svg = report::det_svg(&[(format!("EER {value:.4}"), &curve)]);
    std::fs::write(&args.out, svg)
        .map_err(|e| CommandError::from(Error::io(&args.out, e)))?;
    println!("EER {:?} -> {}", value, args.out.display());
    Ok(())
}
