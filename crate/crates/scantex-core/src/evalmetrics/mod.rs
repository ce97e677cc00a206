//! Morphing-attack detection metrics (MACER, BPCER, EER, DET curves),
//! Fréchet distance between embedded image sets, and the
//! cycle-consistency loss evaluator.
//!
//! Score orientation is fixed throughout: higher means more morph-like,
//! and a sample is classified as a morph when `score >= threshold`.

mod fid;

pub use fid::{
    embed_builtin, fid, gaussian_stats, load_embeddings, save_embeddings, BuiltinEmbedder,
    Embedder, GaussianStats, SHRINKAGE_FACTOR,
};

use crate::error::{Error, Result};
use crate::imgcore::{Label, MorphTool};

/// One scored sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEntry {
    pub score: f64,
    pub label: Label,
    pub morph_tool: MorphTool,
}

/// Per-sample detector scores with labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSet {
    pub entries: Vec<ScoreEntry>,
}

impl ScoreSet {
    pub fn new(entries: Vec<ScoreEntry>) -> Result<Self> {
        if entries.iter().any(|e| !e.score.is_finite()) {
            return Err(Error::NonFinite("scores must be finite".into()));
        }
        Ok(Self { entries })
    }

    pub fn push(&mut self, score: f64, label: Label, morph_tool: MorphTool) -> Result<()> {
        if !score.is_finite() {
            return Err(Error::NonFinite(format!("score {score}")));
        }
        self.entries.push(ScoreEntry {
            score,
            label,
            morph_tool,
        });
        Ok(())
    }

    fn bonafide_scores(&self) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|e| e.label == Label::Bonafide)
            .map(|e| e.score)
            .collect()
    }

    fn morph_scores(&self) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|e| e.label == Label::Morph)
            .map(|e| e.score)
            .collect()
    }
}

/// Morphing Attack Classification Error Rate for one morph tool: the
/// proportion of that tool's attacks classified as bona fide at the
/// threshold.
pub fn macer(scores: &ScoreSet, tool: &MorphTool, threshold: f64) -> Result<f64> {
    let tool_scores: Vec<f64> = scores
        .entries
        .iter()
        .filter(|e| e.label == Label::Morph && &e.morph_tool == tool)
        .map(|e| e.score)
        .collect();
    if tool_scores.is_empty() {
        return Err(Error::EmptyClass(format!("no morph entries for {tool}")));
    }
    let detected = tool_scores.iter().filter(|&&s| s >= threshold).count();
    Ok(1.0 - detected as f64 / tool_scores.len() as f64)
}

/// MACER pooled over every morph tool, used for DET curves.
pub fn macer_pooled(scores: &ScoreSet, threshold: f64) -> Result<f64> {
    let morphs = scores.morph_scores();
    if morphs.is_empty() {
        return Err(Error::EmptyClass("no morph entries".into()));
    }
    let detected = morphs.iter().filter(|&&s| s >= threshold).count();
    Ok(1.0 - detected as f64 / morphs.len() as f64)
}

/// Bona fide Presentation Classification Error Rate: the proportion of
/// bona fide samples classified as morphs at the threshold.
pub fn bpcer(scores: &ScoreSet, threshold: f64) -> Result<f64> {
    let bonafides = scores.bonafide_scores();
    if bonafides.is_empty() {
        return Err(Error::EmptyClass("no bona fide entries".into()));
    }
    let rejected = bonafides.iter().filter(|&&s| s >= threshold).count();
    Ok(rejected as f64 / bonafides.len() as f64)
}

/// Detection error trade-off curve: `(threshold, macer, bpcer)` triples at
/// increasing thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct DetCurve {
    pub points: Vec<(f64, f64, f64)>,
}

/// Sweeps thresholds over the distinct score midpoints plus the two
/// infinities; MACER is pooled over all tools.
pub fn det_curve(scores: &ScoreSet) -> Result<DetCurve> {
    let morphs = scores.morph_scores();
    let bonafides = scores.bonafide_scores();
    if morphs.is_empty() {
        return Err(Error::EmptyClass("no morph entries".into()));
    }
    if bonafides.is_empty() {
        return Err(Error::EmptyClass("no bona fide entries".into()));
    }

    let mut distinct: Vec<f64> = scores.entries.iter().map(|e| e.score).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();

    let mut thresholds = Vec::with_capacity(distinct.len() + 1);
    thresholds.push(f64::NEG_INFINITY);
    for pair in distinct.windows(2) {
        thresholds.push((pair[0] + pair[1]) / 2.0);
    }
    thresholds.push(f64::INFINITY);

    let points = thresholds
        .into_iter()
        .map(|t| {
            let m = macer_pooled(scores, t).expect("morphs checked non-empty");
            let b = bpcer(scores, t).expect("bonafides checked non-empty");
            (t, m, b)
        })
        .collect();
    Ok(DetCurve { points })
}

/// Equal error rate: the operating point where MACER equals BPCER,
/// linearly interpolated between bracketing thresholds when there is no
/// exact crossing. Returns `(eer, threshold)`.
pub fn eer(curve: &DetCurve) -> Result<(f64, f64)> {
    if curve.points.is_empty() {
        return Err(Error::EmptyClass("empty DET curve".into()));
    }
    // diff = macer - bpcer is non-decreasing in the threshold: find the
    // first non-negative point.
    let mut prev: Option<&(f64, f64, f64)> = None;
    for point in &curve.points {
        let diff = point.1 - point.2;
        if diff >= 0.0 {
            if diff == 0.0 {
                return Ok((point.1, point.0));
            }
            let Some(&(pt, pm, pb)) = prev else {
                return Ok((point.1.max(point.2), point.0));
            };
            // Interpolate between (pm - pb < 0) and (diff > 0).
            let d0 = pm - pb;
            let d1 = diff;
            let t = d0 / (d0 - d1); // in (0, 1]
            let eer_value = pm + t * (point.1 - pm);
            let thr = if pt.is_finite() && point.0.is_finite() {
                pt + t * (point.0 - pt)
            } else if pt.is_finite() {
                pt
            } else {
                point.0
            };
            return Ok((eer_value, thr));
        }
        prev = Some(point);
    }
    let last = curve.points.last().unwrap();
    Ok((last.1.max(last.2), last.0))
}

/// Convenience: DET curve and EER in one call.
pub fn eer_from_scores(scores: &ScoreSet) -> Result<(f64, f64)> {
    eer(&det_curve(scores)?)
}

/// Cycle-consistency loss between two reconstruction pairs: per-element
/// mean absolute error averaged over each set, summed across the two
/// directions.
pub fn cycle_loss(
    x_set: &[Vec<f64>],
    x_recon_set: &[Vec<f64>],
    y_set: &[Vec<f64>],
    y_recon_set: &[Vec<f64>],
) -> Result<f64> {
    fn direction(originals: &[Vec<f64>], recons: &[Vec<f64>]) -> Result<f64> {
        if originals.is_empty() || originals.len() != recons.len() {
            return Err(Error::Dimension(format!(
                "paired sets must be non-empty and equal length, got {} vs {}",
                originals.len(),
                recons.len()
            )));
        }
        let mut total = 0.0;
        for (orig, recon) in originals.iter().zip(recons) {
            if orig.is_empty() || orig.len() != recon.len() {
                return Err(Error::Dimension(format!(
                    "paired elements must match in shape, got {} vs {}",
                    orig.len(),
                    recon.len()
                )));
            }
            let mae: f64 = orig
                .iter()
                .zip(recon)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / orig.len() as f64;
            total += mae;
        }
        Ok(total / originals.len() as f64)
    }
    Ok(direction(x_set, x_recon_set)? + direction(y_set, y_recon_set)?)
}
