//! The experiment harness: subject-disjoint splits, leave-one-morph-tool-
//! out folds, end-to-end experiment runs with report generation, and the
//! pseudo-morph generator for desk-scale testing.

pub mod report;
pub mod toy;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evalmetrics::{det_curve, eer, DetCurve, ScoreSet};
use crate::features::{ExtractorParams, FeatureExtractor, FeatureKind, FeatureVector};
use crate::imgcore::{
    load_image, save_image, DatasetManifest, ImageBuffer, Label, MorphTool, SampleRecord, Source,
};
use crate::learn::{
    fit_standardizer, load_model, save_model, svm_score, svm_train, ModelFingerprint,
    Standardizer, SvmModel, TrainParams,
};

/// Stable per-item seed derivation (FNV-1a over the tag, mixed with the
/// base seed) so batch operations are reproducible regardless of
/// traversal or thread order.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ base.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

/// SHA-256 over the canonical record serialization, hex-encoded.
pub fn manifest_hash(manifest: &DatasetManifest) -> String {
    let mut hasher = Sha256::new();
    for r in &manifest.records {
        hasher.update(r.path.as_bytes());
        hasher.update(b",");
        hasher.update(r.subject_id.as_bytes());
        hasher.update(b",");
        hasher.update(r.label.as_str().as_bytes());
        hasher.update(b",");
        hasher.update(r.morph_tool.as_str().as_bytes());
        hasher.update(b",");
        hasher.update(r.source.as_str().as_bytes());
        hasher.update(b"\n");
    }
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn default_split_ratio() -> f64 {
    0.7
}

fn default_test_sources() -> Vec<Source> {
    vec![Source::PsHandcrafted]
}

/// SVM hyperparameters as they appear in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub c: f64,
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        let p = TrainParams::default();
        Self {
            c: p.c,
            gamma: p.gamma,
            tol: p.tol,
            max_passes: p.max_passes,
        }
    }
}

impl ClassifierConfig {
    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            c: self.c,
            gamma: self.gamma,
            tol: self.tol,
            max_passes: self.max_passes,
        }
    }
}

/// One experiment: which source domains train the detector, which are
/// scored, which features run, and how the subject split is seeded.
///
/// `test_sources` is independent of `training_sources` by design: adding
/// a training source never changes the test set composition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub training_sources: Vec<Source>,
    #[serde(default = "default_test_sources")]
    pub test_sources: Vec<Source>,
    pub features: Vec<String>,
    #[serde(default)]
    pub feature_params: ExtractorParams,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default = "default_split_ratio")]
    pub split_ratio: f64,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("bad experiment config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.training_sources.is_empty() {
            return Err(Error::Consistency("training_sources is empty".into()));
        }
        if self.test_sources.is_empty() {
            return Err(Error::Consistency("test_sources is empty".into()));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Domain(format!(
                "split_ratio must be in (0, 1), got {}",
                self.split_ratio
            )));
        }
        if self.features.is_empty() {
            return Err(Error::Consistency("features is empty".into()));
        }
        self.feature_kinds()?;
        Ok(())
    }

    pub fn feature_kinds(&self) -> Result<Vec<FeatureKind>> {
        self.features
            .iter()
            .map(|name| {
                FeatureKind::parse(name).ok_or_else(|| {
                    let valid: Vec<&str> =
                        FeatureKind::ALL.iter().map(|k| k.as_str()).collect();
                    Error::Domain(format!(
                        "unknown feature method '{name}'; valid methods: {}",
                        valid.join(", ")
                    ))
                })
            })
            .collect()
    }

    pub fn sha256(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hex_string(&hasher.finalize())
    }
}

/// Shuffles atomic subjects with a seeded PRNG and assigns the first
/// `round(ratio * n)` to the training side.
fn subject_split(
    manifest: &DatasetManifest,
    ratio: f64,
    seed: u64,
) -> Result<(BTreeSet<String>, BTreeSet<String>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Domain(format!(
            "split ratio must be in (0, 1), got {ratio}"
        )));
    }
    let mut subjects = manifest.subjects();
    if subjects.len() < 2 {
        return Err(Error::InsufficientSubjects {
            needed: 2,
            got: subjects.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    subjects.shuffle(&mut rng);
    let n = subjects.len();
    let k = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
    let train: BTreeSet<String> = subjects[..k].iter().cloned().collect();
    let eval: BTreeSet<String> = subjects[k..].iter().cloned().collect();
    Ok((train, eval))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Train,
    Eval,
    Dropped,
}

fn side_of(record: &SampleRecord, train: &BTreeSet<String>) -> Side {
    let subjects = record.subjects();
    let in_train = subjects.iter().filter(|s| train.contains(**s)).count();
    if in_train == subjects.len() {
        Side::Train
    } else if in_train == 0 {
        Side::Eval
    } else {
        // A morph whose parents straddle the split belongs to neither side.
        Side::Dropped
    }
}

/// Splits records subject-disjointly: every record whose subjects (both
/// parents, for a morph) fall on one side lands there; straddling morphs
/// are dropped.
pub fn split_subject_disjoint(
    manifest: &DatasetManifest,
    ratio: f64,
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest)> {
    let (train_set, _eval_set) = subject_split(manifest, ratio, seed)?;
    let mut train = Vec::new();
    let mut eval = Vec::new();
    for record in &manifest.records {
        match side_of(record, &train_set) {
            Side::Train => train.push(record.clone()),
            Side::Eval => eval.push(record.clone()),
            Side::Dropped => {}
        }
    }
    Ok((
        DatasetManifest {
            records: train,
            origin: format!("{} [train split]", manifest.origin),
        },
        DatasetManifest {
            records: eval,
            origin: format!("{} [eval split]", manifest.origin),
        },
    ))
}

/// One leave-one-tool-out fold.
#[derive(Debug, Clone)]
pub struct Fold {
    pub held_out_tool: MorphTool,
    pub train: DatasetManifest,
    pub test: DatasetManifest,
}

/// Builds one fold per morph tool: training morphs exclude the held-out
/// tool entirely, bona fides split subject-disjointly, and test morphs
/// come from the held-out tool on eval-side subjects only.
///
/// The subject split is computed once from the full manifest, so every
/// fold shares it and the test composition is independent of which
/// sources a config later selects.
pub fn loo_folds(manifest: &DatasetManifest, ratio: f64, seed: u64) -> Result<Vec<Fold>> {
    let tools = manifest.morph_tools();
    if tools.len() < 2 {
        return Err(Error::InsufficientTools { got: tools.len() });
    }
    let (train_set, eval_set) = subject_split(manifest, ratio, seed)?;

    let mut folds = Vec::with_capacity(tools.len());
    for tool in tools {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for record in &manifest.records {
            let side = side_of(record, &train_set);
            match (record.label, side) {
                (Label::Bonafide, Side::Train) => train.push(record.clone()),
                (Label::Bonafide, Side::Eval) => test.push(record.clone()),
                (Label::Morph, Side::Train) if record.morph_tool != tool => {
                    train.push(record.clone())
                }
                (Label::Morph, Side::Eval) if record.morph_tool == tool => {
                    test.push(record.clone())
                }
                _ => {}
            }
        }

        // Runtime guarantees, not just test-time ones: subject sets stay
        // disjoint and the held-out tool never reaches training.
        let train_subjects: HashSet<&str> =
            train.iter().flat_map(|r| r.subjects()).collect();
        let test_subjects: HashSet<&str> = test.iter().flat_map(|r| r.subjects()).collect();
        assert!(
            train_subjects.is_disjoint(&test_subjects),
            "subject leakage in fold {tool}"
        );
        assert!(
            train
                .iter()
                .all(|r| r.label == Label::Bonafide || r.morph_tool != tool),
            "held-out tool {tool} leaked into training"
        );
        let _ = &eval_set;

        folds.push(Fold {
            held_out_tool: tool,
            train: DatasetManifest {
                records: train,
                origin: format!("{} [fold train]", manifest.origin),
            },
            test: DatasetManifest {
                records: test,
                origin: format!("{} [fold test]", manifest.origin),
            },
        });
    }
    Ok(folds)
}

/// Per-(fold, feature) outcome.
#[derive(Debug, Clone)]
pub struct FoldResult {
    pub held_out_tool: MorphTool,
    pub feature: FeatureKind,
    pub eer: f64,
    pub eer_threshold: f64,
    pub det_csv: PathBuf,
    pub n_train_bonafide: usize,
    pub n_train_morph: usize,
    pub n_test_bonafide: usize,
    pub n_test_morph: usize,
}

fn filter_sources(records: &[SampleRecord], sources: &[Source]) -> Vec<SampleRecord> {
    records
        .iter()
        .filter(|r| sources.contains(&r.source))
        .cloned()
        .collect()
}

fn label_value(label: Label) -> f64 {
    match label {
        Label::Bonafide => -1.0,
        Label::Morph => 1.0,
    }
}

/// Extracts every configured feature for every record, in parallel,
/// keyed by record path.
fn extract_all(
    records: &[&SampleRecord],
    root: &Path,
    extractor: &FeatureExtractor,
    kinds: &[FeatureKind],
) -> Result<BTreeMap<String, Vec<FeatureVector>>> {
    let extracted: Vec<(String, Vec<FeatureVector>)> = records
        .par_iter()
        .map(|record| -> Result<(String, Vec<FeatureVector>)> {
            let img = load_image(root.join(&record.path))?;
            let features = kinds
                .iter()
                .map(|&k| extractor.extract(k, &img))
                .collect::<Result<Vec<_>>>()?;
            Ok((record.path.clone(), features))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(extracted.into_iter().collect())
}

/// Runs the full protocol for one experiment, writing per-fold DET CSVs
/// and SVGs, a summary CSV, and a metadata JSON under
/// `out_dir/<config.name>/`. On failure, partial results are flushed with
/// a failure marker before the error propagates.
pub fn run_experiment(
    config: &ExperimentConfig,
    manifest: &DatasetManifest,
    root: &Path,
    out_dir: &Path,
) -> Result<Vec<FoldResult>> {
    config.validate()?;
    let kinds = config.feature_kinds()?;

    let present: BTreeSet<Source> = manifest.records.iter().map(|r| r.source).collect();
    let mut wanted: Vec<Source> = config.training_sources.clone();
    wanted.extend(config.test_sources.iter().copied());
    for source in &wanted {
        if !present.contains(source) {
            return Err(Error::Consistency(format!(
                "manifest has no records for requested source '{source}'"
            )));
        }
    }

    let exp_dir = out_dir.join(&config.name);
    std::fs::create_dir_all(&exp_dir).map_err(|e| Error::io(&exp_dir, e))?;

    let folds = loo_folds(manifest, config.split_ratio, config.split_seed)?;
    let extractor = FeatureExtractor::new(config.feature_params);
    let used_sources: BTreeSet<Source> = wanted.iter().copied().collect();
    let used_records: Vec<&SampleRecord> = manifest
        .records
        .iter()
        .filter(|r| used_sources.contains(&r.source))
        .collect();
    let features_by_path = extract_all(&used_records, root, &extractor, &kinds)?;

    let hash = manifest_hash(manifest);
    let mut results: Vec<FoldResult> = Vec::new();
    let run = (|| -> Result<()> {
        for fold in &folds {
            let fold_dir = exp_dir.join(fold.held_out_tool.as_str());
            std::fs::create_dir_all(&fold_dir).map_err(|e| Error::io(&fold_dir, e))?;
            let train_records = filter_sources(&fold.train.records, &config.training_sources);
            let test_records = filter_sources(&fold.test.records, &config.test_sources);

            let mut fold_curves: Vec<(String, DetCurve)> = Vec::new();
            for (kind_idx, &kind) in kinds.iter().enumerate() {
                let x_train: Vec<Vec<f64>> = train_records
                    .iter()
                    .map(|r| features_by_path[&r.path][kind_idx].values.clone())
                    .collect();
                let y_train: Vec<f64> =
                    train_records.iter().map(|r| label_value(r.label)).collect();
                let standardizer = fit_standardizer(&x_train)?;
                let x_train_std = standardizer.transform(&x_train)?;
                let fingerprint = ModelFingerprint {
                    feature_method: kind.as_str().to_string(),
                    feature_params: features_by_path
                        .values()
                        .next()
                        .map(|f| f[kind_idx].params.clone())
                        .unwrap_or_default(),
                    manifest_hash: hash.clone(),
                };
                let model = svm_train(
                    &x_train_std,
                    &y_train,
                    &config.classifier.train_params(),
                    fingerprint,
                )?;

                let mut scores = ScoreSet::default();
                for record in &test_records {
                    let row = standardizer
                        .transform_row(&features_by_path[&record.path][kind_idx].values)?;
                    let score = svm_score(&model, &row)?;
                    scores.push(score, record.label, record.morph_tool.clone())?;
                }
                let curve = det_curve(&scores)?;
                let (eer_value, threshold) = eer(&curve)?;
                let det_csv = fold_dir.join(format!("{kind}.csv"));
                report::write_det_csv(&curve, &det_csv)?;
                fold_curves.push((kind.as_str().to_string(), curve));

                results.push(FoldResult {
                    held_out_tool: fold.held_out_tool.clone(),
                    feature: kind,
                    eer: eer_value,
                    eer_threshold: threshold,
                    det_csv,
                    n_train_bonafide: train_records
                        .iter()
                        .filter(|r| r.label == Label::Bonafide)
                        .count(),
                    n_train_morph: train_records
                        .iter()
                        .filter(|r| r.label == Label::Morph)
                        .count(),
                    n_test_bonafide: test_records
                        .iter()
                        .filter(|r| r.label == Label::Bonafide)
                        .count(),
                    n_test_morph: test_records
                        .iter()
                        .filter(|r| r.label == Label::Morph)
                        .count(),
                });
            }

            let svg_refs: Vec<(String, &DetCurve)> = fold_curves
                .iter()
                .map(|(name, c)| (name.clone(), c))
                .collect();
            let svg_path = fold_dir.join("det.svg");
            std::fs::write(&svg_path, report::det_svg(&svg_refs))
                .map_err(|e| Error::io(&svg_path, e))?;
        }
        Ok(())
    })();

    let failure = run.as_ref().err().map(|e| e.to_string());
    write_summary(&exp_dir, config, &results, failure.as_deref())?;
    write_meta(&exp_dir, config, manifest, &hash)?;
    run?;
    Ok(results)
}

/// Summary CSV: one row per (fold, feature), then the two aggregate row
/// families mirroring the reported layout (mean EER by feature, mean EER
/// by morph method).
fn write_summary(
    exp_dir: &Path,
    config: &ExperimentConfig,
    results: &[FoldResult],
    failure: Option<&str>,
) -> Result<()> {
    let mut out = String::from(
        "fold,feature,eer,n_train_bonafide,n_train_morph,n_test_bonafide,n_test_morph\n",
    );
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.held_out_tool,
            r.feature,
            r.eer,
            r.n_train_bonafide,
            r.n_train_morph,
            r.n_test_bonafide,
            r.n_test_morph
        ));
    }
    let kinds = config.feature_kinds()?;
    for kind in &kinds {
        let eers: Vec<f64> = results
            .iter()
            .filter(|r| r.feature == *kind)
            .map(|r| r.eer)
            .collect();
        if !eers.is_empty() {
            let mean = eers.iter().sum::<f64>() / eers.len() as f64;
            out.push_str(&format!("average_by_feature,{kind},{mean},,,,\n"));
        }
    }
    let mut tools: Vec<MorphTool> = results.iter().map(|r| r.held_out_tool.clone()).collect();
    tools.sort();
    tools.dedup();
    for tool in &tools {
        let eers: Vec<f64> = results
            .iter()
            .filter(|r| &r.held_out_tool == tool)
            .map(|r| r.eer)
            .collect();
        let mean = eers.iter().sum::<f64>() / eers.len() as f64;
        out.push_str(&format!("average_by_morph_method,{tool},{mean},,,,\n"));
    }
    if let Some(msg) = failure {
        out.push_str(&format!("# FAILED: {}\n", msg.replace('\n', " ")));
    }
    let path = exp_dir.join("summary.csv");
    std::fs::write(&path, out).map_err(|e| Error::io(&path, e))
}

fn write_meta(
    exp_dir: &Path,
    config: &ExperimentConfig,
    manifest: &DatasetManifest,
    hash: &str,
) -> Result<()> {
    let tools: Vec<String> = manifest
        .morph_tools()
        .iter()
        .map(|t| t.as_str().to_string())
        .collect();
    let meta = serde_json::json!({
        "experiment": config.name,
        "crate_version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "config_sha256": config.sha256(),
        "manifest_sha256": hash,
        "n_records": manifest.records.len(),
        "morph_tools": tools,
    });
    let path = exp_dir.join("meta.json");
    std::fs::write(&path, serde_json::to_string_pretty(&meta).expect("meta serializes"))
        .map_err(|e| Error::io(&path, e))
}

/// Blend of two equally sized images: `floor(w*a + (1-w)*b)` per sample.
/// With `w = 0.5` this is the pixel average rounded down.
pub fn blend_images(a: &ImageBuffer, b: &ImageBuffer, w: f64) -> Result<ImageBuffer> {
    if a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels() {
        return Err(Error::Dimension(format!(
            "blend shape mismatch: {}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::Domain(format!("blend weight must be in [0, 1], got {w}")));
    }
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (w * x as f64 + (1.0 - w) * y as f64).floor() as u8)
        .collect();
    ImageBuffer::new(a.width(), a.height(), a.channels(), data)
}

/// Generates pseudo-morphs by pixel-averaging random subject pairs from
/// the bona fide digital records; images land under `root/out_rel` and
/// the returned records carry both parents in `subject_id`.
pub fn make_pseudo_morphs(
    manifest: &DatasetManifest,
    root: &Path,
    out_rel: &str,
    seed: u64,
    count: usize,
) -> Result<Vec<SampleRecord>> {
    let bonafides: Vec<&SampleRecord> = manifest
        .records
        .iter()
        .filter(|r| r.label == Label::Bonafide && r.source == Source::Digital)
        .collect();
    let mut subjects: Vec<&str> = bonafides.iter().map(|r| r.subject_id.as_str()).collect();
    subjects.sort_unstable();
    subjects.dedup();
    if subjects.len() < 2 {
        return Err(Error::InsufficientSubjects {
            needed: 2,
            got: subjects.len(),
        });
    }

    let out_dir = root.join(out_rel);
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(count);
    for idx in 0..count {
        let si = rng.random_range(0..subjects.len());
        let sj = loop {
            let j = rng.random_range(0..subjects.len());
            if j != si {
                break j;
            }
        };
        let pick = |subject: &str, rng: &mut ChaCha8Rng| -> &SampleRecord {
            let options: Vec<&&SampleRecord> = bonafides
                .iter()
                .filter(|r| r.subject_id == subject)
                .collect();
            options[rng.random_range(0..options.len())]
        };
        let ra = pick(subjects[si], &mut rng);
        let rb = pick(subjects[sj], &mut rng);
        let img_a = load_image(root.join(&ra.path))?;
        let img_b = load_image(root.join(&rb.path))?;
        let morph = blend_images(&img_a, &img_b, 0.5)?;
        let rel_path = format!("{out_rel}/pseudo_{idx:04}.png");
        save_image(&morph, root.join(&rel_path))?;
        records.push(SampleRecord {
            path: rel_path,
            subject_id: format!("{}+{}", ra.subject_id, rb.subject_id),
            label: Label::Morph,
            morph_tool: MorphTool::Other("pseudo".into()),
            source: Source::Digital,
        });
    }
    Ok(records)
}

/// A feature-specific trained detector: extractor parameters, the fitted
/// standardizer, and the SVM.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedDetector {
    pub kind: FeatureKind,
    pub params: ExtractorParams,
    pub standardizer: Standardizer,
    pub model: SvmModel,
}

#[derive(Serialize, Deserialize)]
struct PipelineSidecar {
    feature: String,
    params: ExtractorParams,
    means: Vec<f64>,
    stds: Vec<f64>,
}

/// Trains one detector per configured feature on every record of the
/// configured training sources (no fold held out), for cross-dataset
/// scoring.
pub fn train_full(
    config: &ExperimentConfig,
    manifest: &DatasetManifest,
    root: &Path,
) -> Result<Vec<TrainedDetector>> {
    config.validate()?;
    let kinds = config.feature_kinds()?;
    let records: Vec<SampleRecord> =
        filter_sources(&manifest.records, &config.training_sources);
    if records.is_empty() {
        return Err(Error::Consistency(
            "no records match the training sources".into(),
        ));
    }
    let refs: Vec<&SampleRecord> = records.iter().collect();
    let extractor = FeatureExtractor::new(config.feature_params);
    let features_by_path = extract_all(&refs, root, &extractor, &kinds)?;
    let hash = manifest_hash(manifest);

    let mut detectors = Vec::with_capacity(kinds.len());
    for (kind_idx, &kind) in kinds.iter().enumerate() {
        let x: Vec<Vec<f64>> = records
            .iter()
            .map(|r| features_by_path[&r.path][kind_idx].values.clone())
            .collect();
        let y: Vec<f64> = records.iter().map(|r| label_value(r.label)).collect();
        let standardizer = fit_standardizer(&x)?;
        let x_std = standardizer.transform(&x)?;
        let model = svm_train(
            &x_std,
            &y,
            &config.classifier.train_params(),
            ModelFingerprint {
                feature_method: kind.as_str().to_string(),
                feature_params: features_by_path
                    .values()
                    .next()
                    .map(|f| f[kind_idx].params.clone())
                    .unwrap_or_default(),
                manifest_hash: hash.clone(),
            },
        )?;
        detectors.push(TrainedDetector {
            kind,
            params: config.feature_params,
            standardizer,
            model,
        });
    }
    Ok(detectors)
}

/// Persists a detector as `<stem>.svmjson`, `<stem>.bin`, and
/// `<stem>.pipeline.json` (feature kind, extractor params, standardizer).
pub fn save_detector(detector: &TrainedDetector, stem: impl AsRef<Path>) -> Result<()> {
    let stem = stem.as_ref();
    let json_path = stem.with_extension("svmjson");
    save_model(&detector.model, &json_path)?;
    let sidecar = PipelineSidecar {
        feature: detector.kind.as_str().to_string(),
        params: detector.params,
        means: detector.standardizer.means.clone(),
        stds: detector.standardizer.stds.clone(),
    };
    let sidecar_path = stem.with_extension("pipeline.json");
    std::fs::write(
        &sidecar_path,
        serde_json::to_string_pretty(&sidecar).expect("sidecar serializes"),
    )
    .map_err(|e| Error::io(&sidecar_path, e))
}

/// Loads a detector saved by [`save_detector`].
pub fn load_detector(stem: impl AsRef<Path>) -> Result<TrainedDetector> {
    let stem = stem.as_ref();
    let model = load_model(stem.with_extension("svmjson"))?;
    let sidecar_path = stem.with_extension("pipeline.json");
    let text =
        std::fs::read_to_string(&sidecar_path).map_err(|e| Error::io(&sidecar_path, e))?;
    let sidecar: PipelineSidecar = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("bad pipeline sidecar: {e}")))?;
    let kind = FeatureKind::parse(&sidecar.feature)
        .ok_or_else(|| Error::Format(format!("unknown feature '{}'", sidecar.feature)))?;
    Ok(TrainedDetector {
        kind,
        params: sidecar.params,
        standardizer: Standardizer {
            means: sidecar.means,
            stds: sidecar.stds,
        },
        model,
    })
}

/// Scores every record of an external manifest with a trained detector.
pub fn score_manifest(
    detector: &TrainedDetector,
    manifest: &DatasetManifest,
    root: &Path,
) -> Result<ScoreSet> {
    let extractor = FeatureExtractor::new(detector.params);
    let rows: Vec<(f64, Label, MorphTool)> = manifest
        .records
        .par_iter()
        .map(|record| -> Result<(f64, Label, MorphTool)> {
            let img = load_image(root.join(&record.path))?;
            let feature = extractor.extract(detector.kind, &img)?;
            let row = detector.standardizer.transform_row(&feature.values)?;
            let score = svm_score(&detector.model, &row)?;
            Ok((score, record.label, record.morph_tool.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut scores = ScoreSet::default();
    for (score, label, tool) in rows {
        scores.push(score, label, tool)?;
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bonafide(path: &str, subject: &str, source: Source) -> SampleRecord {
        SampleRecord {
            path: path.into(),
            subject_id: subject.into(),
            label: Label::Bonafide,
            morph_tool: MorphTool::None,
            source,
        }
    }

    fn morph(path: &str, parents: &str, tool: MorphTool, source: Source) -> SampleRecord {
        SampleRecord {
            path: path.into(),
            subject_id: parents.into(),
            label: Label::Morph,
            morph_tool: tool,
            source,
        }
    }

    fn ten_subject_manifest() -> DatasetManifest {
        let mut records = Vec::new();
        for i in 0..10 {
            records.push(bonafide(
                &format!("b{i}.png"),
                &format!("s{i}"),
                Source::Digital,
            ));
        }
        DatasetManifest::new(records, "fixture").unwrap()
    }

    #[test]
    fn split_respects_ratio_and_disjointness() {
        let manifest = ten_subject_manifest();
        let (train, eval) = split_subject_disjoint(&manifest, 0.7, 1).unwrap();
        assert_eq!(train.records.len(), 7);
        assert_eq!(eval.records.len(), 3);
        let ts: HashSet<String> = train.subjects().into_iter().collect();
        let es: HashSet<String> = eval.subjects().into_iter().collect();
        assert!(ts.is_disjoint(&es));
    }

    #[test]
    fn split_is_seed_deterministic() {
        let manifest = ten_subject_manifest();
        let (a, _) = split_subject_disjoint(&manifest, 0.7, 5).unwrap();
        let (b, _) = split_subject_disjoint(&manifest, 0.7, 5).unwrap();
        let (c, _) = split_subject_disjoint(&manifest, 0.7, 6).unwrap();
        assert_eq!(a.records, b.records);
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn split_needs_two_subjects() {
        let manifest = DatasetManifest::new(
            vec![bonafide("a.png", "only", Source::Digital)],
            "fixture",
        )
        .unwrap();
        assert!(matches!(
            split_subject_disjoint(&manifest, 0.7, 0),
            Err(Error::InsufficientSubjects { .. })
        ));
    }

    #[test]
    fn straddling_morphs_are_dropped() {
        let mut records = ten_subject_manifest().records;
        for i in 0..9 {
            records.push(morph(
                &format!("m{i}.png"),
                &format!("s{i}+s{}", i + 1),
                MorphTool::Opencv,
                Source::Digital,
            ));
        }
        let manifest = DatasetManifest::new(records, "fixture").unwrap();
        let (train, eval) = split_subject_disjoint(&manifest, 0.7, 3).unwrap();
        for r in train.records.iter().chain(&eval.records) {
            if r.label == Label::Morph {
                let side_counts: Vec<bool> = r
                    .subjects()
                    .iter()
                    .map(|s| train.subjects().contains(&s.to_string()))
                    .collect();
                assert!(side_counts.iter().all(|&b| b) || side_counts.iter().all(|&b| !b));
            }
        }
    }

    fn loo_manifest() -> DatasetManifest {
        let mut records = Vec::new();
        for i in 0..12 {
            records.push(bonafide(
                &format!("b{i}.png"),
                &format!("s{i:02}"),
                Source::PsHandcrafted,
            ));
        }
        let tools = [
            MorphTool::FaceFusion,
            MorphTool::FaceMorpher,
            MorphTool::Opencv,
            MorphTool::Ubo,
        ];
        let mut idx = 0;
        for tool in &tools {
            for _ in 0..8 {
                let a = idx % 12;
                let b = (idx + 5) % 12;
                records.push(morph(
                    &format!("m{idx}.png"),
                    &format!("s{a:02}+s{b:02}"),
                    tool.clone(),
                    Source::PsHandcrafted,
                ));
                idx += 1;
            }
        }
        DatasetManifest::new(records, "fixture").unwrap()
    }

    #[test]
    fn four_tools_make_four_folds() {
        let manifest = loo_manifest();
        let folds = loo_folds(&manifest, 0.7, 2).unwrap();
        assert_eq!(folds.len(), 4);
        for fold in &folds {
            for r in &fold.train.records {
                assert!(
                    r.label == Label::Bonafide || r.morph_tool != fold.held_out_tool,
                    "held-out tool in training"
                );
            }
            for r in &fold.test.records {
                assert!(r.label == Label::Bonafide || r.morph_tool == fold.held_out_tool);
            }
        }
    }

    #[test]
    fn one_tool_is_insufficient() {
        let mut records = ten_subject_manifest().records;
        records.push(morph(
            "m.png",
            "s0+s1",
            MorphTool::Opencv,
            Source::Digital,
        ));
        let manifest = DatasetManifest::new(records, "fixture").unwrap();
        assert!(matches!(
            loo_folds(&manifest, 0.7, 0),
            Err(Error::InsufficientTools { got: 1 })
        ));
    }

    #[test]
    fn blend_hand_cases() {
        let a = ImageBuffer::filled_rgb(3, 2, [10, 20, 31]).unwrap();
        let b = ImageBuffer::filled_rgb(3, 2, [20, 21, 40]).unwrap();
        let m = blend_images(&a, &b, 0.5).unwrap();
        // floor((a + b) / 2) per channel.
        assert_eq!([m.get(0, 0, 0), m.get(0, 0, 1), m.get(0, 0, 2)], [15, 20, 35]);
        // Self-blend is the identity.
        assert_eq!(blend_images(&a, &a, 0.5).unwrap(), a);

        let c = ImageBuffer::filled_rgb(2, 2, [0, 0, 0]).unwrap();
        assert!(matches!(
            blend_images(&a, &c, 0.5),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn config_parses_with_defaults_and_validates_methods() {
        let json = r#"{
            "name": "exp1",
            "training_sources": ["ps_handcrafted"],
            "features": ["dct2", "intensity"]
        }"#;
        let config: ExperimentConfig = serde_json::from_str(json).unwrap();
        config.validate().unwrap();
        assert_eq!(config.split_ratio, 0.7);
        assert_eq!(config.test_sources, vec![Source::PsHandcrafted]);
        assert_eq!(config.feature_params.d, 64);

        let bad = r#"{
            "name": "exp1",
            "training_sources": ["ps_handcrafted"],
            "features": ["nope"]
        }"#;
        let config: ExperimentConfig = serde_json::from_str(bad).unwrap();
        match config.validate() {
            Err(Error::Domain(msg)) => assert!(msg.contains("valid methods")),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn missing_source_is_named_in_the_error() {
        let manifest = loo_manifest();
        let config = ExperimentConfig {
            name: "exp2".into(),
            training_sources: vec![Source::PsHandcrafted, Source::PsSynthetic],
            test_sources: vec![Source::PsHandcrafted],
            features: vec!["intensity".into()],
            feature_params: ExtractorParams::default(),
            classifier: ClassifierConfig::default(),
            split_seed: 0,
            split_ratio: 0.7,
        };
        let dir = tempfile::tempdir().unwrap();
        match run_experiment(&config, &manifest, dir.path(), dir.path()) {
            Err(Error::Consistency(msg)) => assert!(msg.contains("ps_synthetic"), "{msg}"),
            other => panic!("expected consistency error, got {other:?}"),
        }
    }

    #[test]
    fn derive_seed_is_stable_and_tag_sensitive() {
        assert_eq!(derive_seed(1, "a/b.png"), derive_seed(1, "a/b.png"));
        assert_ne!(derive_seed(1, "a/b.png"), derive_seed(2, "a/b.png"));
        assert_ne!(derive_seed(1, "a/b.png"), derive_seed(1, "a/c.png"));
    }
}
