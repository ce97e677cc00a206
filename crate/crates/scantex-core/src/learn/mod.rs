//! Feature standardization and an RBF-kernel SVM trained from scratch by
//! sequential minimal optimization. Scores are oriented so that higher
//! means more morph-like.

mod smo;

pub use smo::rbf_kernel;

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MODEL_FORMAT_VERSION: &str = "1";

/// Per-dimension mean and standard deviation learned on training data.
/// Degenerate dimensions are clamped so they transform to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Floor applied to per-dimension standard deviations.
pub const STD_FLOOR: f64 = 1e-8;

/// Learns population mean and standard deviation per dimension.
pub fn fit_standardizer(x: &[Vec<f64>]) -> Result<Standardizer> {
    let n = x.len();
    if n == 0 {
        return Err(Error::Dimension("empty training matrix".into()));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|row| row.len() != d) {
        return Err(Error::Dimension("inconsistent feature dimensions".into()));
    }
    let mut means = vec![0.0f64; d];
    for row in x {
        for (m, &v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in means.iter_mut() {
        *m /= n as f64;
    }
    let mut vars = vec![0.0f64; d];
    for row in x {
        for ((v, &m), &val) in vars.iter_mut().zip(&means).zip(row) {
            *v += (val - m) * (val - m);
        }
    }
    let stds = vars
        .iter()
        .map(|v| (v / n as f64).sqrt().max(STD_FLOOR))
        .collect();
    Ok(Standardizer { means, stds })
}

impl Standardizer {
    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "row dimension {} does not match standardizer {}",
                row.len(),
                self.dim()
            )));
        }
        Ok(row
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect())
    }

    pub fn transform(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        x.iter().map(|row| self.transform_row(row)).collect()
    }
}

/// The common scale heuristic: `1 / (d * var)` with the variance pooled
/// over every entry of the (standardized) training matrix.
pub fn gamma_scale(x: &[Vec<f64>]) -> f64 {
    let d = x.first().map_or(1, |r| r.len()).max(1);
    let count = (x.len() * d).max(1);
    let mean: f64 = x.iter().flatten().sum::<f64>() / count as f64;
    let var: f64 = x
        .iter()
        .flatten()
        .map(|&v| (v - mean) * (v - mean))
        .sum::<f64>()
        / count as f64;
    1.0 / (d as f64 * var.max(1e-12))
}

/// Provenance of a trained model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelFingerprint {
    pub feature_method: String,
    pub feature_params: String,
    pub manifest_hash: String,
}

/// Trained RBF-SVM: support vectors, dual coefficients `alpha_i * y_i`,
/// bias, and kernel width.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub fingerprint: ModelFingerprint,
}

/// Training controls; `gamma: None` applies [`gamma_scale`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub c: f64,
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: None,
            tol: 1e-3,
            max_passes: 200_000,
        }
    }
}

/// Trains on standardized features; `y` must hold both classes, encoded
/// -1 (bona fide) and +1 (morph).
pub fn svm_train(
    x: &[Vec<f64>],
    y: &[f64],
    params: &TrainParams,
    fingerprint: ModelFingerprint,
) -> Result<SvmModel> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} rows vs {} labels",
            x.len(),
            y.len()
        )));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|row| row.len() != d) {
        return Err(Error::Dimension("inconsistent feature dimensions".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training features".into()));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::Domain("labels must be -1 or +1".into()));
    }
    let has_pos = y.iter().any(|&v| v > 0.0);
    let has_neg = y.iter().any(|&v| v < 0.0);
    if !has_pos || !has_neg {
        return Err(Error::SingleClass);
    }
    if params.c <= 0.0 {
        return Err(Error::Domain(format!("C must be positive, got {}", params.c)));
    }
    let gamma = match params.gamma {
        Some(g) if g > 0.0 => g,
        Some(g) => return Err(Error::Domain(format!("gamma must be positive, got {g}"))),
        None => gamma_scale(x),
    };

    let solution = smo::solve(x, y, params.c, gamma, params.tol, params.max_passes)?;

    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for ((row, &alpha), &label) in x.iter().zip(&solution.alpha).zip(y) {
        if alpha > 0.0 {
            support_vectors.push(row.clone());
            dual_coefs.push(alpha * label);
        }
    }
    Ok(SvmModel {
        support_vectors,
        dual_coefs,
        bias: solution.bias,
        gamma,
        c: params.c,
        fingerprint,
    })
}

/// Decision value `sum coef_i exp(-gamma ||x - s_i||^2) + b`; higher means
/// more morph-like.
pub fn svm_score(model: &SvmModel, x: &[f64]) -> Result<f64> {
    if let Some(sv) = model.support_vectors.first() {
        if sv.len() != x.len() {
            return Err(Error::Dimension(format!(
                "probe dimension {} does not match model {}",
                x.len(),
                sv.len()
            )));
        }
    }
    let mut score = model.bias;
    for (sv, &coef) in model.support_vectors.iter().zip(&model.dual_coefs) {
        score += coef * rbf_kernel(x, sv, model.gamma);
    }
    Ok(score)
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    version: String,
    n_support: usize,
    dim: usize,
    fingerprint: ModelFingerprint,
}

fn bin_path(json_path: &Path) -> PathBuf {
    json_path.with_extension("bin")
}

/// Writes `<stem>.svmjson` (metadata) and `<stem>.bin` (all floats as
/// little-endian f64, so reloaded scores are bit-exact).
pub fn save_model(model: &SvmModel, json_path: impl AsRef<Path>) -> Result<()> {
    let json_path = json_path.as_ref();
    let dim = model.support_vectors.first().map_or(0, |v| v.len());
    let header = ModelHeader {
        version: MODEL_FORMAT_VERSION.to_string(),
        n_support: model.support_vectors.len(),
        dim,
        fingerprint: model.fingerprint.clone(),
    };
    let json = serde_json::to_string_pretty(&header).expect("header serializes");
    std::fs::write(json_path, json).map_err(|e| Error::io(json_path, e))?;

    let bin = bin_path(json_path);
    let mut buf = Vec::new();
    for v in [model.gamma, model.bias, model.c] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for &coef in &model.dual_coefs {
        buf.extend_from_slice(&coef.to_le_bytes());
    }
    for sv in &model.support_vectors {
        for &v in sv {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(&bin).map_err(|e| Error::io(&bin, e))?;
    file.write_all(&buf).map_err(|e| Error::io(&bin, e))
}

/// Reloads a model written by [`save_model`].
pub fn load_model(json_path: impl AsRef<Path>) -> Result<SvmModel> {
    let json_path = json_path.as_ref();
    let text = std::fs::read_to_string(json_path).map_err(|e| Error::io(json_path, e))?;
    let header: ModelHeader = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("bad model header: {e}")))?;
    if header.version != MODEL_FORMAT_VERSION {
        return Err(Error::Version {
            expected: MODEL_FORMAT_VERSION.to_string(),
            got: header.version,
        });
    }

    let bin = bin_path(json_path);
    let mut bytes = Vec::new();
    std::fs::File::open(&bin)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(&bin, e))?;
    let expected = (3 + header.n_support + header.n_support * header.dim) * 8;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "model payload {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let mut chunks = bytes.chunks_exact(8);
    let mut next = || {
        let b = chunks.next().expect("length checked");
        f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]])
    };
    let gamma = next();
    let bias = next();
    let c = next();
    let dual_coefs: Vec<f64> = (0..header.n_support).map(|_| next()).collect();
    let support_vectors: Vec<Vec<f64>> = (0..header.n_support)
        .map(|_| (0..header.dim).map(|_| next()).collect())
        .collect();
    Ok(SvmModel {
        support_vectors,
        dual_coefs,
        bias,
        gamma,
        c,
        fingerprint: header.fingerprint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable_fixture() -> (Vec<Vec<f64>>, Vec<f64>) {
        let x = vec![vec![0.0], vec![0.2], vec![1.0], vec![1.2]];
        let y = vec![-1.0, -1.0, 1.0, 1.0];
        (x, y)
    }

    #[test]
    fn standardizer_hand_cases() {
        let std = fit_standardizer(&[vec![0.0], vec![2.0]]).unwrap();
        let t = std.transform(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(t, vec![vec![-1.0], vec![1.0]]);

        // Constant column transforms to all zeros through the floor.
        let std = fit_standardizer(&[vec![5.0, 1.0], vec![5.0, 3.0]]).unwrap();
        let t = std.transform(&[vec![5.0, 1.0], vec![5.0, 3.0]]).unwrap();
        assert_eq!(t[0][0], 0.0);
        assert_eq!(t[1][0], 0.0);
    }

    #[test]
    fn transformed_training_set_has_zero_mean_unit_std() {
        let x: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![i as f64 * 0.7 + 3.0, (i as f64 * 0.3).sin() * 5.0])
            .collect();
        let std = fit_standardizer(&x).unwrap();
        let t = std.transform(&x).unwrap();
        for dim in 0..2 {
            let mean: f64 = t.iter().map(|r| r[dim]).sum::<f64>() / t.len() as f64;
            let var: f64 = t.iter().map(|r| r[dim] * r[dim]).sum::<f64>() / t.len() as f64;
            assert!(mean.abs() < 1e-9, "mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 1e-6, "std {}", var.sqrt());
        }
    }

    #[test]
    fn separable_training_classifies_itself() {
        let (x, y) = separable_fixture();
        let model = svm_train(
            &x,
            &y,
            &TrainParams {
                c: 10.0,
                gamma: Some(1.0),
                ..TrainParams::default()
            },
            ModelFingerprint::default(),
        )
        .unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let score = svm_score(&model, xi).unwrap();
            assert!(score * yi > 0.0, "x {xi:?} score {score}");
        }
        // Model invariants.
        let sum: f64 = model.dual_coefs.iter().sum();
        assert!(sum.abs() < 1e-6);
        for &coef in &model.dual_coefs {
            assert!(coef.abs() <= 10.0 + 1e-9);
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![1.0, 1.0];
        assert!(matches!(
            svm_train(&x, &y, &TrainParams::default(), ModelFingerprint::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let x: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i as f64 * 0.73).sin(), (i as f64 * 0.31).cos()])
            .collect();
        let y: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let params = TrainParams {
            c: 3.0,
            gamma: Some(0.5),
            ..TrainParams::default()
        };
        let a = svm_train(&x, &y, &params, ModelFingerprint::default()).unwrap();
        let b = svm_train(&x, &y, &params, ModelFingerprint::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gamma_limit_and_degenerate_scores() {
        // Tiny gamma: every kernel value is ~1, so the score collapses to
        // sum(coefs) + b = b by the equality constraint.
        let model = SvmModel {
            support_vectors: vec![vec![0.0, 0.0], vec![3.0, 4.0]],
            dual_coefs: vec![0.7, -0.7],
            bias: 0.25,
            gamma: 1e-15,
            c: 1.0,
            fingerprint: ModelFingerprint::default(),
        };
        let score = svm_score(&model, &[1.0, 2.0]).unwrap();
        assert!((score - 0.25).abs() < 1e-6);

        let empty = SvmModel {
            support_vectors: vec![],
            dual_coefs: vec![],
            bias: -0.5,
            gamma: 1.0,
            c: 1.0,
            fingerprint: ModelFingerprint::default(),
        };
        assert_eq!(svm_score(&empty, &[1.0, 2.0]).unwrap(), -0.5);
    }

    #[test]
    fn scores_invariant_under_constant_extra_dimension() {
        let (x, y) = separable_fixture();
        let x_extra: Vec<Vec<f64>> = x
            .iter()
            .map(|r| {
                let mut v = r.clone();
                v.push(42.0);
                v
            })
            .collect();
        let params = TrainParams {
            c: 5.0,
            gamma: Some(0.8),
            ..TrainParams::default()
        };

        let std_a = fit_standardizer(&x).unwrap();
        let ta = std_a.transform(&x).unwrap();
        let model_a = svm_train(&ta, &y, &params, ModelFingerprint::default()).unwrap();

        let std_b = fit_standardizer(&x_extra).unwrap();
        let tb = std_b.transform(&x_extra).unwrap();
        let model_b = svm_train(&tb, &y, &params, ModelFingerprint::default()).unwrap();

        for (ra, rb) in ta.iter().zip(&tb) {
            let sa = svm_score(&model_a, ra).unwrap();
            let sb = svm_score(&model_b, rb).unwrap();
            assert_eq!(sa, sb);
        }
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        use rand::{Rng, SeedableRng};
        let (x, y) = separable_fixture();
        let model = svm_train(
            &x,
            &y,
            &TrainParams {
                c: 10.0,
                gamma: Some(1.3),
                ..TrainParams::default()
            },
            ModelFingerprint {
                feature_method: "dct2".into(),
                feature_params: "d=64".into(),
                manifest_hash: "abc123".into(),
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.svmjson");
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back.fingerprint.feature_method, "dct2");

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let probe = vec![rng.random_range(-3.0..3.0)];
            let a = svm_score(&model, &probe).unwrap();
            let b = svm_score(&back, &probe).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn model_file_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.svmjson");
        let (x, y) = separable_fixture();
        let model = svm_train(
            &x,
            &y,
            &TrainParams {
                c: 1.0,
                gamma: Some(1.0),
                ..TrainParams::default()
            },
            ModelFingerprint::default(),
        )
        .unwrap();
        save_model(&model, &path).unwrap();

        // Truncated binary payload.
        let bin = path.with_extension("bin");
        let bytes = std::fs::read(&bin).unwrap();
        std::fs::write(&bin, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format(_))));

        // Version mismatch.
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replace("\"version\": \"1\"", "\"version\": \"99\"")).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Version { .. })));
    }
}
