//! Handcrafted feature extractors mapping an aligned face image to a
//! fixed-length vector: intensity, uniform LBP variants, BSIF, HOG, SRM
//! residuals, ELA, DFT, DCT2 and SVD, plus feature-level fusion.
//!
//! Every extractor follows the same pipeline order: filter at native
//! resolution first, resize the feature image afterwards. Vector lengths
//! depend only on the method and its parameters, never on the input size.

pub mod bsif;
pub mod filters;
pub mod freq;
pub mod hog;
pub mod lbp;
pub mod srm;

pub use bsif::BsifBank;
pub use filters::Kernel;
pub use srm::SrmKernels;

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::imgcore::{
    jpeg_quantize_roundtrip, resize_bilinear, to_grayscale, FloatPlane, ImageBuffer,
};

/// A fixed-length real vector tagged with the extractor that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    /// Extractor id, e.g. `dct2` or `fuse(ulbp_all+ulbp_hor)`.
    pub method: String,
    /// Parameter fingerprint, e.g. `d=64`.
    pub params: String,
    pub values: Vec<f64>,
}

impl fmt::Display for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{{{}}}", self.method, self.params)
    }
}

/// The twelve feature families of the reported experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    Intensity,
    Ela,
    Srm,
    Dct2,
    Dft,
    Lbp81,
    FusionLbp,
    Hog,
    Svd,
    Hlbp,
    BsifIm,
    BsifHist,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 12] = [
        FeatureKind::Intensity,
        FeatureKind::Ela,
        FeatureKind::Srm,
        FeatureKind::Dct2,
        FeatureKind::Dft,
        FeatureKind::Lbp81,
        FeatureKind::FusionLbp,
        FeatureKind::Hog,
        FeatureKind::Svd,
        FeatureKind::Hlbp,
        FeatureKind::BsifIm,
        FeatureKind::BsifHist,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureKind::Intensity => "intensity",
            FeatureKind::Ela => "ela",
            FeatureKind::Srm => "srm",
            FeatureKind::Dct2 => "dct2",
            FeatureKind::Dft => "dft",
            FeatureKind::Lbp81 => "lbp81",
            FeatureKind::FusionLbp => "fusion_lbp",
            FeatureKind::Hog => "hog",
            FeatureKind::Svd => "svd",
            FeatureKind::Hlbp => "hlbp",
            FeatureKind::BsifIm => "bsif_im",
            FeatureKind::BsifHist => "bsif_hist",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parameters shared by the extractors.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ExtractorParams {
    /// Side length of resized feature images.
    pub d: usize,
    /// JPEG quality for error-level analysis.
    pub ela_quality: u32,
    /// Number of leading singular values kept.
    pub svd_k: usize,
    /// HOG grid, blocks across x by blocks down y.
    pub hog_blocks: (usize, usize),
    pub hog_bins: usize,
}

impl Default for ExtractorParams {
    fn default() -> Self {
        Self {
            d: 64,
            ela_quality: 70,
            svd_k: 100,
            hog_blocks: (10, 12),
            hog_bins: 9,
        }
    }
}

/// Extractor context: parameters plus the filter banks.
pub struct FeatureExtractor {
    pub params: ExtractorParams,
    pub srm_kernels: SrmKernels,
    pub bsif_bank: BsifBank,
}

impl FeatureExtractor {
    pub fn new(params: ExtractorParams) -> Self {
        Self {
            params,
            srm_kernels: SrmKernels::default(),
            bsif_bank: BsifBank::default_bank(),
        }
    }

    /// Output length contract per kind.
    pub fn expected_len(&self, kind: FeatureKind) -> usize {
        let d2 = self.params.d * self.params.d;
        match kind {
            FeatureKind::Intensity
            | FeatureKind::Ela
            | FeatureKind::Dct2
            | FeatureKind::Dft
            | FeatureKind::Lbp81
            | FeatureKind::BsifIm => d2,
            FeatureKind::Srm => 3 * d2,
            FeatureKind::FusionLbp => 2 * 8 * lbp::ULBP_BINS,
            FeatureKind::Hog => self.params.hog_blocks.0 * self.params.hog_blocks.1 * self.params.hog_bins,
            FeatureKind::Svd => self.params.svd_k,
            FeatureKind::Hlbp => lbp::ULBP_BINS,
            FeatureKind::BsifHist => bsif::BSIF_CODES,
        }
    }

    fn fingerprint(&self, kind: FeatureKind) -> String {
        let d = self.params.d;
        match kind {
            FeatureKind::Intensity | FeatureKind::Dct2 | FeatureKind::Dft | FeatureKind::Lbp81 => {
                format!("d={d}")
            }
            FeatureKind::Ela => format!("d={d},q={}", self.params.ela_quality),
            FeatureKind::Srm => format!("d={d},kernels=3"),
            FeatureKind::FusionLbp => "r=1..8+hor8".to_string(),
            FeatureKind::Hog => format!(
                "blocks={}x{},bins={}",
                self.params.hog_blocks.0, self.params.hog_blocks.1, self.params.hog_bins
            ),
            FeatureKind::Svd => format!("k={}", self.params.svd_k),
            FeatureKind::Hlbp => "r=1".to_string(),
            FeatureKind::BsifIm => format!("d={d},bits=9"),
            FeatureKind::BsifHist => "bits=9".to_string(),
        }
    }

    /// Runs one extractor; the output length always matches
    /// [`Self::expected_len`].
    pub fn extract(&self, kind: FeatureKind, img: &ImageBuffer) -> Result<FeatureVector> {
        let gray = to_grayscale(img);
        let d = self.params.d;
        let values = match kind {
            FeatureKind::Intensity => resize_bilinear(&gray, d, d)?.data().to_vec(),
            FeatureKind::Ela => ela(&gray, self.params.ela_quality, d)?,
            FeatureKind::Srm => srm::srm(&gray, &self.srm_kernels, d)?,
            FeatureKind::Dct2 => freq::dct2_feature(&gray, d)?,
            FeatureKind::Dft => freq::dft_feature(&gray, d)?,
            FeatureKind::Lbp81 => {
                let codes = lbp::lbp_code_image(&gray, 1)?;
                let normalized = FloatPlane::new(
                    codes.width(),
                    codes.height(),
                    codes.data().iter().map(|&c| c / 255.0).collect(),
                )?;
                resize_bilinear(&normalized, d, d)?.data().to_vec()
            }
            FeatureKind::FusionLbp => {
                let mut v = lbp::ulbp_all(&gray)?;
                v.extend(lbp::ulbp_horizontal(&gray)?);
                v
            }
            FeatureKind::Hog => hog::hog(&gray, self.params.hog_blocks, self.params.hog_bins)?,
            FeatureKind::Svd => svd_values(&gray, self.params.svd_k)?,
            FeatureKind::Hlbp => lbp::ulbp_hist(&gray, 1)?,
            FeatureKind::BsifIm => {
                let codes = bsif::bsif_code_image(&gray, &self.bsif_bank);
                let normalized = FloatPlane::new(
                    codes.width(),
                    codes.height(),
                    codes
                        .data()
                        .iter()
                        .map(|&c| c / (bsif::BSIF_CODES - 1) as f64)
                        .collect(),
                )?;
                resize_bilinear(&normalized, d, d)?.data().to_vec()
            }
            FeatureKind::BsifHist => bsif::bsif_histogram(&gray, &self.bsif_bank),
        };
        debug_assert_eq!(values.len(), self.expected_len(kind));
        Ok(FeatureVector {
            method: kind.as_str().to_string(),
            params: self.fingerprint(kind),
            values,
        })
    }
}

/// Error-level analysis: absolute difference between the grayscale plane
/// and its JPEG quantization round trip, normalized to [0, 1].
fn ela(gray: &FloatPlane, quality: u32, d: usize) -> Result<Vec<f64>> {
    let scaled = FloatPlane::new(
        gray.width(),
        gray.height(),
        gray.data().iter().map(|&v| v * 255.0).collect(),
    )?;
    let recompressed = jpeg_quantize_roundtrip(&scaled, quality)?;
    let diff = FloatPlane::new(
        gray.width(),
        gray.height(),
        scaled
            .data()
            .iter()
            .zip(recompressed.data())
            .map(|(a, b)| (a - b).abs() / 255.0)
            .collect(),
    )?;
    Ok(resize_bilinear(&diff, d, d)?.data().to_vec())
}

/// Singular values, descending, normalized by the largest, truncated or
/// zero-padded to `k`.
fn svd_values(gray: &FloatPlane, k: usize) -> Result<Vec<f64>> {
    let m = nalgebra::DMatrix::from_fn(gray.height(), gray.width(), |r, c| gray.get(c, r));
    let svd = m
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::Convergence("SVD did not converge".into()))?;
    let mut sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    sigma.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let top = sigma.first().copied().unwrap_or(0.0);
    if top > 0.0 {
        for v in sigma.iter_mut() {
            *v /= top;
        }
    }
    sigma.resize(k, 0.0);
    Ok(sigma)
}

/// Concatenates feature vectors in order; the method id records the
/// composition.
pub fn fuse(features: &[FeatureVector]) -> Result<FeatureVector> {
    if features.is_empty() {
        return Err(Error::Dimension("cannot fuse an empty list".into()));
    }
    if features.len() == 1 {
        return Ok(features[0].clone());
    }
    let method = format!(
        "fuse({})",
        features
            .iter()
            .map(|f| f.method.as_str())
            .collect::<Vec<_>>()
            .join("+")
    );
    let params = features
        .iter()
        .map(|f| f.params.as_str())
        .collect::<Vec<_>>()
        .join("+");
    let values = features.iter().flat_map(|f| f.values.iter().copied()).collect();
    Ok(FeatureVector {
        method,
        params,
        values,
    })
}

#[derive(serde::Serialize, serde::Deserialize)]
struct DumpHeader {
    method: String,
    params: String,
    length: usize,
    count: usize,
}

/// Writes a homogeneous batch of feature vectors as one JSON header line
/// followed by packed little-endian f32 records.
pub fn save_features(features: &[FeatureVector], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let first = features
        .first()
        .ok_or_else(|| Error::Format("cannot save an empty feature batch".into()))?;
    let length = first.values.len();
    if features
        .iter()
        .any(|f| f.values.len() != length || f.method != first.method || f.params != first.params)
    {
        return Err(Error::Format(
            "feature batch mixes methods, params, or lengths".into(),
        ));
    }
    let header = serde_json::to_string(&DumpHeader {
        method: first.method.clone(),
        params: first.params.clone(),
        length,
        count: features.len(),
    })
    .expect("header serializes");
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(header.as_bytes())
        .and_then(|_| file.write_all(b"\n"))
        .map_err(|e| Error::io(path, e))?;
    let mut buf = Vec::with_capacity(features.len() * length * 4);
    for f in features {
        for &v in &f.values {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Reads a batch written by [`save_features`].
pub fn load_features(path: impl AsRef<Path>) -> Result<Vec<FeatureVector>> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("missing header line".into()))?;
    let header: DumpHeader = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| Error::Format(format!("bad header: {e}")))?;
    if header.length == 0 {
        return Err(Error::Format("header length must be positive".into()));
    }
    let payload = &bytes[newline + 1..];
    if payload.len() != header.count * header.length * 4 {
        return Err(Error::Format(format!(
            "payload of {} bytes does not match count {} x length {}",
            payload.len(),
            header.count,
            header.length
        )));
    }
    let mut out = Vec::with_capacity(header.count);
    let mut chunks = payload.chunks_exact(4);
    for _ in 0..header.count {
        let values = (0..header.length)
            .map(|_| {
                let b = chunks.next().expect("length checked");
                f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64
            })
            .collect();
        out.push(FeatureVector {
            method: header.method.clone(),
            params: header.params.clone(),
            values,
        });
    }
    Ok(out)
}
