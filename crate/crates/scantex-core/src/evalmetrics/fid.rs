//! Fréchet distance between Gaussian fits of embedded image sets.
//!
//! The embedding is pluggable: the built-in one is a deterministic 8x8
//! grayscale downsample, and externally computed vectors can be loaded
//! from a packed-float container instead.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::imgcore::{resize_bilinear, to_grayscale, ImageBuffer};

/// Shrinkage added to covariance diagonals: `lambda = SHRINKAGE_FACTOR *
/// trace(S) / d`, keeping desk-scale sets nonsingular.
pub const SHRINKAGE_FACTOR: f64 = 1e-6;

/// Mean vector and covariance matrix summary of an embedded set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub n: usize,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean and unbiased covariance of a vector set, with optional
/// diagonal shrinkage (on by default in [`gaussian_stats`]).
pub fn gaussian_stats_with(vectors: &[Vec<f64>], shrinkage: bool) -> Result<GaussianStats> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::Dimension(format!(
            "need at least 2 vectors for covariance, got {n}"
        )));
    }
    let d = vectors[0].len();
    if d == 0 || vectors.iter().any(|v| v.len() != d) {
        return Err(Error::Dimension("inconsistent vector dimensions".into()));
    }
    if vectors.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("embedding vectors".into()));
    }

    let mut mean = DVector::zeros(d);
    for v in vectors {
        for (i, &x) in v.iter().enumerate() {
            mean[i] += x;
        }
    }
    mean /= n as f64;

    let mut cov = DMatrix::zeros(d, d);
    for v in vectors {
        let centered = DVector::from_iterator(d, v.iter().enumerate().map(|(i, &x)| x - mean[i]));
        cov += &centered * centered.transpose();
    }
    cov /= (n - 1) as f64;

    if shrinkage {
        let lambda = SHRINKAGE_FACTOR * cov.trace() / d as f64;
        for i in 0..d {
            cov[(i, i)] += lambda;
        }
    }

    Ok(GaussianStats {
        mean,
        covariance: cov,
        n,
    })
}

/// [`gaussian_stats_with`] with shrinkage enabled.
pub fn gaussian_stats(vectors: &[Vec<f64>]) -> Result<GaussianStats> {
    gaussian_stats_with(vectors, true)
}

/// Principal square root of a symmetric PSD matrix; negative eigenvalues
/// from rounding are clamped to zero.
fn sqrtm_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) / 2.0;
    let eig = sym.symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let q = eig.eigenvectors;
    Ok(&q * DMatrix::from_diagonal(&vals) * q.transpose())
}

/// Fréchet distance between two Gaussians:
/// `||mu_a - mu_b||^2 + tr(Sa + Sb - 2 (Sa Sb)^(1/2))`, clamped to be
/// non-negative.
pub fn fid(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "dimension mismatch {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let mean_term = (&a.mean - &b.mean).norm_squared();

    // (Sa Sb)^(1/2) computed through S = Sa^(1/2): sqrtm(S Sb S) shares its
    // trace and keeps everything symmetric.
    let s = sqrtm_psd(&a.covariance)?;
    let inner = &s * &b.covariance * &s;
    let cross = sqrtm_psd(&inner)?;
    let trace_term = a.covariance.trace() + b.covariance.trace() - 2.0 * cross.trace();

    let value = mean_term + trace_term;
    if !value.is_finite() {
        return Err(Error::NonFinite("fid".into()));
    }
    Ok(value.max(0.0))
}

/// An image-to-vector embedding usable for FID.
pub trait Embedder: Sync {
    fn dim(&self) -> usize;
    fn embed(&self, img: &ImageBuffer) -> Vec<f64>;
}

/// Deterministic built-in embedding: grayscale, 8x8 bilinear downsample,
/// row-major 64-vector in [0, 1].
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinEmbedder;

impl Embedder for BuiltinEmbedder {
    fn dim(&self) -> usize {
        64
    }

    fn embed(&self, img: &ImageBuffer) -> Vec<f64> {
        embed_builtin(img)
    }
}

/// See [`BuiltinEmbedder`].
pub fn embed_builtin(img: &ImageBuffer) -> Vec<f64> {
    let gray = to_grayscale(img);
    let small = resize_bilinear(&gray, 8, 8).expect("8x8 is a valid target");
    small.data().to_vec()
}

/// Container layout: one JSON header line `{"dim": d, "count": n}`
/// terminated by '\n', then `n * d` little-endian f32 values.
#[derive(serde::Serialize, serde::Deserialize)]
struct EmbeddingHeader {
    dim: usize,
    count: usize,
}

/// Writes vectors to the packed-float container.
pub fn save_embeddings(vectors: &[Vec<f64>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dim = vectors.first().map_or(0, |v| v.len());
    if dim == 0 {
        return Err(Error::Format("cannot save empty embeddings".into()));
    }
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::Dimension("inconsistent vector dimensions".into()));
    }
    let header = serde_json::to_string(&EmbeddingHeader {
        dim,
        count: vectors.len(),
    })
    .expect("header serializes");
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(header.as_bytes())
        .and_then(|_| file.write_all(b"\n"))
        .map_err(|e| Error::io(path, e))?;
    let mut buf = Vec::with_capacity(vectors.len() * dim * 4);
    for v in vectors {
        for &x in v {
            buf.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Reads vectors from the packed-float container, validating the header
/// against the payload length.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("missing header line".into()))?;
    let header: EmbeddingHeader = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| Error::Format(format!("bad header: {e}")))?;
    if header.dim == 0 {
        return Err(Error::Format("header dim must be positive".into()));
    }
    let payload = &bytes[newline + 1..];
    let expected = header.count * header.dim * 4;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload of {} bytes does not match count {} x dim {}",
            payload.len(),
            header.count,
            header.dim
        )));
    }
    let mut vectors = Vec::with_capacity(header.count);
    let mut chunk = payload.chunks_exact(4);
    for _ in 0..header.count {
        let mut v = Vec::with_capacity(header.dim);
        for _ in 0..header.dim {
            let b = chunk.next().expect("length checked above");
            v.push(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64);
        }
        vectors.push(v);
    }
    Ok(vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats_1d(mean: f64, var: f64) -> GaussianStats {
        GaussianStats {
            mean: DVector::from_vec(vec![mean]),
            covariance: DMatrix::from_vec(1, 1, vec![var]),
            n: 100,
        }
    }

    #[test]
    fn gaussian_stats_two_point_hand_case() {
        let stats = gaussian_stats_with(&[vec![0.0], vec![2.0]], false).unwrap();
        assert_eq!(stats.mean[0], 1.0);
        assert_eq!(stats.covariance[(0, 0)], 2.0); // unbiased
    }

    #[test]
    fn identical_vectors_shrink_to_nonzero_diagonal() {
        let stats = gaussian_stats(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert!(stats.covariance[(0, 0)] >= 0.0);
        // Off-diagonals stay zero; shrinkage of a zero matrix is zero.
        assert_eq!(stats.covariance[(0, 1)], 0.0);
    }

    #[test]
    fn single_vector_is_dimension_error() {
        assert!(matches!(
            gaussian_stats(&[vec![1.0]]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn fid_identity_and_closed_forms() {
        let a = stats_1d(0.0, 1.0);
        assert!(fid(&a, &a).unwrap().abs() < 1e-9);

        let b = stats_1d(3.0, 1.0);
        assert!((fid(&a, &b).unwrap() - 9.0).abs() < 1e-9);

        let c = stats_1d(0.0, 4.0);
        assert!((fid(&a, &c).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fid_is_symmetric() {
        let a = GaussianStats {
            mean: DVector::from_vec(vec![0.1, -0.4, 2.0]),
            covariance: DMatrix::from_vec(
                3,
                3,
                vec![2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 0.8],
            ),
            n: 50,
        };
        let b = GaussianStats {
            mean: DVector::from_vec(vec![-1.0, 0.0, 1.0]),
            covariance: DMatrix::from_vec(
                3,
                3,
                vec![1.0, -0.1, 0.0, -0.1, 2.5, 0.4, 0.0, 0.4, 1.2],
            ),
            n: 50,
        };
        let ab = fid(&a, &b).unwrap();
        let ba = fid(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-6, "{ab} vs {ba}");
        assert!(ab >= 0.0);
    }

    #[test]
    fn fid_mean_shift_only_is_squared_distance() {
        for dim in [1usize, 2, 5, 16] {
            let mut cov = DMatrix::zeros(dim, dim);
            for i in 0..dim {
                for j in 0..dim {
                    cov[(i, j)] = if i == j {
                        1.0 + 0.1 * i as f64
                    } else {
                        0.05 / (1.0 + (i as f64 - j as f64).abs())
                    };
                }
            }
            let mean_a = DVector::from_iterator(dim, (0..dim).map(|i| i as f64 * 0.3));
            let shift = DVector::from_iterator(dim, (0..dim).map(|i| (i as f64 + 1.0) * 0.7));
            let a = GaussianStats {
                mean: mean_a.clone(),
                covariance: cov.clone(),
                n: 10,
            };
            let b = GaussianStats {
                mean: &mean_a + &shift,
                covariance: cov.clone(),
                n: 10,
            };
            let expected = shift.norm_squared();
            let got = fid(&a, &b).unwrap();
            assert!((got - expected).abs() < 1e-6, "dim {dim}: {got} vs {expected}");
        }
    }

    #[test]
    fn builtin_embedding_is_deterministic_and_tracks_mean() {
        let img = ImageBuffer::filled_rgb(33, 47, [100, 150, 200]).unwrap();
        let e1 = embed_builtin(&img);
        let e2 = embed_builtin(&img);
        assert_eq!(e1, e2);
        assert_eq!(e1.len(), 64);

        let black = ImageBuffer::filled_rgb(16, 16, [0, 0, 0]).unwrap();
        assert!(embed_builtin(&black).iter().all(|&v| v == 0.0));

        // Smooth image: embedding mean approximates the image mean.
        let mut data = Vec::new();
        for y in 0..32 {
            for x in 0..32 {
                let v = (128.0 + 60.0 * ((x as f64) / 32.0 - 0.5)
                    + 40.0 * ((y as f64) / 32.0 - 0.5)) as u8;
                data.extend_from_slice(&[v, v, v]);
            }
        }
        let img = ImageBuffer::new(32, 32, 3, data).unwrap();
        let gray = to_grayscale(&img);
        let img_mean: f64 = gray.data().iter().sum::<f64>() / gray.data().len() as f64;
        let emb = embed_builtin(&img);
        let emb_mean: f64 = emb.iter().sum::<f64>() / emb.len() as f64;
        assert!((img_mean - emb_mean).abs() < 0.01);
    }

    #[test]
    fn embeddings_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.bin");
        let vectors = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
        save_embeddings(&vectors, &path).unwrap();
        assert_eq!(load_embeddings(&path).unwrap(), vectors);
    }

    #[test]
    fn embeddings_header_mismatch_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"{\"dim\":2,\"count\":3}\n\x00\x00\x00\x00").unwrap();
        assert!(matches!(load_embeddings(&path), Err(Error::Format(_))));

        let zero_dim = dir.path().join("zero.bin");
        std::fs::write(&zero_dim, b"{\"dim\":0,\"count\":0}\n").unwrap();
        assert!(matches!(load_embeddings(&zero_dim), Err(Error::Format(_))));
    }
}
