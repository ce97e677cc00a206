//! Binarized statistical image features: a bank of nine 5x5 zero-mean
//! filters whose thresholded responses form a 9-bit code per pixel.
//!
//! The shipped default bank is learnt deterministically from a procedural
//! texture image (PCA whitening of 5x5 patches followed by a fixed-seed
//! orthogonal rotation) and stored as a JSON data file; any external bank
//! of the same shape can be loaded instead.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::filters::{convolve_zero_sum, Kernel};
use crate::error::{Error, Result};
use crate::imgcore::FloatPlane;
use crate::texsim::box_blur;

pub const BSIF_FILTERS: usize = 9;
pub const BSIF_SIDE: usize = 5;
pub const BSIF_CODES: usize = 1 << BSIF_FILTERS;

/// Seed behind the shipped `bsif_bank.json`.
pub const DEFAULT_BANK_SEED: u64 = 0xB51F;

/// Nine 5x5 zero-mean filters; bit k of a code comes from filter k.
#[derive(Debug, Clone, PartialEq)]
pub struct BsifBank {
    filters: Vec<Kernel>,
}

impl BsifBank {
    pub fn new(filters: Vec<Kernel>) -> Result<Self> {
        if filters.len() != BSIF_FILTERS {
            return Err(Error::Bank(format!(
                "expected {BSIF_FILTERS} filters, got {}",
                filters.len()
            )));
        }
        let mut centered = Vec::with_capacity(BSIF_FILTERS);
        for (i, filter) in filters.into_iter().enumerate() {
            if filter.width != BSIF_SIDE || filter.height != BSIF_SIDE {
                return Err(Error::Bank(format!(
                    "filter {i} is {}x{}, expected {BSIF_SIDE}x{BSIF_SIDE}",
                    filter.width, filter.height
                )));
            }
            if filter.coefficient_sum().abs() > 1e-6 {
                return Err(Error::Bank(format!(
                    "filter {i} is not zero-mean (sum {})",
                    filter.coefficient_sum()
                )));
            }
            // Re-center exactly; the convolution assumes zero-sum kernels.
            let mean = filter.coefficient_sum() / filter.data.len() as f64;
            let data = filter.data.iter().map(|v| v - mean).collect();
            centered.push(Kernel::new(BSIF_SIDE, BSIF_SIDE, data)?);
        }
        Ok(Self { filters: centered })
    }

    pub fn filters(&self) -> &[Kernel] {
        &self.filters
    }

    /// The bank shipped with the crate.
    pub fn default_bank() -> Self {
        static JSON: &str = include_str!("../../data/bsif_bank.json");
        Self::from_json(JSON).expect("embedded bank is valid")
    }

    /// Parses a bank from JSON: an array of nine 5x5 matrices.
    pub fn from_json(json: &str) -> Result<Self> {
        let rows: Vec<Vec<Vec<f64>>> = serde_json::from_str(json)
            .map_err(|e| Error::Bank(format!("bad bank JSON: {e}")))?;
        let filters = rows
            .iter()
            .map(|m| Kernel::from_rows(m).map_err(|e| Error::Bank(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(filters)
    }

    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Vec<Vec<f64>>> = self
            .filters
            .iter()
            .map(|k| {
                (0..k.height)
                    .map(|y| k.data[y * k.width..(y + 1) * k.width].to_vec())
                    .collect()
            })
            .collect();
        serde_json::to_string_pretty(&rows).expect("bank serializes")
    }

    /// Learns a bank from a procedural texture image: PCA-whitened 5x5
    /// patches rotated by a seeded orthogonal matrix. Fully deterministic
    /// for a given seed.
    pub fn generate(seed: u64) -> Self {
        let side = 192usize;
        let texture = procedural_texture(side, seed);

        // Patch matrix, one row per 5x5 patch.
        let stride = 2usize;
        let dim = BSIF_SIDE * BSIF_SIDE;
        let mut patches: Vec<f64> = Vec::new();
        let mut count = 0usize;
        let mut y = 0;
        while y + BSIF_SIDE <= side {
            let mut x = 0;
            while x + BSIF_SIDE <= side {
                for py in 0..BSIF_SIDE {
                    for px in 0..BSIF_SIDE {
                        patches.push(texture[(y + py) * side + (x + px)]);
                    }
                }
                count += 1;
                x += stride;
            }
            y += stride;
        }

        // Dimension-wise mean removal, then covariance.
        let mut means = vec![0.0f64; dim];
        for row in patches.chunks_exact(dim) {
            for (m, &v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in means.iter_mut() {
            *m /= count as f64;
        }
        let mut cov = DMatrix::<f64>::zeros(dim, dim);
        for row in patches.chunks_exact(dim) {
            for i in 0..dim {
                let ci = row[i] - means[i];
                for j in i..dim {
                    cov[(i, j)] += ci * (row[j] - means[j]);
                }
            }
        }
        for i in 0..dim {
            for j in 0..i {
                cov[(i, j)] = cov[(j, i)];
            }
        }
        cov /= count as f64;

        let eig = cov.symmetric_eigen();
        // Top eigenpairs by eigenvalue, descending.
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let mut whiten = DMatrix::<f64>::zeros(BSIF_FILTERS, dim);
        for (row, &idx) in order.iter().take(BSIF_FILTERS).enumerate() {
            let scale = 1.0 / (eig.eigenvalues[idx].max(0.0) + 1e-12).sqrt();
            for j in 0..dim {
                whiten[(row, j)] = eig.eigenvectors[(j, idx)] * scale;
            }
        }

        // Fixed-seed orthogonal rotation via QR of a Gaussian matrix.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let gaussian = DMatrix::<f64>::from_fn(BSIF_FILTERS, BSIF_FILTERS, |_, _| {
            normal.sample(&mut rng)
        });
        let rotation = gaussian.qr().q();
        let mixed = rotation * whiten;

        let filters = (0..BSIF_FILTERS)
            .map(|i| {
                let mut data: Vec<f64> = (0..dim).map(|j| mixed[(i, j)]).collect();
                let mean = data.iter().sum::<f64>() / dim as f64;
                for v in data.iter_mut() {
                    *v -= mean;
                }
                let norm = data.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                for v in data.iter_mut() {
                    *v /= norm;
                }
                Kernel::new(BSIF_SIDE, BSIF_SIDE, data).expect("generated filter is 5x5")
            })
            .collect();
        Self::new(filters).expect("generated bank satisfies its own invariants")
    }
}

/// Multiscale value noise in [0, 1], deterministic per seed.
fn procedural_texture(side: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7E37);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut acc = vec![0.0f64; side * side];
    for (radius, amp) in [(1usize, 1.0f64), (3, 0.8), (7, 0.6), (15, 0.5)] {
        let mut layer: Vec<f64> = (0..side * side).map(|_| normal.sample(&mut rng)).collect();
        box_blur(&mut layer, side, side, radius, 1);
        for (a, l) in acc.iter_mut().zip(&layer) {
            *a += amp * l;
        }
    }
    let (lo, hi) = acc
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    let range = (hi - lo).max(1e-12);
    acc.iter().map(|v| (v - lo) / range).collect()
}

/// 9-bit code image: bit k set where filter k's response is strictly
/// positive. Constant planes code to zero everywhere.
pub fn bsif_code_image(plane: &FloatPlane, bank: &BsifBank) -> FloatPlane {
    let w = plane.width();
    let h = plane.height();
    let mut codes = vec![0.0f64; w * h];
    for (k, filter) in bank.filters().iter().enumerate() {
        let response = convolve_zero_sum(plane, filter);
        let bit = (1usize << k) as f64;
        for (c, &r) in codes.iter_mut().zip(response.data()) {
            if r > 0.0 {
                *c += bit;
            }
        }
    }
    FloatPlane::new(w, h, codes).expect("codes are finite")
}

/// L1-normalized 512-bin histogram of the code image.
pub fn bsif_histogram(plane: &FloatPlane, bank: &BsifBank) -> Vec<f64> {
    let codes = bsif_code_image(plane, bank);
    let mut hist = vec![0.0f64; BSIF_CODES];
    for &c in codes.data() {
        hist[c as usize] += 1.0;
    }
    let total = codes.data().len() as f64;
    for v in hist.iter_mut() {
        *v /= total;
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_bank_shape_and_zero_mean() {
        let bank = BsifBank::generate(1234);
        assert_eq!(bank.filters().len(), 9);
        for f in bank.filters() {
            assert_eq!((f.width, f.height), (5, 5));
            assert!(f.coefficient_sum().abs() < 1e-9);
            let norm: f64 = f.data.iter().map(|v| v * v).sum();
            assert!((norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(BsifBank::generate(77), BsifBank::generate(77));
        assert_ne!(BsifBank::generate(77), BsifBank::generate(78));
    }

    #[test]
    fn constant_plane_codes_to_zero() {
        let bank = BsifBank::generate(5);
        let plane = FloatPlane::filled(16, 16, 0.37);
        let codes = bsif_code_image(&plane, &bank);
        assert!(codes.data().iter().all(|&c| c == 0.0));
        let hist = bsif_histogram(&plane, &bank);
        assert_eq!(hist[0], 1.0);
        assert!((hist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn flipping_filter_sign_flips_exactly_that_bit() {
        let bank = BsifBank::generate(9);
        let data: Vec<f64> = (0..24 * 24)
            .map(|i| ((i * 37 + 11) % 101) as f64 / 101.0)
            .collect();
        let plane = FloatPlane::new(24, 24, data).unwrap();
        let codes = bsif_code_image(&plane, &bank);

        for k in 0..BSIF_FILTERS {
            let mut filters = bank.filters().to_vec();
            filters[k] = Kernel::new(
                5,
                5,
                filters[k].data.iter().map(|v| -v).collect(),
            )
            .unwrap();
            let flipped_bank = BsifBank::new(filters).unwrap();
            let flipped = bsif_code_image(&plane, &flipped_bank);
            for (a, b) in codes.data().iter().zip(flipped.data()) {
                let (a, b) = (*a as usize, *b as usize);
                let diff = a ^ b;
                // Only bit k may change, and it must change wherever the
                // response is nonzero (a response of exactly zero keeps
                // the bit clear under both signs).
                assert_eq!(diff & !(1 << k), 0, "bit other than {k} changed");
            }
        }
    }

    #[test]
    fn wrong_shape_is_bank_error() {
        let k33 = Kernel::from_rows(&[
            vec![0.25, -0.5, 0.25],
            vec![-0.5, 1.0, -0.5],
            vec![0.25, -0.5, 0.25],
        ])
        .unwrap();
        assert!(matches!(
            BsifBank::new(vec![k33; 9]),
            Err(Error::Bank(_))
        ));
        let k55 = Kernel::new(5, 5, vec![0.0; 25]).unwrap();
        assert!(matches!(
            BsifBank::new(vec![k55; 4]),
            Err(Error::Bank(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let bank = BsifBank::generate(3);
        let json = bank.to_json();
        let back = BsifBank::from_json(&json).unwrap();
        for (a, b) in bank.filters().iter().zip(back.filters()) {
            for (x, y) in a.data.iter().zip(&b.data) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
