//! Texture transfer onto face images, Gaussian-noise controls, and
//! FID-driven selection of the best texture template.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::evalmetrics::{fid, gaussian_stats, Embedder};
use crate::imgcore::{FloatPlane, ImageBuffer, LUMA_WEIGHTS};
use crate::qrpalette::{Dpi, PaperKind, TexturePatch};

/// How a residual is fitted onto an image of a different size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitPolicy {
    /// Center the residual over the image; if the residual is smaller it
    /// is mirror-extended first.
    CenterCrop,
    /// Tile from the top-left corner with alternating reflections.
    MirrorTile,
}

/// Mirror index with edge repetition (period 2n).
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let m = i.rem_euclid(2 * n);
    if m < n {
        m as usize
    } else {
        (2 * n - 1 - m) as usize
    }
}

/// Adds a texture residual to an RGB image, clamping to [0, 255] with
/// half-away-from-zero rounding. A zero residual is the identity.
pub fn apply_texture(
    img: &ImageBuffer,
    texture: &TexturePatch,
    fit: FitPolicy,
) -> Result<ImageBuffer> {
    if !img.is_rgb() {
        return Err(Error::Dimension("apply_texture needs an RGB image".into()));
    }
    if texture.width == 0 || texture.height == 0 {
        return Err(Error::Dimension("texture has zero area".into()));
    }
    let (w, h) = (img.width(), img.height());
    let (tw, th) = (texture.width, texture.height);
    let (off_x, off_y) = match fit {
        FitPolicy::CenterCrop => (
            (tw as isize - w as isize) / 2,
            (th as isize - h as isize) / 2,
        ),
        FitPolicy::MirrorTile => (0, 0),
    };

    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        let ty = reflect(y as isize + off_y, th);
        for x in 0..w {
            let tx = reflect(x as isize + off_x, tw);
            for c in 0..3 {
                let v = img.get(x, y, c) as f64 + texture.get(tx, ty, c);
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    ImageBuffer::new(w, h, 3, data)
}

/// Adds i.i.d. zero-mean Gaussian noise per pixel and channel, clamped to
/// [0, 255]; bit-identical for a fixed seed.
pub fn add_gaussian_noise(img: &ImageBuffer, sigma: f64, seed: u64) -> Result<ImageBuffer> {
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(Error::Domain(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma checked finite and positive");
    let data = img
        .data()
        .iter()
        .map(|&v| (v as f64 + normal.sample(&mut rng)).round().clamp(0.0, 255.0) as u8)
        .collect();
    ImageBuffer::new(img.width(), img.height(), img.channels(), data)
}

/// 2-D DFT power binned by integer radius, DC excluded. Bin `r-1` holds
/// the mean power at radius `r`, up to the smaller Nyquist radius.
pub fn radial_power_spectrum(plane: &FloatPlane) -> Result<Vec<f64>> {
    let w = plane.width();
    let h = plane.height();
    if w < 8 || h < 8 {
        return Err(Error::Dimension(format!(
            "spectrum needs at least 8x8, got {w}x{h}"
        )));
    }
    let spectrum = dft2d(plane);
    let r_max = w.min(h) / 2;
    let mut sums = vec![0.0f64; r_max];
    let mut counts = vec![0usize; r_max];
    for ky in 0..h {
        let fy = if ky <= h / 2 {
            ky as f64
        } else {
            ky as f64 - h as f64
        };
        for kx in 0..w {
            let fx = if kx <= w / 2 {
                kx as f64
            } else {
                kx as f64 - w as f64
            };
            let r = fx.hypot(fy).round() as usize;
            if r == 0 || r > r_max {
                continue;
            }
            sums[r - 1] += spectrum[ky * w + kx].norm_sqr();
            counts[r - 1] += 1;
        }
    }
    Ok(sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect())
}

/// Unnormalized forward 2-D DFT.
pub(crate) fn dft2d(plane: &FloatPlane) -> Vec<Complex<f64>> {
    let w = plane.width();
    let h = plane.height();
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(w);
    let col_fft = planner.plan_fft_forward(h);

    let mut data: Vec<Complex<f64>> = plane
        .data()
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .collect();
    for row in data.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let mut col = vec![Complex::default(); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = data[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            data[y * w + x] = col[y];
        }
    }
    data
}

/// Geometric over arithmetic mean of a radial spectrum, in [0, 1]; defined
/// as 0 when the spectrum carries no energy or any bin is empty.
pub fn spectral_flatness(spectrum: &[f64]) -> f64 {
    if spectrum.is_empty() {
        return 0.0;
    }
    let arith = spectrum.iter().sum::<f64>() / spectrum.len() as f64;
    if arith <= f64::MIN_POSITIVE {
        return 0.0;
    }
    if spectrum.iter().any(|&v| v <= 0.0) {
        return 0.0;
    }
    let geo = (spectrum.iter().map(|v| v.ln()).sum::<f64>() / spectrum.len() as f64).exp();
    (geo / arith).clamp(0.0, 1.0)
}

/// An ordered bank of texture patches, ids contiguous from 1.
#[derive(Debug, Clone)]
pub struct TextureBank {
    patches: Vec<TexturePatch>,
    pub provenance: String,
}

impl TextureBank {
    pub fn new(patches: Vec<TexturePatch>, provenance: impl Into<String>) -> Result<Self> {
        if patches.is_empty() {
            return Err(Error::Dimension("texture bank is empty".into()));
        }
        Ok(Self {
            patches,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// 1-based lookup mirroring the on-disk `tex_NNN` naming.
    pub fn get(&self, id: usize) -> Result<&TexturePatch> {
        self.patches.get(id.wrapping_sub(1)).ok_or_else(|| {
            Error::NotFound(format!("texture id {id} not in bank of {}", self.len()))
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &TexturePatch)> {
        self.patches.iter().enumerate().map(|(i, p)| (i + 1, p))
    }

    /// Loads every `tex_*.png` (with sidecar) from a directory, ordered by
    /// file name.
    pub fn from_dir(dir: impl AsRef<std::path::Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                p.extension().is_some_and(|e| e == "png")
                    && p.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with("tex_"))
            })
            .collect();
        paths.sort();
        let patches: Vec<TexturePatch> = paths
            .iter()
            .map(crate::qrpalette::load_texture)
            .collect::<Result<_>>()?;
        Self::new(patches, format!("loaded from {}", dir.display()))
    }

    /// Writes the bank as `tex_NNN.png` files plus sidecars.
    pub fn save_to_dir(&self, dir: impl AsRef<std::path::Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (id, patch) in self.iter() {
            let path = dir.join(format!("tex_{id:03}.png"));
            crate::qrpalette::save_texture(patch, path)?;
        }
        Ok(())
    }

    /// Five deterministic print/scan-style sample textures: low-pass
    /// correlated grain plus faint scanner banding and a small color cast.
    /// Their spectra are concentrated at low radius, unlike white noise.
    pub fn builtin_samples() -> Self {
        let mut patches = Vec::new();
        for k in 0..5u64 {
            patches.push(sample_texture(120, 160, 0x5CA7_0000 + k));
        }
        Self {
            patches,
            provenance: "builtin print/scan-style samples".into(),
        }
    }
}

pub(crate) fn box_blur(data: &mut [f64], w: usize, h: usize, radius: usize, passes: usize) {
    let mut tmp = vec![0.0f64; w * h];
    for _ in 0..passes {
        // horizontal
        for y in 0..h {
            for x in 0..w {
                let lo = x.saturating_sub(radius);
                let hi = (x + radius + 1).min(w);
                let sum: f64 = data[y * w + lo..y * w + hi].iter().sum();
                tmp[y * w + x] = sum / (hi - lo) as f64;
            }
        }
        // vertical
        for x in 0..w {
            for y in 0..h {
                let lo = y.saturating_sub(radius);
                let hi = (y + radius + 1).min(h);
                let sum: f64 = (lo..hi).map(|yy| tmp[yy * w + x]).sum();
                data[y * w + x] = sum / (hi - lo) as f64;
            }
        }
    }
}

fn sample_texture(w: usize, h: usize, seed: u64) -> TexturePatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grain = Normal::new(0.0, 16.0).unwrap();
    let casts = [
        (seed % 7) as f64 - 3.0,
        ((seed / 7) % 7) as f64 - 3.0,
        ((seed / 49) % 7) as f64 - 3.0,
    ];
    let band_amp = 2.0 + (seed % 3) as f64;
    let band_period = 9.0 + (seed % 5) as f64;

    let mut channels: Vec<Vec<f64>> = Vec::with_capacity(3);
    for _ in 0..3 {
        let mut plane: Vec<f64> = (0..w * h).map(|_| grain.sample(&mut rng)).collect();
        box_blur(&mut plane, w, h, 1, 1);
        channels.push(plane);
    }

    let mut residual = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        let band = band_amp * (2.0 * std::f64::consts::PI * y as f64 / band_period).sin();
        for x in 0..w {
            for (c, chan) in channels.iter().enumerate() {
                let v = chan[y * w + x] + band + casts[c];
                residual.push(v.clamp(-40.0, 40.0));
            }
        }
    }
    TexturePatch::new(w, h, residual, [0, 0, 0], Dpi::D600, PaperKind::Glossy)
        .expect("sample texture is well-formed")
}

/// Luma projection of a residual field, for spectral comparisons.
pub fn residual_luma_plane(texture: &TexturePatch) -> FloatPlane {
    let mut data = Vec::with_capacity(texture.width * texture.height);
    for px in texture.residual.chunks_exact(3) {
        data.push(LUMA_WEIGHTS[0] * px[0] + LUMA_WEIGHTS[1] * px[1] + LUMA_WEIGHTS[2] * px[2]);
    }
    FloatPlane::new(texture.width, texture.height, data).expect("residual is finite")
}

/// Picks the texture whose candidate image set is closest to the reference
/// set under FID; ties break to the lowest id. `candidates[i]` holds the
/// images generated with texture id `i + 1`.
pub fn select_best_texture(
    bank: &TextureBank,
    candidates: &[Vec<ImageBuffer>],
    reference: &[ImageBuffer],
    embedder: &dyn Embedder,
) -> Result<(usize, f64)> {
    if candidates.len() != bank.len() {
        return Err(Error::Dimension(format!(
            "{} candidate sets for a bank of {}",
            candidates.len(),
            bank.len()
        )));
    }
    let embed_set = |imgs: &[ImageBuffer]| -> Vec<Vec<f64>> {
        imgs.iter().map(|i| embedder.embed(i)).collect()
    };
    let ref_stats = gaussian_stats(&embed_set(reference))?;

    let mut best: Option<(usize, f64)> = None;
    for (idx, set) in candidates.iter().enumerate() {
        let stats = gaussian_stats(&embed_set(set))?;
        let value = fid(&stats, &ref_stats)?;
        if best.is_none_or(|(_, b)| value < b) {
            best = Some((idx + 1, value));
        }
    }
    Ok(best.expect("bank is non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalmetrics::BuiltinEmbedder;

    fn flat_texture(w: usize, h: usize, rgb: [f64; 3]) -> TexturePatch {
        let mut residual = Vec::with_capacity(w * h * 3);
        for _ in 0..w * h {
            residual.extend_from_slice(&rgb);
        }
        TexturePatch::new(w, h, residual, [0, 0, 0], Dpi::D600, PaperKind::Glossy).unwrap()
    }

    #[test]
    fn zero_residual_is_identity() {
        let img = ImageBuffer::filled_rgb(9, 7, [120, 13, 200]).unwrap();
        let t = flat_texture(4, 4, [0.0, 0.0, 0.0]);
        for fit in [FitPolicy::CenterCrop, FitPolicy::MirrorTile] {
            assert_eq!(apply_texture(&img, &t, fit).unwrap(), img);
        }
    }

    #[test]
    fn saturation_clamps() {
        let img = ImageBuffer::filled_rgb(3, 3, [250, 250, 250]).unwrap();
        let t = flat_texture(3, 3, [10.0, 10.0, 10.0]);
        let out = apply_texture(&img, &t, FitPolicy::CenterCrop).unwrap();
        assert!(out.data().iter().all(|&v| v == 255));
    }

    #[test]
    fn constant_shift_per_channel() {
        let img = ImageBuffer::filled_rgb(5, 5, [100, 100, 100]).unwrap();
        let t = flat_texture(8, 8, [5.0, 0.0, -5.0]);
        let out = apply_texture(&img, &t, FitPolicy::CenterCrop).unwrap();
        for px in out.data().chunks_exact(3) {
            assert_eq!(px, [105, 100, 95]);
        }
    }

    #[test]
    fn mirror_tile_covers_larger_images() {
        let img = ImageBuffer::filled_rgb(50, 40, [128, 128, 128]).unwrap();
        let t = flat_texture(7, 9, [3.0, 3.0, 3.0]);
        let out = apply_texture(&img, &t, FitPolicy::MirrorTile).unwrap();
        assert!(out.data().iter().all(|&v| v == 131));
    }

    #[test]
    fn noise_sigma_zero_is_identity_and_seeds_reproduce() {
        let img = ImageBuffer::filled_rgb(16, 16, [60, 120, 180]).unwrap();
        assert_eq!(add_gaussian_noise(&img, 0.0, 9).unwrap(), img);
        let a = add_gaussian_noise(&img, 5.0, 42).unwrap();
        let b = add_gaussian_noise(&img, 5.0, 42).unwrap();
        let c = add_gaussian_noise(&img, 5.0, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noise_moments_match_request() {
        let img = ImageBuffer::filled_rgb(200, 200, [128, 128, 128]).unwrap();
        let noisy = add_gaussian_noise(&img, 10.0, 7).unwrap();
        let n = noisy.data().len() as f64;
        let mean = noisy.data().iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = noisy
            .data()
            .iter()
            .map(|&v| (v as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        assert!((mean - 128.0).abs() < 0.5, "mean {mean}");
        assert!((var.sqrt() - 10.0).abs() < 0.5, "std {}", var.sqrt());
    }

    #[test]
    fn white_noise_is_flat_sinusoid_is_not() {
        use rand::Rng;
        let mut flat_count = 0;
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..64 * 64).map(|_| rng.random_range(-1.0..1.0)).collect();
            let plane = FloatPlane::new(64, 64, data).unwrap();
            let flatness = spectral_flatness(&radial_power_spectrum(&plane).unwrap());
            if flatness >= 0.8 {
                flat_count += 1;
            }
        }
        assert!(flat_count >= 9, "white noise flat in {flat_count}/10 seeds");

        let mut data = Vec::with_capacity(64 * 64);
        for _y in 0..64 {
            for x in 0..64 {
                data.push((2.0 * std::f64::consts::PI * 8.0 * x as f64 / 64.0).sin());
            }
        }
        let plane = FloatPlane::new(64, 64, data).unwrap();
        let flatness = spectral_flatness(&radial_power_spectrum(&plane).unwrap());
        assert!(flatness <= 0.1, "sinusoid flatness {flatness}");
    }

    #[test]
    fn constant_plane_has_zero_flatness() {
        let plane = FloatPlane::filled(16, 16, 3.25);
        let spectrum = radial_power_spectrum(&plane).unwrap();
        assert!(spectrum.iter().all(|&v| v.abs() < 1e-12));
        assert_eq!(spectral_flatness(&spectrum), 0.0);
    }

    #[test]
    fn tiny_plane_is_dimension_error() {
        let plane = FloatPlane::filled(4, 4, 1.0);
        assert!(matches!(
            radial_power_spectrum(&plane),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn builtin_textures_are_less_flat_than_matched_gaussian() {
        let bank = TextureBank::builtin_samples();
        for (id, patch) in bank.iter() {
            let plane = residual_luma_plane(patch);
            let n = plane.data().len() as f64;
            let mean = plane.data().iter().sum::<f64>() / n;
            let sigma =
                (plane.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            let tex_flat = spectral_flatness(&radial_power_spectrum(&plane).unwrap());

            let normal = Normal::new(0.0, sigma.max(1e-6)).unwrap();
            for seed in 0..10u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
                let data: Vec<f64> = (0..plane.data().len())
                    .map(|_| normal.sample(&mut rng))
                    .collect();
                let gauss = FloatPlane::new(plane.width(), plane.height(), data).unwrap();
                let gauss_flat = spectral_flatness(&radial_power_spectrum(&gauss).unwrap());
                assert!(
                    gauss_flat > tex_flat,
                    "texture {id}: gaussian {gauss_flat} <= texture {tex_flat}"
                );
            }
        }
    }

    #[test]
    fn select_prefers_the_matching_distribution() {
        use rand::Rng;
        let bank = TextureBank::new(
            vec![flat_texture(4, 4, [0.0; 3]), flat_texture(4, 4, [1.0; 3])],
            "fixture",
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut image_set = |shift: f64| -> Vec<ImageBuffer> {
            (0..80)
                .map(|_| {
                    let base: f64 = rng.random_range(80.0..160.0);
                    let v = (base + shift).clamp(0.0, 255.0) as u8;
                    let mut img = ImageBuffer::filled_rgb(16, 16, [v, v, v]).unwrap();
                    // a little per-image structure so covariances are sane
                    let w = img.width();
                    for x in 0..w {
                        let bump = ((x as f64 / w as f64) * 20.0) as u8;
                        for c in 0..3 {
                            let cur = img.get(x, 0, c);
                            img.set(x, 0, c, cur.saturating_add(bump));
                        }
                    }
                    img
                })
                .collect()
        };
        let reference = image_set(0.0);
        let matching = image_set(0.0);
        let shifted = image_set(60.0);
        let (best_id, best_fid) =
            select_best_texture(&bank, &[matching, shifted], &reference, &BuiltinEmbedder)
                .unwrap();
        assert_eq!(best_id, 1);
        assert!(best_fid >= 0.0);
    }

    #[test]
    fn isolate_then_apply_round_trips_on_flat_base() {
        use crate::qrpalette::{isolate_texture, Rect};
        use rand::Rng;
        let declared = [90u8, 140, 60];
        // Scanned patch: declared color plus integer noise.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut scan_data = Vec::new();
        for _ in 0..30 * 20 {
            for c in 0..3 {
                let delta: i16 = rng.random_range(-12..=12);
                scan_data.push((declared[c] as i16 + delta).clamp(0, 255) as u8);
            }
        }
        let scan = ImageBuffer::new(30, 20, 3, scan_data).unwrap();
        let texture = isolate_texture(&scan, Rect::new(0, 0, 30, 20), declared, 0.0).unwrap();
        let flat = ImageBuffer::filled_rgb(30, 20, declared).unwrap();
        let rebuilt = apply_texture(&flat, &texture, FitPolicy::CenterCrop).unwrap();
        for (a, b) in rebuilt.data().iter().zip(scan.data()) {
            assert!((*a as i16 - *b as i16).abs() <= 1);
        }
    }
}
