//! DCT-domain JPEG quantization simulation.
//!
//! Reproduces the lossy part of baseline JPEG on a luminance plane without
//! producing a bitstream: per 8x8 block the plane is level-shifted by 128,
//! transformed with an orthonormal 2-D DCT-II, divided by the quality-scaled
//! standard luminance table, rounded, multiplied back, inverse transformed
//! and clamped. This is exactly the residual source error-level analysis
//! needs.

use super::FloatPlane;
use crate::error::{Error, Result};

/// IJG standard luminance quantization table, zig-zag-free row-major order.
const LUMA_QUANT_BASE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Scales the base table by the conventional quality rule:
/// scale = 5000/Q for Q < 50, else 200 - 2Q; entries floor-scaled and
/// clamped to [1, 255].
pub fn scaled_luma_table(quality: u32) -> Result<[f64; 64]> {
    if !(1..=100).contains(&quality) {
        return Err(Error::Domain(format!(
            "jpeg quality must be in [1, 100], got {quality}"
        )));
    }
    let scale = if quality < 50 {
        5000 / quality
    } else {
        200 - 2 * quality
    };
    let mut table = [0.0f64; 64];
    for (out, &base) in table.iter_mut().zip(LUMA_QUANT_BASE.iter()) {
        let scaled = (u32::from(base) * scale + 50) / 100;
        *out = scaled.clamp(1, 255) as f64;
    }
    Ok(table)
}

/// 8-point orthonormal DCT-II basis, `BASIS[k][n] = c_k cos(pi (2n+1) k / 16)`.
fn dct8_basis() -> [[f64; 8]; 8] {
    let mut basis = [[0.0; 8]; 8];
    for (k, row) in basis.iter_mut().enumerate() {
        let ck = if k == 0 {
            (1.0f64 / 8.0).sqrt()
        } else {
            (2.0f64 / 8.0).sqrt()
        };
        for (n, v) in row.iter_mut().enumerate() {
            *v = ck * (std::f64::consts::PI * (2.0 * n as f64 + 1.0) * k as f64 / 16.0).cos();
        }
    }
    basis
}

fn dct8_2d(block: &[f64; 64], basis: &[[f64; 8]; 8]) -> [f64; 64] {
    let mut tmp = [0.0; 64];
    // rows
    for y in 0..8 {
        for k in 0..8 {
            let mut acc = 0.0;
            for n in 0..8 {
                acc += basis[k][n] * block[y * 8 + n];
            }
            tmp[y * 8 + k] = acc;
        }
    }
    let mut out = [0.0; 64];
    // columns
    for x in 0..8 {
        for k in 0..8 {
            let mut acc = 0.0;
            for n in 0..8 {
                acc += basis[k][n] * tmp[n * 8 + x];
            }
            out[k * 8 + x] = acc;
        }
    }
    out
}

fn idct8_2d(coef: &[f64; 64], basis: &[[f64; 8]; 8]) -> [f64; 64] {
    let mut tmp = [0.0; 64];
    // columns (transpose of forward)
    for x in 0..8 {
        for n in 0..8 {
            let mut acc = 0.0;
            for k in 0..8 {
                acc += basis[k][n] * coef[k * 8 + x];
            }
            tmp[n * 8 + x] = acc;
        }
    }
    let mut out = [0.0; 64];
    // rows
    for y in 0..8 {
        for n in 0..8 {
            let mut acc = 0.0;
            for k in 0..8 {
                acc += basis[k][n] * tmp[y * 8 + k];
            }
            out[y * 8 + n] = acc;
        }
    }
    out
}

/// Round half away from zero, the JPEG quantizer convention.
#[inline]
fn quantize(v: f64, q: f64) -> f64 {
    (v / q).round() * q
}

/// Applies one JPEG quantization round trip to a plane of values in
/// [0, 255].
///
/// The plane is padded to a block multiple by edge replication and cropped
/// back afterwards. A constant 128 plane survives every quality level
/// unchanged (level shift makes all coefficients zero).
pub fn jpeg_quantize_roundtrip(plane: &FloatPlane, quality: u32) -> Result<FloatPlane> {
    let table = scaled_luma_table(quality)?;
    let basis = dct8_basis();

    let w = plane.width();
    let h = plane.height();
    let bw = w.div_ceil(8) * 8;
    let bh = h.div_ceil(8) * 8;

    // Edge-replicated padded copy, level-shifted by -128.
    let mut padded = vec![0.0f64; bw * bh];
    for y in 0..bh {
        let sy = y.min(h - 1);
        for x in 0..bw {
            let sx = x.min(w - 1);
            padded[y * bw + x] = plane.get(sx, sy) - 128.0;
        }
    }

    let mut block = [0.0f64; 64];
    for by in (0..bh).step_by(8) {
        for bx in (0..bw).step_by(8) {
            for y in 0..8 {
                for x in 0..8 {
                    block[y * 8 + x] = padded[(by + y) * bw + bx + x];
                }
            }
            let mut coef = dct8_2d(&block, &basis);
            for (c, &q) in coef.iter_mut().zip(table.iter()) {
                *c = quantize(*c, q);
            }
            let rec = idct8_2d(&coef, &basis);
            for y in 0..8 {
                for x in 0..8 {
                    padded[(by + y) * bw + bx + x] = rec[y * 8 + x];
                }
            }
        }
    }

    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push((padded[y * bw + x] + 128.0).clamp(0.0, 255.0));
        }
    }
    FloatPlane::new(w, h, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smooth_random_plane(w: usize, h: usize, seed: u64) -> FloatPlane {
        // Sum of a few low-frequency sinusoids, scaled into [0, 255].
        let mut data = Vec::with_capacity(w * h);
        let s = seed as f64;
        for y in 0..h {
            for x in 0..w {
                let v = ((x as f64 * 0.11 + s).sin()
                    + (y as f64 * 0.07 + 2.0 * s).cos()
                    + ((x + y) as f64 * 0.05 + 0.3 * s).sin())
                    / 3.0;
                data.push((v * 0.5 + 0.5) * 255.0);
            }
        }
        FloatPlane::new(w, h, data).unwrap()
    }

    #[test]
    fn constant_128_survives_every_quality() {
        let plane = FloatPlane::filled(20, 12, 128.0);
        for q in [1, 10, 50, 70, 90, 100] {
            let out = jpeg_quantize_roundtrip(&plane, q).unwrap();
            for &v in out.data() {
                assert!((v - 128.0).abs() < 1e-9, "quality {q} moved 128 to {v}");
            }
        }
    }

    #[test]
    fn approximate_idempotence_on_smooth_planes() {
        for seed in 0..10 {
            let plane = smooth_random_plane(40, 32, seed);
            let once = jpeg_quantize_roundtrip(&plane, 70).unwrap();
            let twice = jpeg_quantize_roundtrip(&once, 70).unwrap();
            let mean_abs: f64 = once
                .data()
                .iter()
                .zip(twice.data())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / once.data().len() as f64;
            assert!(mean_abs < 2.0, "seed {seed}: mean abs {mean_abs}");
        }
    }

    #[test]
    fn quality_zero_is_domain_error() {
        let plane = FloatPlane::filled(8, 8, 100.0);
        assert!(matches!(
            jpeg_quantize_roundtrip(&plane, 0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            jpeg_quantize_roundtrip(&plane, 101),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn output_stays_in_range_on_non_block_sizes() {
        let plane = smooth_random_plane(37, 19, 3);
        let out = jpeg_quantize_roundtrip(&plane, 30).unwrap();
        assert_eq!((out.width(), out.height()), (37, 19));
        assert!(out.data().iter().all(|&v| (0.0..=255.0).contains(&v)));
    }

    #[test]
    fn dct_basis_is_orthonormal() {
        let basis = dct8_basis();
        for i in 0..8 {
            for j in 0..8 {
                let dot: f64 = (0..8).map(|n| basis[i][n] * basis[j][n]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scaled_table_matches_hand_computed_entries() {
        // Quality 50 keeps the base table; quality 70 scales by 60/100.
        let t50 = scaled_luma_table(50).unwrap();
        assert_eq!(t50[0], 16.0);
        let t70 = scaled_luma_table(70).unwrap();
        assert_eq!(t70[0], ((16 * 60 + 50) / 100) as f64); // 10
        let t10 = scaled_luma_table(10).unwrap();
        assert_eq!(t10[0], ((16 * 500 + 50) / 100) as f64); // 80
        let t100 = scaled_luma_table(100).unwrap();
        assert!(t100.iter().all(|&q| q == 1.0));
    }
}
