//! Frequency-domain features: log-magnitude DFT spectra with centered DC,
//! and the orthonormal 2-D DCT-II.

use crate::error::{Error, Result};
use crate::imgcore::{resize_bilinear, FloatPlane};
use crate::texsim::dft2d;

/// Log-magnitude DFT plane with the zero frequency shifted to the center.
pub fn dft_log_magnitude(plane: &FloatPlane) -> Result<FloatPlane> {
    let w = plane.width();
    let h = plane.height();
    if w < 8 || h < 8 {
        return Err(Error::Dimension(format!(
            "dft needs at least 8x8, got {w}x{h}"
        )));
    }
    let spectrum = dft2d(plane);
    let mut shifted = vec![0.0f64; w * h];
    for v in 0..h {
        let sv = (v + h / 2) % h;
        for u in 0..w {
            let su = (u + w / 2) % w;
            shifted[sv * w + su] = (1.0 + spectrum[v * w + u].norm()).ln();
        }
    }
    FloatPlane::new(w, h, shifted)
}

/// DFT feature: log magnitude, centered DC, resized to `d x d`.
pub fn dft_feature(plane: &FloatPlane, d: usize) -> Result<Vec<f64>> {
    let log_mag = dft_log_magnitude(plane)?;
    Ok(resize_bilinear(&log_mag, d, d)?.data().to_vec())
}

/// Orthonormal DCT-II basis for length n: `basis[k][j] = c_k cos(pi (2j+1) k / (2n))`.
fn dct_basis(n: usize) -> Vec<f64> {
    let mut basis = vec![0.0f64; n * n];
    for k in 0..n {
        let ck = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for j in 0..n {
            basis[k * n + j] =
                ck * (std::f64::consts::PI * (2.0 * j as f64 + 1.0) * k as f64 / (2.0 * n as f64))
                    .cos();
        }
    }
    basis
}

/// Orthonormal 2-D DCT-II of the whole plane.
pub fn dct2d(plane: &FloatPlane) -> FloatPlane {
    let w = plane.width();
    let h = plane.height();
    let row_basis = dct_basis(w);
    let col_basis = dct_basis(h);

    // Rows, then columns.
    let mut tmp = vec![0.0f64; w * h];
    for y in 0..h {
        for k in 0..w {
            let mut acc = 0.0;
            for j in 0..w {
                acc += row_basis[k * w + j] * plane.get(j, y);
            }
            tmp[y * w + k] = acc;
        }
    }
    let mut out = vec![0.0f64; w * h];
    for x in 0..w {
        for k in 0..h {
            let mut acc = 0.0;
            for j in 0..h {
                acc += col_basis[k * h + j] * tmp[j * w + x];
            }
            out[k * w + x] = acc;
        }
    }
    FloatPlane::new(w, h, out).expect("dct output is finite")
}

/// Inverse of [`dct2d`] (the transposed orthonormal transform).
pub fn idct2d(coef: &FloatPlane) -> FloatPlane {
    let w = coef.width();
    let h = coef.height();
    let row_basis = dct_basis(w);
    let col_basis = dct_basis(h);

    let mut tmp = vec![0.0f64; w * h];
    for x in 0..w {
        for j in 0..h {
            let mut acc = 0.0;
            for k in 0..h {
                acc += col_basis[k * h + j] * coef.get(x, k);
            }
            tmp[j * w + x] = acc;
        }
    }
    let mut out = vec![0.0f64; w * h];
    for y in 0..h {
        for j in 0..w {
            let mut acc = 0.0;
            for k in 0..w {
                acc += row_basis[k * w + j] * tmp[y * w + k];
            }
            out[y * w + j] = acc;
        }
    }
    FloatPlane::new(w, h, out).expect("idct output is finite")
}

/// DCT-II feature: log absolute coefficients resized to `d x d`.
pub fn dct2_feature(plane: &FloatPlane, d: usize) -> Result<Vec<f64>> {
    let w = plane.width();
    let h = plane.height();
    if w < 8 || h < 8 {
        return Err(Error::Dimension(format!(
            "dct2 needs at least 8x8, got {w}x{h}"
        )));
    }
    let coef = dct2d(plane);
    let log_plane = FloatPlane::new(
        w,
        h,
        coef.data().iter().map(|&v| (1.0 + v.abs()).ln()).collect(),
    )?;
    Ok(resize_bilinear(&log_plane, d, d)?.data().to_vec())
}
