//! Shared 2-D convolution for zero-sum filter banks.

use crate::error::{Error, Result};
use crate::imgcore::FloatPlane;

/// A small convolution kernel, row-major, odd dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Kernel {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || width % 2 == 0 || height % 2 == 0 {
            return Err(Error::Kernel(format!(
                "kernel dimensions must be odd and positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Kernel(format!(
                "kernel data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Kernel("kernel contains non-finite values".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Kernel("kernel rows have uneven lengths".into()));
        }
        Self::new(width, height, rows.concat())
    }

    pub fn coefficient_sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// True convolution (kernel flipped) with edge-replicated borders, for
/// zero-sum kernels.
///
/// The response is accumulated on values centered at the output pixel,
/// which is algebraically identical for zero-sum kernels and makes the
/// response on constant planes exactly zero regardless of floating-point
/// residue in the coefficient sum.
pub fn convolve_zero_sum(plane: &FloatPlane, kernel: &Kernel) -> FloatPlane {
    let w = plane.width() as isize;
    let h = plane.height() as isize;
    let kw = kernel.width as isize;
    let kh = kernel.height as isize;
    let half_w = kw / 2;
    let half_h = kh / 2;

    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let center = plane.get_clamped(x, y);
            let mut acc = 0.0;
            for ky in 0..kh {
                for kx in 0..kw {
                    // True convolution: response(p) = sum_d k(d) v(p - d).
                    let weight = kernel.data[(ky * kw + kx) as usize];
                    let sx = x - (kx - half_w);
                    let sy = y - (ky - half_h);
                    acc += weight * (plane.get_clamped(sx, sy) - center);
                }
            }
            out.push(acc);
        }
    }
    FloatPlane::new(plane.width(), plane.height(), out).expect("convolution output is finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn second_order() -> Kernel {
        Kernel::from_rows(&[
            vec![-0.25, 0.5, -0.25],
            vec![0.5, -1.0, 0.5],
            vec![-0.25, 0.5, -0.25],
        ])
        .unwrap()
    }

    #[test]
    fn constant_plane_gives_exact_zero() {
        let plane = FloatPlane::filled(9, 7, 0.3171);
        let out = convolve_zero_sum(&plane, &second_order());
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_reproduces_the_kernel() {
        let mut plane = FloatPlane::zeros(7, 7);
        plane.set(3, 3, 1.0);
        let k = second_order();
        let out = convolve_zero_sum(&plane, &k);
        for dy in -1i32..=1 {
            for dx in -1i32..=1 {
                let expect = k.data[((dy + 1) * 3 + dx + 1) as usize];
                let got = out.get((3 + dx) as usize, (3 + dy) as usize);
                assert!((got - expect).abs() < 1e-12, "at ({dx},{dy})");
            }
        }
    }

    #[test]
    fn impulse_reproduces_asymmetric_kernels_too() {
        // Convolution identity: impulse * k = k, even for kernels without
        // symmetry (correlation would mirror them).
        let k = Kernel::from_rows(&[vec![-0.5, 0.0, 0.5]]).unwrap();
        let mut plane = FloatPlane::zeros(5, 1);
        plane.set(2, 0, 1.0);
        let out = convolve_zero_sum(&plane, &k);
        assert!((out.get(1, 0) + 0.5).abs() < 1e-12);
        assert!((out.get(3, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn even_kernel_is_rejected() {
        assert!(Kernel::new(2, 3, vec![0.0; 6]).is_err());
    }
}
