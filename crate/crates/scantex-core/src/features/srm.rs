//! Steganalysis rich-model residuals: a trio of zero-sum high-pass
//! kernels whose clamped responses expose local tampering noise.

use super::filters::{convolve_zero_sum, Kernel};
use crate::error::{Error, Result};
use crate::imgcore::{resize_bilinear, FloatPlane};

/// Gain applied to responses on the [0, 1] intensity scale before
/// clamping.
pub const SRM_GAIN: f64 = 8.0;
/// Clamp bound after gain.
pub const SRM_CLAMP: f64 = 2.0;

/// The residual kernel trio. The defaults are the standard steganalysis
/// kernels (second-order 3x3, 5x5 "KV", first-order horizontal); a JSON
/// file with the same shape can replace them.
#[derive(Debug, Clone, PartialEq)]
pub struct SrmKernels {
    kernels: Vec<Kernel>,
}

impl SrmKernels {
    pub fn new(kernels: Vec<Kernel>) -> Result<Self> {
        if kernels.len() != 3 {
            return Err(Error::Kernel(format!(
                "expected 3 kernels, got {}",
                kernels.len()
            )));
        }
        for (i, k) in kernels.iter().enumerate() {
            if k.coefficient_sum().abs() > 1e-9 {
                return Err(Error::Kernel(format!(
                    "kernel {i} has nonzero coefficient sum {}",
                    k.coefficient_sum()
                )));
            }
        }
        Ok(Self { kernels })
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    /// JSON format: a list of three row-major matrices.
    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rows: Vec<Vec<Vec<f64>>> = serde_json::from_str(&text)
            .map_err(|e| Error::Kernel(format!("bad kernel JSON: {e}")))?;
        let kernels = rows
            .iter()
            .map(|m| Kernel::from_rows(m))
            .collect::<Result<Vec<_>>>()?;
        Self::new(kernels)
    }
}

impl Default for SrmKernels {
    fn default() -> Self {
        let second_order = Kernel::from_rows(&[
            vec![-0.25, 0.5, -0.25],
            vec![0.5, -1.0, 0.5],
            vec![-0.25, 0.5, -0.25],
        ])
        .expect("second-order kernel is valid");
        let kv = Kernel::from_rows(&[
            vec![-1.0, 2.0, -2.0, 2.0, -1.0],
            vec![2.0, -6.0, 8.0, -6.0, 2.0],
            vec![-2.0, 8.0, -12.0, 8.0, -2.0],
            vec![2.0, -6.0, 8.0, -6.0, 2.0],
            vec![-1.0, 2.0, -2.0, 2.0, -1.0],
        ])
        .expect("KV kernel is valid")
        .scaled(1.0 / 12.0);
        let first_order = Kernel::from_rows(&[vec![-0.5, 0.0, 0.5]])
            .expect("first-order kernel is valid");
        Self::new(vec![second_order, kv, first_order]).expect("default kernels are zero-sum")
    }
}

impl Kernel {
    fn scaled(&self, factor: f64) -> Kernel {
        Kernel {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Per-kernel residual planes, each gained, clamped to `[-2, 2]`, resized
/// to `d x d`, and concatenated (length `3 d^2`).
pub fn srm(plane: &FloatPlane, kernels: &SrmKernels, d: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(3 * d * d);
    for kernel in kernels.kernels() {
        let response = convolve_zero_sum(plane, kernel);
        let clamped = FloatPlane::new(
            response.width(),
            response.height(),
            response
                .data()
                .iter()
                .map(|&v| (v * SRM_GAIN).clamp(-SRM_CLAMP, SRM_CLAMP))
                .collect(),
        )?;
        let resized = resize_bilinear(&clamped, d, d)?;
        out.extend_from_slice(resized.data());
    }
    Ok(out)
}
