//! Image representation, color handling, raster codecs, JPEG-quantization
//! simulation, and dataset-manifest ingestion.

mod codec;
mod jpegsim;
mod manifest;

pub use codec::{load_image, save_image};
pub use jpegsim::jpeg_quantize_roundtrip;
pub use manifest::{
    read_manifest, write_manifest, DatasetManifest, Label, MorphTool, SampleRecord, Source,
};

use crate::error::{Error, Result};

/// ITU-R 601 luma weights used for every RGB→gray reduction in the crate.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Decoded raster image: 8-bit samples, row-major, interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl ImageBuffer {
    /// Builds a buffer after checking the shape invariants.
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Dimension(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::Dimension(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Solid-color RGB image.
    pub fn filled_rgb(width: usize, height: usize, color: [u8; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&color);
        }
        Self::new(width, height, 3, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Sample at (x, y); channel index must be < channels.
    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn is_rgb(&self) -> bool {
        self.channels == 3
    }
}

/// Row-major plane of real values, the working currency of filters and
/// transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatPlane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl FloatPlane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "plane dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("plane contains non-finite values".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x] = v;
    }

    /// Sample with edge clamping at integer offsets.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.data[yc * self.width + xc]
    }

    /// Bilinear sample at real coordinates with edge clamping. Coordinates
    /// within 1e-9 of a lattice point are snapped so exact neighbors never
    /// drift from floating-point angle arithmetic.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let snap = |v: f64| {
            let r = v.round();
            if (v - r).abs() < 1e-9 {
                r
            } else {
                v
            }
        };
        let x = snap(x).clamp(0.0, (self.width - 1) as f64);
        let y = snap(y).clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let v00 = self.get(x0, y0);
        let v10 = self.get(x1, y0);
        let v01 = self.get(x0, y1);
        let v11 = self.get(x1, y1);
        // Nested lerps: exact on constant data, so ties in comparisons
        // downstream (LBP's >= rule) never flip from rounding.
        let top = v00 + fx * (v10 - v00);
        let bottom = v01 + fx * (v11 - v01);
        top + fy * (bottom - top)
    }
}

/// Reduces an image to a luminance plane in [0, 1].
///
/// RGB input uses the ITU-R 601 weights 0.299/0.587/0.114; grayscale input
/// is only rescaled by 1/255.
pub fn to_grayscale(img: &ImageBuffer) -> FloatPlane {
    let mut data = Vec::with_capacity(img.width * img.height);
    match img.channels {
        1 => data.extend(img.data.iter().map(|&v| v as f64 / 255.0)),
        3 => {
            for px in img.data.chunks_exact(3) {
                let y = LUMA_WEIGHTS[0] * px[0] as f64
                    + LUMA_WEIGHTS[1] * px[1] as f64
                    + LUMA_WEIGHTS[2] * px[2] as f64;
                data.push(y / 255.0);
            }
        }
        _ => unreachable!("ImageBuffer invariant guarantees 1 or 3 channels"),
    }
    FloatPlane {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Bilinear resize with edge clamping. Resizing to the source size returns
/// an identical plane.
pub fn resize_bilinear(plane: &FloatPlane, out_w: usize, out_h: usize) -> Result<FloatPlane> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::Dimension(format!(
            "resize target must be positive, got {out_w}x{out_h}"
        )));
    }
    if out_w == plane.width && out_h == plane.height {
        return Ok(plane.clone());
    }
    // Pixel centers are aligned: source coordinate of output pixel i is
    // (i + 0.5) * in/out - 0.5, clamped to the valid range.
    let mut data = Vec::with_capacity(out_w * out_h);
    let sx = plane.width as f64 / out_w as f64;
    let sy = plane.height as f64 / out_h as f64;
    for oy in 0..out_h {
        let y = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (plane.height - 1) as f64);
        for ox in 0..out_w {
            let x = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (plane.width - 1) as f64);
            data.push(plane.sample_bilinear(x, y));
        }
    }
    Ok(FloatPlane {
        width: out_w,
        height: out_h,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grayscale_saturation_cases() {
        let white = ImageBuffer::filled_rgb(3, 2, [255, 255, 255]).unwrap();
        assert!(to_grayscale(&white).data().iter().all(|&v| v == 1.0));

        let black = ImageBuffer::filled_rgb(3, 2, [0, 0, 0]).unwrap();
        assert!(to_grayscale(&black).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grayscale_pure_red_is_luma_weight() {
        let red = ImageBuffer::filled_rgb(2, 2, [255, 0, 0]).unwrap();
        for &v in to_grayscale(&red).data() {
            assert!((v - 0.299).abs() < 1e-12);
        }
    }

    #[test]
    fn grayscale_is_bounded_and_monotone_per_channel() {
        for r in [0u8, 40, 200, 255] {
            let lo = ImageBuffer::filled_rgb(1, 1, [r, 10, 10]).unwrap();
            let hi = ImageBuffer::filled_rgb(1, 1, [r.saturating_add(20), 10, 10]).unwrap();
            let a = to_grayscale(&lo).get(0, 0);
            let b = to_grayscale(&hi).get(0, 0);
            assert!((0.0..=1.0).contains(&a));
            assert!(b >= a);
        }
    }

    #[test]
    fn resize_identity_when_same_size() {
        let plane = FloatPlane::new(3, 2, vec![0.0, 0.5, 1.0, 0.25, 0.75, 0.125]).unwrap();
        let out = resize_bilinear(&plane, 3, 2).unwrap();
        assert_eq!(out, plane);
    }

    #[test]
    fn resize_constant_stays_constant() {
        let plane = FloatPlane::filled(5, 4, 0.37);
        for (w, h) in [(2, 2), (9, 7), (64, 1)] {
            let out = resize_bilinear(&plane, w, h).unwrap();
            assert!(out.data().iter().all(|&v| (v - 0.37).abs() < 1e-12));
        }
    }

    #[test]
    fn resize_upsample_is_monotone_between_endpoints() {
        let plane = FloatPlane::new(2, 1, vec![0.0, 1.0]).unwrap();
        let out = resize_bilinear(&plane, 4, 1).unwrap();
        let d = out.data();
        assert_eq!(d.len(), 4);
        for w in d.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!((0.0..=1.0).contains(&d[0]));
        assert!((0.0..=1.0).contains(&d[3]));
        // Direct evaluation of the center-aligned bilinear formula.
        assert!((d[0] - 0.0).abs() < 1e-12);
        assert!((d[1] - 0.25).abs() < 1e-12);
        assert!((d[2] - 0.75).abs() < 1e-12);
        assert!((d[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resize_output_within_input_range() {
        let plane = FloatPlane::new(4, 3, (0..12).map(|i| (i as f64).sin()).collect()).unwrap();
        let (lo, hi) = plane
            .data()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                (l.min(v), h.max(v))
            });
        let out = resize_bilinear(&plane, 11, 9).unwrap();
        for &v in out.data() {
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn resize_zero_target_is_error() {
        let plane = FloatPlane::filled(2, 2, 0.0);
        assert!(matches!(
            resize_bilinear(&plane, 0, 4),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn image_buffer_rejects_bad_shapes() {
        assert!(ImageBuffer::new(0, 2, 3, vec![]).is_err());
        assert!(ImageBuffer::new(2, 2, 2, vec![0; 8]).is_err());
        assert!(ImageBuffer::new(2, 2, 3, vec![0; 11]).is_err());
    }
}
