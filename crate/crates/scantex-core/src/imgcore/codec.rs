//! Raster codecs: PNG (8/16-bit), PPM/PGM, and baseline JPEG decode.
//!
//! Encoding always writes 8-bit PNG or PPM/PGM; JPEG files are decoded but
//! never written (the recompression residual needed by error-level analysis
//! comes from [`super::jpeg_quantize_roundtrip`] instead).

use std::path::Path;

use image::{DynamicImage, ImageFormat};

use super::ImageBuffer;
use crate::error::{Error, Result};

fn format_for(path: &Path) -> Result<ImageFormat> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "png" => Ok(ImageFormat::Png),
        "ppm" | "pgm" | "pnm" => Ok(ImageFormat::Pnm),
        "jpg" | "jpeg" => Ok(ImageFormat::Jpeg),
        other => Err(Error::Format(format!(
            "unsupported image extension '{other}' (expected png, ppm, pgm, jpg)"
        ))),
    }
}

/// Decodes a PNG, PPM/PGM, or baseline JPEG file into an 8-bit buffer.
///
/// Grayscale files yield `channels = 1`; everything else is normalized to
/// 8-bit RGB (16-bit inputs are rescaled, alpha is dropped).
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let format = format_for(path)?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let dyn_img = image::load_from_memory_with_format(&bytes, format)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let (w, h) = (dyn_img.width() as usize, dyn_img.height() as usize);
    match dyn_img {
        DynamicImage::ImageLuma8(buf) => ImageBuffer::new(w, h, 1, buf.into_raw()),
        DynamicImage::ImageLuma16(buf) => {
            let data = buf.into_raw().iter().map(|&v| (v >> 8) as u8).collect();
            ImageBuffer::new(w, h, 1, data)
        }
        other => {
            let rgb = other.into_rgb8();
            ImageBuffer::new(w, h, 3, rgb.into_raw())
        }
    }
}

/// Encodes the buffer as PNG or PPM/PGM; round trips are bit-exact.
pub fn save_image(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = format_for(path)?;
    if format == ImageFormat::Jpeg {
        return Err(Error::Format(
            "JPEG encoding is not supported; use PNG or PPM".into(),
        ));
    }
    let w = img.width() as u32;
    let h = img.height() as u32;
    let dyn_img = match img.channels() {
        1 => DynamicImage::ImageLuma8(
            image::GrayImage::from_raw(w, h, img.data().to_vec())
                .expect("buffer length checked by ImageBuffer"),
        ),
        _ => DynamicImage::ImageRgb8(
            image::RgbImage::from_raw(w, h, img.data().to_vec())
                .expect("buffer length checked by ImageBuffer"),
        ),
    };
    dyn_img
        .save_with_format(path, format)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_black_2x2_decodes_to_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("black.ppm");
        // P6, 2x2, maxval 255, then 12 zero bytes.
        let mut bytes = b"P6\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0u8; 12]);
        std::fs::write(&path, bytes).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (2, 2, 3));
        assert!(img.data().iter().all(|&v| v == 0));
    }

    #[test]
    fn png_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.png");
        let data: Vec<u8> = (0..5 * 4 * 3).map(|i| (i * 7 % 256) as u8).collect();
        let img = ImageBuffer::new(5, 4, 3, data).unwrap();
        save_image(&img, &path).unwrap();
        assert_eq!(load_image(&path).unwrap(), img);
    }

    #[test]
    fn ppm_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.ppm");
        let data: Vec<u8> = (0..3 * 3 * 3).map(|i| (i * 11 % 256) as u8).collect();
        let img = ImageBuffer::new(3, 3, 3, data).unwrap();
        save_image(&img, &path).unwrap();
        assert_eq!(load_image(&path).unwrap(), img);

        let gray_path = dir.path().join("rt.pgm");
        let gray = ImageBuffer::new(3, 2, 1, vec![0, 10, 100, 200, 255, 42]).unwrap();
        save_image(&gray, &gray_path).unwrap();
        assert_eq!(load_image(&gray_path).unwrap(), gray);
    }

    #[test]
    fn grayscale_png_keeps_one_channel() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gray.png");
        let img = ImageBuffer::new(2, 2, 1, vec![1, 2, 3, 4]).unwrap();
        save_image(&img, &path).unwrap();
        assert_eq!(load_image(&path).unwrap().channels(), 1);
    }

    #[test]
    fn truncated_file_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.png");
        let full = dir.path().join("full.png");
        let img = ImageBuffer::filled_rgb(8, 8, [10, 20, 30]).unwrap();
        save_image(&img, &full).unwrap();
        let bytes = std::fs::read(&full).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_image(&path), Err(Error::Format(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_image("/nonexistent/nope.png"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn unknown_extension_is_format_error() {
        assert!(matches!(load_image("whatever.bmp"), Err(Error::Format(_))));
    }
}
