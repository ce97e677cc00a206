//! Local binary patterns: circular 8-neighbor codes with bilinear
//! sampling, and the uniform-pattern histograms built on them.

use crate::error::{Error, Result};
use crate::imgcore::FloatPlane;

/// Number of histogram bins: 58 uniform codes plus one shared bin.
pub const ULBP_BINS: usize = 59;

/// Cyclic 0/1 transitions in an 8-bit pattern.
#[inline]
fn transitions(code: u8) -> u32 {
    (code ^ code.rotate_right(1)).count_ones()
}

/// Maps each code to its histogram bin: uniform codes (at most two
/// transitions) get dedicated bins in ascending code order, every other
/// code shares the last bin.
fn ulbp_bin_table() -> [usize; 256] {
    let mut table = [ULBP_BINS - 1; 256];
    let mut next = 0usize;
    for code in 0..=255u8 {
        if transitions(code) <= 2 {
            table[code as usize] = next;
            next += 1;
        }
    }
    debug_assert_eq!(next, ULBP_BINS - 1);
    table
}

/// 8-neighbor LBP code image at radius `r`.
///
/// Neighbor k sits at angle 2*pi*k/8 counter-clockwise from the positive
/// x axis (y up), sampled bilinearly; bit k (least significant first) is
/// set when the neighbor is greater than or equal to the center. The
/// border of width `r` is excluded, so the output shrinks by 2r per axis.
pub fn lbp_code_image(plane: &FloatPlane, r: u32) -> Result<FloatPlane> {
    if !(1..=8).contains(&r) {
        return Err(Error::Domain(format!("lbp radius must be in 1..=8, got {r}")));
    }
    let r_us = r as usize;
    let w = plane.width();
    let h = plane.height();
    if w <= 2 * r_us || h <= 2 * r_us {
        return Err(Error::Dimension(format!(
            "plane {w}x{h} too small for radius {r}"
        )));
    }

    let offsets: Vec<(f64, f64)> = (0..8)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / 8.0;
            // Image y grows downward; counter-clockwise means -sin.
            (r as f64 * theta.cos(), -(r as f64) * theta.sin())
        })
        .collect();

    let ow = w - 2 * r_us;
    let oh = h - 2 * r_us;
    let mut codes = Vec::with_capacity(ow * oh);
    for y in r_us..h - r_us {
        for x in r_us..w - r_us {
            let center = plane.get(x, y);
            let mut code = 0u8;
            for (k, &(dx, dy)) in offsets.iter().enumerate() {
                let v = plane.sample_bilinear(x as f64 + dx, y as f64 + dy);
                if v >= center {
                    code |= 1 << k;
                }
            }
            codes.push(code as f64);
        }
    }
    FloatPlane::new(ow, oh, codes)
}

fn histogram_59(codes: impl Iterator<Item = u8>, table: &[usize; 256]) -> Vec<f64> {
    let mut hist = vec![0.0f64; ULBP_BINS];
    let mut count = 0usize;
    for code in codes {
        hist[table[code as usize]] += 1.0;
        count += 1;
    }
    if count > 0 {
        for v in hist.iter_mut() {
            *v /= count as f64;
        }
    }
    hist
}

/// L1-normalized 59-bin uniform-LBP histogram at radius `r`.
pub fn ulbp_hist(plane: &FloatPlane, r: u32) -> Result<Vec<f64>> {
    let codes = lbp_code_image(plane, r)?;
    let table = ulbp_bin_table();
    Ok(histogram_59(codes.data().iter().map(|&c| c as u8), &table))
}

/// Histograms for every radius 1..=8 concatenated (8 x 59 values).
pub fn ulbp_all(plane: &FloatPlane) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(8 * ULBP_BINS);
    for r in 1..=8 {
        out.extend(ulbp_hist(plane, r)?);
    }
    Ok(out)
}

/// Radius-1 code image split into eight horizontal strips, one histogram
/// each (8 x 59 values).
pub fn ulbp_horizontal(plane: &FloatPlane) -> Result<Vec<f64>> {
    let codes = lbp_code_image(plane, 1)?;
    let h = codes.height();
    if h < 8 {
        return Err(Error::Dimension(format!(
            "code image height {h} cannot be split into 8 strips"
        )));
    }
    let table = ulbp_bin_table();
    let w = codes.width();
    let mut out = Vec::with_capacity(8 * ULBP_BINS);
    for strip in 0..8 {
        let y0 = strip * h / 8;
        let y1 = (strip + 1) * h / 8;
        let codes_iter = (y0..y1)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| codes.get(x, y) as u8);
        out.extend(histogram_59(codes_iter, &table));
    }
    Ok(out)
}

/// Bin index of a code in the 59-bin layout, for tests and callers that
/// need to address a specific pattern.
pub fn bin_of_code(code: u8) -> usize {
    ulbp_bin_table()[code as usize]
}
