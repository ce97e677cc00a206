//! Histogram of oriented gradients over a fixed block grid.

use crate::error::{Error, Result};
use crate::imgcore::FloatPlane;

const NORM_EPS: f64 = 1e-6;

/// Unsigned-orientation HOG: central-difference gradients, 0..180 degree
/// bins weighted by magnitude, one histogram per block on a
/// `blocks.0 x blocks.1` grid (x by y), each block L2-normalized.
///
/// Output length is `blocks.0 * blocks.1 * bins` regardless of the input
/// size.
pub fn hog(plane: &FloatPlane, blocks: (usize, usize), bins: usize) -> Result<Vec<f64>> {
    let (bx, by) = blocks;
    if bx == 0 || by == 0 || bins == 0 {
        return Err(Error::Domain("blocks and bins must be positive".into()));
    }
    let w = plane.width();
    let h = plane.height();
    if w < bx || h < by {
        return Err(Error::Dimension(format!(
            "plane {w}x{h} smaller than the {bx}x{by} block grid"
        )));
    }

    let mut hists = vec![0.0f64; bx * by * bins];
    let bin_width = 180.0 / bins as f64;
    for y in 0..h {
        let block_y = y * by / h;
        for x in 0..w {
            let gx = (plane.get_clamped(x as isize + 1, y as isize)
                - plane.get_clamped(x as isize - 1, y as isize))
                / 2.0;
            let gy = (plane.get_clamped(x as isize, y as isize + 1)
                - plane.get_clamped(x as isize, y as isize - 1))
                / 2.0;
            let magnitude = gx.hypot(gy);
            if magnitude == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            if angle >= 180.0 {
                angle -= 180.0;
            }
            let bin = ((angle / bin_width) as usize).min(bins - 1);
            let block_x = x * bx / w;
            hists[(block_y * bx + block_x) * bins + bin] += magnitude;
        }
    }

    for block in hists.chunks_exact_mut(bins) {
        let norm = (block.iter().map(|v| v * v).sum::<f64>() + NORM_EPS * NORM_EPS).sqrt();
        for v in block.iter_mut() {
            *v /= norm;
        }
    }
    Ok(hists)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_plane_gives_zero_vector() {
        let plane = FloatPlane::filled(40, 48, 0.5);
        let v = hog(&plane, (10, 12), 9).unwrap();
        assert_eq!(v.len(), 1080);
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn vertical_step_edge_lands_in_the_zero_degree_bin() {
        // Left half dark, right half bright: gradient points along +x,
        // orientation 0 degrees.
        let mut plane = FloatPlane::zeros(40, 48);
        for y in 0..48 {
            for x in 20..40 {
                plane.set(x, y, 1.0);
            }
        }
        let v = hog(&plane, (10, 12), 9).unwrap();
        let mut per_bin = vec![0.0f64; 9];
        for block in v.chunks_exact(9) {
            for (acc, &x) in per_bin.iter_mut().zip(block) {
                *acc += x;
            }
        }
        let max_bin = per_bin
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(max_bin, 0, "per-bin mass {per_bin:?}");
    }

    #[test]
    fn output_length_is_independent_of_input_size() {
        for (w, h) in [(40, 48), (97, 133), (10, 12)] {
            let plane = FloatPlane::new(
                w,
                h,
                (0..w * h).map(|i| ((i * 29) % 83) as f64).collect(),
            )
            .unwrap();
            assert_eq!(hog(&plane, (10, 12), 9).unwrap().len(), 1080);
        }
    }

    #[test]
    fn too_small_plane_is_dimension_error() {
        let plane = FloatPlane::filled(5, 5, 0.0);
        assert!(matches!(
            hog(&plane, (10, 12), 9),
            Err(Error::Dimension(_))
        ));
    }
}
