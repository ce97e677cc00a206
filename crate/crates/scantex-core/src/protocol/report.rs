//! Report artifacts: DET curve CSVs, run summaries, metadata JSON, and
//! self-contained SVG plots on probit axes.

use std::path::Path;

use crate::error::{Error, Result};
use crate::evalmetrics::DetCurve;

/// Inverse standard normal CDF (Acklam's rational approximation, about
/// 1e-9 absolute error), used for the probit axes of DET plots.
pub fn probit(p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p) && p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Writes a DET curve as `threshold,macer,bpcer` rows; floats use the
/// shortest round-trip representation so reloading is exact.
pub fn write_det_csv(curve: &DetCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("threshold,macer,bpcer\n");
    for (t, m, b) in &curve.points {
        out.push_str(&format!("{t},{m},{b}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a CSV written by [`write_det_csv`].
pub fn read_det_csv(path: impl AsRef<Path>) -> Result<DetCurve> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut points = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| Error::Parse {
                line: idx + 1,
                msg: e.to_string(),
            })
        };
        points.push((parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
    }
    Ok(DetCurve { points })
}

const PLOT_COLORS: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#843c39",
];

/// Renders one or more labeled DET curves into a self-contained SVG with
/// probit axes and log-spaced tick labels.
pub fn det_svg(curves: &[(String, &DetCurve)]) -> String {
    let (width, height) = (640.0f64, 560.0f64);
    let margin = 70.0f64;
    let plot_w = width - 2.0 * margin;
    let plot_h = height - 2.0 * margin;
    let p_min = 0.001;
    let p_max = 0.6;
    let lo = probit(p_min);
    let hi = probit(p_max);
    let to_x = |p: f64| margin + (probit(p.clamp(p_min, p_max)) - lo) / (hi - lo) * plot_w;
    let to_y = |p: f64| height - margin - (probit(p.clamp(p_min, p_max)) - lo) / (hi - lo) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    let ticks = [0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.4];
    for &t in &ticks {
        let x = to_x(t);
        let y = to_y(t);
        svg.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{m}\" x2=\"{x:.1}\" y2=\"{b}\" stroke=\"#dddddd\"/>\n",
            m = margin,
            b = height - margin
        ));
        svg.push_str(&format!(
            "<line x1=\"{m}\" y1=\"{y:.1}\" x2=\"{r}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/>\n",
            m = margin,
            r = width - margin
        ));
        let label = format!("{}%", t * 100.0);
        svg.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{label}</text>\n",
            height - margin + 16.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{y:.1}\" font-size=\"11\" text-anchor=\"end\">{label}</text>\n",
            margin - 6.0
        ));
    }
    svg.push_str(&format!(
        "<rect x=\"{margin}\" y=\"{margin}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" stroke=\"black\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\">MACER</text>\n",
        width / 2.0,
        height - 18.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1})\">BPCER</text>\n",
        height / 2.0,
        height / 2.0
    ));

    for (idx, (label, curve)) in curves.iter().enumerate() {
        let color = PLOT_COLORS[idx % PLOT_COLORS.len()];
        let mut points = String::new();
        for &(_, m, b) in &curve.points {
            if !m.is_finite() || !b.is_finite() {
                continue;
            }
            points.push_str(&format!("{:.2},{:.2} ", to_x(m), to_y(b)));
        }
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            points.trim_end()
        ));
        let ly = margin + 16.0 + idx as f64 * 16.0;
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            width - margin - 150.0,
            width - margin - 120.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\">{label}</text>\n",
            width - margin - 112.0,
            ly + 4.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probit_matches_known_quantiles() {
        assert!(probit(0.5).abs() < 1e-9);
        assert!((probit(0.975) - 1.959964).abs() < 1e-5);
        assert!((probit(0.025) + 1.959964).abs() < 1e-5);
        assert!((probit(0.001) + 3.090232).abs() < 1e-5);
    }

    #[test]
    fn det_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("det.csv");
        let curve = DetCurve {
            points: vec![
                (f64::NEG_INFINITY, 0.0, 1.0),
                (0.25, 1.0 / 3.0, 0.5),
                (f64::INFINITY, 1.0, 0.0),
            ],
        };
        write_det_csv(&curve, &path).unwrap();
        let back = read_det_csv(&path).unwrap();
        assert_eq!(back.points.len(), 3);
        for (a, b) in curve.points.iter().zip(&back.points) {
            assert_eq!(a.0.to_bits(), b.0.to_bits());
            assert_eq!(a.1.to_bits(), b.1.to_bits());
            assert_eq!(a.2.to_bits(), b.2.to_bits());
        }
    }

    #[test]
    fn svg_is_self_contained_and_mentions_labels() {
        let curve = DetCurve {
            points: vec![
                (f64::NEG_INFINITY, 0.0, 1.0),
                (0.5, 0.1, 0.2),
                (f64::INFINITY, 1.0, 0.0),
            ],
        };
        let svg = det_svg(&[("dct2".to_string(), &curve)]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("dct2"));
        assert!(svg.contains("MACER"));
        assert!(svg.contains("polyline"));
    }
}
