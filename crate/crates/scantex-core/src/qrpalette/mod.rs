//! Color-palette calibration sheets with QR-encoded color declarations,
//! scanned-sheet segmentation, and print/scan texture isolation.
//!
//! A sheet is a grid of solid color patches, each with a QR symbol to its
//! right declaring the printed tone as zero-padded `RRR,GGG,BBB`. After the
//! sheet went through a printer and scanner, subtracting the declared color
//! from a patch interior leaves the signed residual field that the
//! print/scan hardware added.

mod gf256;
mod qr;
mod rs;

pub use qr::{byte_capacity, qr_decode, qr_encode, render_qr, EcLevel, QrSymbol, QUIET_ZONE_MODULES};
pub use rs::{rs_correct, rs_encode};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{to_grayscale, ImageBuffer, LUMA_WEIGHTS};

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }
}

/// Scan resolution a texture was captured at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dpi {
    #[serde(rename = "300")]
    D300,
    #[serde(rename = "600")]
    D600,
}

impl Dpi {
    pub fn value(&self) -> u32 {
        match self {
            Dpi::D300 => 300,
            Dpi::D600 => 600,
        }
    }

    pub fn from_value(v: u32) -> Result<Self> {
        match v {
            300 => Ok(Dpi::D300),
            600 => Ok(Dpi::D600),
            other => Err(Error::Domain(format!("dpi must be 300 or 600, got {other}"))),
        }
    }
}

/// Paper stock a texture was printed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PaperKind {
    Bond,
    Glossy,
}

/// Signed per-channel residual field isolated from a scanned palette patch.
///
/// Residual values are in 8-bit intensity levels, range [-255, 255],
/// interleaved RGB row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TexturePatch {
    pub width: usize,
    pub height: usize,
    pub residual: Vec<f64>,
    pub declared_color: [u8; 3],
    pub resolution_dpi: Dpi,
    pub paper_kind: PaperKind,
}

impl TexturePatch {
    pub fn new(
        width: usize,
        height: usize,
        residual: Vec<f64>,
        declared_color: [u8; 3],
        resolution_dpi: Dpi,
        paper_kind: PaperKind,
    ) -> Result<Self> {
        if width == 0 || height == 0 || residual.len() != width * height * 3 {
            return Err(Error::Dimension(format!(
                "residual length {} does not match {width}x{height}x3",
                residual.len()
            )));
        }
        if residual.iter().any(|&v| !(-255.0..=255.0).contains(&v)) {
            return Err(Error::Domain(
                "residual values must be within [-255, 255]".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            residual,
            declared_color,
            resolution_dpi,
            paper_kind,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.residual[(y * self.width + x) * 3 + c]
    }

    /// Copy with the per-channel mean subtracted, for texture-only studies.
    pub fn zero_meaned(&self) -> Self {
        let n = (self.width * self.height) as f64;
        let mut means = [0.0f64; 3];
        for px in self.residual.chunks_exact(3) {
            for c in 0..3 {
                means[c] += px[c];
            }
        }
        for m in means.iter_mut() {
            *m /= n;
        }
        let mut residual = self.residual.clone();
        for px in residual.chunks_exact_mut(3) {
            for c in 0..3 {
                px[c] = (px[c] - means[c]).clamp(-255.0, 255.0);
            }
        }
        Self {
            residual,
            ..self.clone()
        }
    }
}

/// Geometry and colors of a palette sheet to render.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaletteSpec {
    /// Ordered patch colors; the QR payload declares each one.
    pub colors: Vec<[u8; 3]>,
    pub patch_w: usize,
    pub patch_h: usize,
    /// Pixels per QR module.
    pub qr_module_px: usize,
    pub rows: usize,
    pub cols: usize,
}

impl PaletteSpec {
    /// Default sheet: `n` low-discrepancy colors, portrait patches on a
    /// five-column grid.
    pub fn with_colors(n: usize) -> Self {
        let cols = 5.min(n.max(1));
        Self {
            colors: default_palette_colors(n),
            patch_w: 120,
            patch_h: 160,
            qr_module_px: 4,
            rows: n.max(1).div_ceil(cols),
            cols,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.colors.is_empty() {
            return Err(Error::Layout("palette has no colors".into()));
        }
        if self.rows * self.cols < self.colors.len() {
            return Err(Error::Layout(format!(
                "{}x{} grid cannot hold {} colors",
                self.rows,
                self.cols,
                self.colors.len()
            )));
        }
        if self.patch_w == 0 || self.patch_h == 0 || self.qr_module_px == 0 {
            return Err(Error::Layout("zero-sized patch or module".into()));
        }
        Ok(())
    }
}

impl Default for PaletteSpec {
    fn default() -> Self {
        Self::with_colors(50)
    }
}

/// Deterministic low-discrepancy sampling of the RGB cube (Halton bases
/// 2/3/5), skipping near-white tones so patches always separate from the
/// sheet background.
pub fn default_palette_colors(n: usize) -> Vec<[u8; 3]> {
    fn halton(index: u64, base: u64) -> f64 {
        let mut f = 1.0;
        let mut r = 0.0;
        let mut i = index;
        while i > 0 {
            f /= base as f64;
            r += f * (i % base) as f64;
            i /= base;
        }
        r
    }
    let mut colors = Vec::with_capacity(n);
    let mut index = 1u64;
    while colors.len() < n {
        let rgb = [
            (halton(index, 2) * 255.0).round() as u8,
            (halton(index, 3) * 255.0).round() as u8,
            (halton(index, 5) * 255.0).round() as u8,
        ];
        index += 1;
        let luma = LUMA_WEIGHTS[0] * rgb[0] as f64
            + LUMA_WEIGHTS[1] * rgb[1] as f64
            + LUMA_WEIGHTS[2] * rgb[2] as f64;
        if luma < 230.0 {
            colors.push(rgb);
        }
    }
    colors
}

/// Placement of one palette cell on the rendered sheet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellLayout {
    pub color: [u8; 3],
    pub patch: Rect,
    /// Bounds of the QR dark modules (quiet zone excluded).
    pub qr: Rect,
}

/// Full sheet layout, written alongside the sheet as JSON by the CLI and
/// accepted as a decoding fallback.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheetLayout {
    pub sheet_w: usize,
    pub sheet_h: usize,
    pub cells: Vec<CellLayout>,
}

const SHEET_MARGIN: usize = 24;
const CELL_SPACING: usize = 48;
const PATCH_QR_GAP: usize = 12;
const MAX_SHEET_SIDE: usize = 30_000;

/// QR payload declaring a color: zero-padded decimal `RRR,GGG,BBB`.
pub fn color_payload(color: [u8; 3]) -> String {
    format!("{:03},{:03},{:03}", color[0], color[1], color[2])
}

/// Parses a declared-color payload.
pub fn parse_color_payload(payload: &str) -> Result<[u8; 3]> {
    let parts: Vec<&str> = payload.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::Format(format!("bad color payload '{payload}'")));
    }
    let mut rgb = [0u8; 3];
    for (v, part) in rgb.iter_mut().zip(parts) {
        *v = part
            .parse::<u16>()
            .ok()
            .filter(|&x| x <= 255)
            .ok_or_else(|| Error::Format(format!("bad color payload '{payload}'")))?
            as u8;
    }
    Ok(rgb)
}

/// Renders the palette sheet: white background, row-major cells of
/// `[patch][gap][QR]`, each QR declaring its patch color.
pub fn render_palette_sheet(spec: &PaletteSpec) -> Result<(ImageBuffer, SheetLayout)> {
    spec.validate()?;

    // All colors share one payload length, so all QR symbols share a version.
    let symbols: Vec<QrSymbol> = spec
        .colors
        .iter()
        .map(|&c| qr_encode(&color_payload(c)))
        .collect::<Result<_>>()?;
    let qr_side_px = symbols[0].side() * spec.qr_module_px;

    let cell_w = spec.patch_w + PATCH_QR_GAP + qr_side_px;
    let cell_h = spec.patch_h.max(qr_side_px);
    let sheet_w = 2 * SHEET_MARGIN + spec.cols * cell_w + (spec.cols - 1) * CELL_SPACING;
    let sheet_h = 2 * SHEET_MARGIN + spec.rows * cell_h + (spec.rows - 1) * CELL_SPACING;
    if sheet_w > MAX_SHEET_SIDE || sheet_h > MAX_SHEET_SIDE {
        return Err(Error::Layout(format!(
            "sheet {sheet_w}x{sheet_h} exceeds the {MAX_SHEET_SIDE} px bound"
        )));
    }
    // The quiet zone must stay clear: cell spacing and the patch gap both
    // leave at least 4 modules of white.
    if CELL_SPACING < 2 * QUIET_ZONE_MODULES * spec.qr_module_px
        || PATCH_QR_GAP + spec.qr_module_px < QUIET_ZONE_MODULES
    {
        return Err(Error::Layout("cells would overlap QR quiet zones".into()));
    }

    let mut img = ImageBuffer::filled_rgb(sheet_w, sheet_h, [255, 255, 255])?;
    let mut cells = Vec::with_capacity(spec.colors.len());

    for (idx, (&color, sym)) in spec.colors.iter().zip(&symbols).enumerate() {
        let row = idx / spec.cols;
        let col = idx % spec.cols;
        let cx = SHEET_MARGIN + col * (cell_w + CELL_SPACING);
        let cy = SHEET_MARGIN + row * (cell_h + CELL_SPACING);

        let patch = Rect::new(cx, cy + (cell_h - spec.patch_h) / 2, spec.patch_w, spec.patch_h);
        for y in patch.y..patch.y + patch.h {
            for x in patch.x..patch.x + patch.w {
                for c in 0..3 {
                    img.set(x, y, c, color[c]);
                }
            }
        }

        let qr = Rect::new(
            cx + spec.patch_w + PATCH_QR_GAP,
            cy + (cell_h - qr_side_px) / 2,
            qr_side_px,
            qr_side_px,
        );
        for my in 0..sym.side() {
            for mx in 0..sym.side() {
                if !sym.get(mx, my) {
                    continue;
                }
                for dy in 0..spec.qr_module_px {
                    for dx in 0..spec.qr_module_px {
                        let x = qr.x + mx * spec.qr_module_px + dx;
                        let y = qr.y + my * spec.qr_module_px + dy;
                        for c in 0..3 {
                            img.set(x, y, c, 0);
                        }
                    }
                }
            }
        }

        cells.push(CellLayout { color, patch, qr });
    }

    Ok((
        img,
        SheetLayout {
            sheet_w,
            sheet_h,
            cells,
        },
    ))
}

/// Tunables for scanned-sheet segmentation.
#[derive(Debug, Clone, Copy)]
pub struct SegmentationParams {
    /// Pixels with luma at or above this value count as background.
    pub bg_threshold: f64,
    /// Chebyshev dilation radius that merges a patch with its QR into one
    /// component while keeping cells apart.
    pub merge_radius: usize,
    /// Minimum fill ratio for the solid-patch side of a cell.
    pub patch_fill_min: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            bg_threshold: 240.0,
            merge_radius: 14,
            patch_fill_min: 0.90,
        }
    }
}

/// Chebyshev (square window) dilation via separable sliding maxima.
fn dilate(mask: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    let mut horiz = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r + 1).min(w);
            horiz[y * w + x] = mask[y * w + lo..y * w + hi].iter().any(|&m| m);
        }
    }
    let mut out = vec![false; w * h];
    for x in 0..w {
        for y in 0..h {
            let lo = y.saturating_sub(r);
            let hi = (y + r + 1).min(h);
            out[y * w + x] = (lo..hi).any(|yy| horiz[yy * w + x]);
        }
    }
    out
}

struct Component {
    min_x: usize,
    min_y: usize,
    max_x: usize,
    max_y: usize,
    count: usize,
}

/// Locates `(patch, qr)` rectangle pairs on a scanned or rendered sheet,
/// ordered row-major.
pub fn locate_patches(scan: &ImageBuffer) -> Result<Vec<(Rect, Rect)>> {
    locate_patches_with(scan, &SegmentationParams::default())
}

pub fn locate_patches_with(
    scan: &ImageBuffer,
    params: &SegmentationParams,
) -> Result<Vec<(Rect, Rect)>> {
    let w = scan.width();
    let h = scan.height();
    let gray = to_grayscale(scan);
    let mask: Vec<bool> = gray.data().iter().map(|&v| v * 255.0 < params.bg_threshold).collect();
    if !mask.iter().any(|&m| m) {
        return Err(Error::Segmentation(
            "no foreground below the background threshold".into(),
        ));
    }

    // Merge each cell (patch + QR) into one component, then split it again
    // on the original mask.
    let merged = dilate(&mask, w, h, params.merge_radius);
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !merged[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if merged[j] && labels[j] == 0 {
                    labels[j] = next;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
    }

    let mut comps: Vec<Component> = (0..next)
        .map(|_| Component {
            min_x: usize::MAX,
            min_y: usize::MAX,
            max_x: 0,
            max_y: 0,
            count: 0,
        })
        .collect();
    for i in 0..w * h {
        if !mask[i] {
            continue;
        }
        let comp = &mut comps[(labels[i] - 1) as usize];
        let (x, y) = (i % w, i / w);
        comp.min_x = comp.min_x.min(x);
        comp.min_y = comp.min_y.min(y);
        comp.max_x = comp.max_x.max(x);
        comp.max_y = comp.max_y.max(y);
        comp.count += 1;
    }
    comps.retain(|c| c.count >= 64); // specks are noise, not cells

    let mut pairs: Vec<(Rect, Rect)> = Vec::new();
    for comp in &comps {
        let bw = comp.max_x - comp.min_x + 1;
        let bh = comp.max_y - comp.min_y + 1;

        // Column occupancy inside the cell bbox on the *original* mask.
        let mut occupied = vec![false; bw];
        for y in comp.min_y..=comp.max_y {
            for x in comp.min_x..=comp.max_x {
                if mask[y * w + x] {
                    occupied[x - comp.min_x] = true;
                }
            }
        }
        // Widest empty column band separates patch from QR.
        let mut best_gap: Option<(usize, usize)> = None; // (start, len)
        let mut run_start = None;
        for x in 0..=bw {
            let empty = x < bw && !occupied[x];
            match (empty, run_start) {
                (true, None) => run_start = Some(x),
                (false, Some(s)) => {
                    let len = x - s;
                    if best_gap.map_or(true, |(_, l)| len > l) {
                        best_gap = Some((s, len));
                    }
                    run_start = None;
                }
                _ => {}
            }
        }
        let Some((gap_start, gap_len)) = best_gap else {
            return Err(Error::Segmentation(format!(
                "cell at ({}, {}) has no patch/QR separation",
                comp.min_x, comp.min_y
            )));
        };
        let split = comp.min_x + gap_start + gap_len / 2;

        let side_bbox = |x_lo: usize, x_hi: usize| -> Option<Rect> {
            let mut min_x = usize::MAX;
            let mut min_y = usize::MAX;
            let mut max_x = 0usize;
            let mut max_y = 0usize;
            let mut count = 0usize;
            for y in comp.min_y..=comp.max_y {
                for x in x_lo..x_hi {
                    if mask[y * w + x] {
                        min_x = min_x.min(x);
                        min_y = min_y.min(y);
                        max_x = max_x.max(x);
                        max_y = max_y.max(y);
                        count += 1;
                    }
                }
            }
            (count > 0).then(|| Rect::new(min_x, min_y, max_x - min_x + 1, max_y - min_y + 1))
        };
        let (Some(left), Some(right)) = (
            side_bbox(comp.min_x, split),
            side_bbox(split, comp.max_x + 1),
        ) else {
            return Err(Error::Segmentation(format!(
                "cell at ({}, {}) split into fewer than two parts",
                comp.min_x, comp.min_y
            )));
        };

        let fill = |r: &Rect| -> f64 {
            let mut count = 0usize;
            for y in r.y..r.y + r.h {
                for x in r.x..r.x + r.w {
                    if mask[y * w + x] {
                        count += 1;
                    }
                }
            }
            count as f64 / (r.w * r.h) as f64
        };
        let (lf, rf) = (fill(&left), fill(&right));
        let (patch, qr) = match (lf >= params.patch_fill_min, rf >= params.patch_fill_min) {
            (true, false) => (left, right),
            (false, true) => (right, left),
            _ => {
                return Err(Error::Segmentation(format!(
                    "cell at ({}, {}) is ambiguous (fill ratios {lf:.2}/{rf:.2})",
                    comp.min_x, comp.min_y
                )));
            }
        };
        let _ = bh;
        pairs.push((patch, qr));
    }

    if pairs.is_empty() {
        return Err(Error::Segmentation("no cells found".into()));
    }

    // Row-major ordering: group rows by patch center with half-height
    // tolerance, then sort by x.
    let median_h = {
        let mut hs: Vec<usize> = pairs.iter().map(|(p, _)| p.h).collect();
        hs.sort_unstable();
        hs[hs.len() / 2]
    };
    pairs.sort_by_key(|(p, _)| p.y + p.h / 2);
    let mut rows: Vec<Vec<(Rect, Rect)>> = Vec::new();
    let mut row_cy = 0usize;
    for pair in pairs {
        let cy = pair.0.y + pair.0.h / 2;
        if rows.is_empty() || cy > row_cy + median_h / 2 {
            rows.push(vec![pair]);
            row_cy = cy;
        } else {
            rows.last_mut().unwrap().push(pair);
        }
    }
    let mut ordered = Vec::new();
    for mut row in rows {
        row.sort_by_key(|(p, _)| p.x);
        ordered.extend(row);
    }
    Ok(ordered)
}

/// Subtracts the declared color from a patch interior (after eroding
/// `margin_frac` per side), leaving the print/scan residual.
///
/// The residual keeps the mean color shift; see
/// [`TexturePatch::zero_meaned`] for the centered variant.
pub fn isolate_texture(
    scan: &ImageBuffer,
    patch: Rect,
    declared: [u8; 3],
    margin_frac: f64,
) -> Result<TexturePatch> {
    if !(0.0..=0.5).contains(&margin_frac) {
        return Err(Error::Domain(format!(
            "margin_frac must be in [0, 0.5], got {margin_frac}"
        )));
    }
    if patch.x + patch.w > scan.width() || patch.y + patch.h > scan.height() {
        return Err(Error::Dimension("patch rectangle exceeds the scan".into()));
    }
    let mx = (patch.w as f64 * margin_frac).round() as usize;
    let my = (patch.h as f64 * margin_frac).round() as usize;
    if patch.w <= 2 * mx || patch.h <= 2 * my {
        return Err(Error::Dimension(format!(
            "margin {margin_frac} leaves no interior in a {}x{} patch",
            patch.w, patch.h
        )));
    }
    let iw = patch.w - 2 * mx;
    let ih = patch.h - 2 * my;
    let mut residual = Vec::with_capacity(iw * ih * 3);
    for y in 0..ih {
        for x in 0..iw {
            let sx = patch.x + mx + x;
            let sy = patch.y + my + y;
            for c in 0..3 {
                let v = if scan.channels() == 3 {
                    scan.get(sx, sy, c)
                } else {
                    scan.get(sx, sy, 0)
                };
                residual.push(v as f64 - declared[c] as f64);
            }
        }
    }
    TexturePatch::new(iw, ih, residual, declared, Dpi::D600, PaperKind::Glossy)
}

/// Fixed 16-bit encoding of residual values: stored = offset + value*scale.
pub const TEXTURE_OFFSET: u32 = 32768;
pub const TEXTURE_SCALE: u32 = 64;

#[derive(Debug, Serialize, Deserialize)]
struct TextureSidecar {
    declared: [u8; 3],
    dpi: u32,
    paper: PaperKind,
    offset: u32,
    scale: u32,
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("json")
}

/// Writes a texture as a 16-bit RGB PNG plus a JSON sidecar; the round
/// trip is exact to 1/64 intensity level.
pub fn save_texture(texture: &TexturePatch, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut raw = Vec::with_capacity(texture.width * texture.height * 3);
    for &v in &texture.residual {
        let stored = (TEXTURE_OFFSET as f64 + v * TEXTURE_SCALE as f64).round();
        raw.push(stored.clamp(0.0, 65535.0) as u16);
    }
    let img = image::ImageBuffer::<image::Rgb<u16>, Vec<u16>>::from_raw(
        texture.width as u32,
        texture.height as u32,
        raw,
    )
    .expect("length checked by TexturePatch");
    image::DynamicImage::ImageRgb16(img)
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;

    let sidecar = TextureSidecar {
        declared: texture.declared_color,
        dpi: texture.resolution_dpi.value(),
        paper: texture.paper_kind,
        offset: TEXTURE_OFFSET,
        scale: TEXTURE_SCALE,
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    std::fs::write(sidecar_path(path), json).map_err(|e| Error::io(path, e))
}

/// Reads a texture written by [`save_texture`]; a missing sidecar is a
/// format error.
pub fn load_texture(path: impl AsRef<Path>) -> Result<TexturePatch> {
    let path = path.as_ref();
    let sidecar_file = sidecar_path(path);
    let sidecar_text = std::fs::read_to_string(&sidecar_file).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::Format(format!("missing sidecar {}", sidecar_file.display()))
        } else {
            Error::io(&sidecar_file, e)
        }
    })?;
    let sidecar: TextureSidecar = serde_json::from_str(&sidecar_text)
        .map_err(|e| Error::Format(format!("bad sidecar {}: {e}", sidecar_file.display())))?;
    if sidecar.scale == 0 {
        return Err(Error::Format("sidecar scale must be positive".into()));
    }

    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let dyn_img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let image::DynamicImage::ImageRgb16(img) = dyn_img else {
        return Err(Error::Format(format!(
            "{} is not a 16-bit RGB PNG",
            path.display()
        )));
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let residual: Vec<f64> = img
        .into_raw()
        .iter()
        .map(|&v| (v as f64 - sidecar.offset as f64) / sidecar.scale as f64)
        .collect();
    TexturePatch::new(
        w,
        h,
        residual,
        sidecar.declared,
        Dpi::from_value(sidecar.dpi)?,
        sidecar.paper,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_palette_is_distinct_and_not_near_white() {
        let colors = default_palette_colors(50);
        assert_eq!(colors.len(), 50);
        let mut unique = colors.clone();
        unique.sort_unstable();
        unique.dedup();
        assert_eq!(unique.len(), 50, "palette colors must be distinct");
        for c in colors {
            let luma = 0.299 * c[0] as f64 + 0.587 * c[1] as f64 + 0.114 * c[2] as f64;
            assert!(luma < 230.0);
        }
    }

    #[test]
    fn one_color_sheet_has_exact_patch_interior() {
        let spec = PaletteSpec {
            colors: vec![[200, 30, 60]],
            ..PaletteSpec::with_colors(1)
        };
        let (img, layout) = render_palette_sheet(&spec).unwrap();
        assert_eq!(layout.cells.len(), 1);
        let patch = layout.cells[0].patch;
        for y in patch.y..patch.y + patch.h {
            for x in patch.x..patch.x + patch.w {
                assert_eq!(
                    [img.get(x, y, 0), img.get(x, y, 1), img.get(x, y, 2)],
                    [200, 30, 60]
                );
            }
        }
    }

    #[test]
    fn located_rectangles_match_generated_layout() {
        let spec = PaletteSpec {
            colors: default_palette_colors(6),
            rows: 2,
            cols: 3,
            ..PaletteSpec::with_colors(6)
        };
        let (img, layout) = render_palette_sheet(&spec).unwrap();
        let pairs = locate_patches(&img).unwrap();
        assert_eq!(pairs.len(), 6);
        for (found, cell) in pairs.iter().zip(&layout.cells) {
            assert_eq!(found.0, cell.patch, "patch rect must be pixel-exact");
            assert_eq!(found.1, cell.qr, "qr rect must be pixel-exact");
        }
    }

    #[test]
    fn all_white_sheet_is_segmentation_error() {
        let img = ImageBuffer::filled_rgb(200, 100, [255, 255, 255]).unwrap();
        assert!(matches!(
            locate_patches(&img),
            Err(Error::Segmentation(_))
        ));
    }

    #[test]
    fn overfull_grid_is_layout_error() {
        let spec = PaletteSpec {
            colors: default_palette_colors(7),
            rows: 2,
            cols: 3,
            ..PaletteSpec::with_colors(7)
        };
        assert!(matches!(
            render_palette_sheet(&spec),
            Err(Error::Layout(_))
        ));
    }

    #[test]
    fn isolate_exact_color_gives_zero_residual() {
        let img = ImageBuffer::filled_rgb(40, 50, [77, 120, 9]).unwrap();
        let t = isolate_texture(&img, Rect::new(0, 0, 40, 50), [77, 120, 9], 0.05).unwrap();
        assert!(t.residual.iter().all(|&v| v == 0.0));
        // 40*0.05 = 2 and 50*0.05 = 2.5 rounds half away from zero to 3.
        assert_eq!((t.width, t.height), (36, 44));
    }

    #[test]
    fn isolate_shifted_red_channel() {
        let img = ImageBuffer::filled_rgb(20, 20, [105, 100, 100]).unwrap();
        let t = isolate_texture(&img, Rect::new(0, 0, 20, 20), [100, 100, 100], 0.0).unwrap();
        for px in t.residual.chunks_exact(3) {
            assert_eq!([px[0], px[1], px[2]], [5.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn isolate_is_linear_in_the_scan() {
        let base = ImageBuffer::filled_rgb(16, 16, [100, 110, 120]).unwrap();
        let shifted = ImageBuffer::filled_rgb(16, 16, [103, 113, 123]).unwrap();
        let rect = Rect::new(0, 0, 16, 16);
        let t0 = isolate_texture(&base, rect, [90, 90, 90], 0.0).unwrap();
        let t1 = isolate_texture(&shifted, rect, [90, 90, 90], 0.0).unwrap();
        for (a, b) in t0.residual.iter().zip(&t1.residual) {
            assert!((b - a - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_margin_is_dimension_error() {
        let img = ImageBuffer::filled_rgb(10, 10, [50, 50, 50]).unwrap();
        assert!(matches!(
            isolate_texture(&img, Rect::new(0, 0, 10, 10), [50, 50, 50], 0.5),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn texture_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tex.png");
        let mut residual = Vec::new();
        for i in 0..6 * 4 * 3 {
            residual.push(((i * 37) % 511) as f64 - 255.0);
        }
        let t = TexturePatch::new(6, 4, residual, [10, 20, 30], Dpi::D300, PaperKind::Bond)
            .unwrap();
        save_texture(&t, &path).unwrap();
        let back = load_texture(&path).unwrap();
        assert_eq!(back.declared_color, [10, 20, 30]);
        assert_eq!(back.resolution_dpi, Dpi::D300);
        assert_eq!(back.paper_kind, PaperKind::Bond);
        for (a, b) in t.residual.iter().zip(&back.residual) {
            assert!((a - b).abs() <= 1.0 / TEXTURE_SCALE as f64 + 1e-12);
        }
    }

    #[test]
    fn zero_residual_saves_to_offset_planes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zero.png");
        let t = TexturePatch::new(
            3,
            3,
            vec![0.0; 27],
            [1, 2, 3],
            Dpi::D600,
            PaperKind::Glossy,
        )
        .unwrap();
        save_texture(&t, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let decoded = image::load_from_memory(&bytes).unwrap();
        let image::DynamicImage::ImageRgb16(img) = decoded else {
            panic!("expected 16-bit RGB");
        };
        assert!(img.into_raw().iter().all(|&v| v == TEXTURE_OFFSET as u16));
    }

    #[test]
    fn missing_sidecar_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("orphan.png");
        let t =
            TexturePatch::new(2, 2, vec![0.0; 12], [0, 0, 0], Dpi::D600, PaperKind::Glossy)
                .unwrap();
        save_texture(&t, &path).unwrap();
        std::fs::remove_file(path.with_extension("json")).unwrap();
        assert!(matches!(load_texture(&path), Err(Error::Format(_))));
    }

    #[test]
    fn rendered_sheet_qrs_decode_to_their_colors() {
        let spec = PaletteSpec {
            colors: default_palette_colors(4),
            rows: 2,
            cols: 2,
            ..PaletteSpec::with_colors(4)
        };
        let (img, layout) = render_palette_sheet(&spec).unwrap();
        for cell in &layout.cells {
            let payload = qr_decode(&img, cell.qr).unwrap();
            assert_eq!(parse_color_payload(&payload).unwrap(), cell.color);
        }
    }
}
