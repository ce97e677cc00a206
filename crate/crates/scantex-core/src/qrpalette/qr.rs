//! Byte-mode QR symbols, versions 1-3, generated at error-correction
//! level L; decoding assumes an axis-aligned symbol as produced by a
//! flatbed scan (skew up to roughly 2 degrees).

use super::rs::{rs_correct, rs_encode};
use super::Rect;
use crate::error::{Error, Result};
use crate::imgcore::{to_grayscale, ImageBuffer};

/// Error-correction level; sheets are always generated at L.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcLevel {
    L,
    M,
    Q,
    H,
}

impl EcLevel {
    /// Two-bit field used in the format information.
    fn format_bits(self) -> u32 {
        match self {
            EcLevel::L => 1,
            EcLevel::M => 0,
            EcLevel::Q => 3,
            EcLevel::H => 2,
        }
    }

    fn from_format_bits(bits: u32) -> Self {
        match bits & 3 {
            1 => EcLevel::L,
            0 => EcLevel::M,
            3 => EcLevel::Q,
            _ => EcLevel::H,
        }
    }
}

/// (blocks, ec codewords per block) for versions 1-3; single-block layouts
/// only are decodable here, which covers everything this crate emits.
fn ec_layout(version: u8, ec: EcLevel) -> (usize, usize) {
    match (version, ec) {
        (1, EcLevel::L) => (1, 7),
        (1, EcLevel::M) => (1, 10),
        (1, EcLevel::Q) => (1, 13),
        (1, EcLevel::H) => (1, 17),
        (2, EcLevel::L) => (1, 10),
        (2, EcLevel::M) => (1, 16),
        (2, EcLevel::Q) => (1, 22),
        (2, EcLevel::H) => (1, 28),
        (3, EcLevel::L) => (1, 15),
        (3, EcLevel::M) => (1, 26),
        (3, EcLevel::Q) => (2, 18),
        (3, EcLevel::H) => (2, 22),
        _ => unreachable!("version checked to be 1..=3"),
    }
}

fn total_codewords(version: u8) -> usize {
    match version {
        1 => 26,
        2 => 44,
        3 => 70,
        _ => unreachable!(),
    }
}

fn data_codewords(version: u8, ec: EcLevel) -> usize {
    let (blocks, per_block) = ec_layout(version, ec);
    total_codewords(version) - blocks * per_block
}

/// Maximum byte-mode payload length for a version at EC level L.
pub fn byte_capacity(version: u8) -> usize {
    // 4-bit mode + 8-bit count leave data_codewords - 2 whole bytes.
    data_codewords(version, EcLevel::L) - 2
}

/// A rendered-or-decoded QR symbol: square boolean module matrix, `true`
/// meaning dark.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QrSymbol {
    version: u8,
    ec_level: EcLevel,
    side: usize,
    modules: Vec<bool>,
}

impl QrSymbol {
    pub fn version(&self) -> u8 {
        self.version
    }

    pub fn ec_level(&self) -> EcLevel {
        self.ec_level
    }

    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.modules[y * self.side + x]
    }

    #[inline]
    fn set(&mut self, x: usize, y: usize, dark: bool) {
        self.modules[y * self.side + x] = dark;
    }
}

/// Alignment pattern center coordinates per version.
fn alignment_centers(version: u8) -> &'static [usize] {
    match version {
        1 => &[],
        2 => &[6, 18],
        3 => &[6, 22],
        _ => unreachable!(),
    }
}

/// Marks every function module (finders, separators, timing, alignment,
/// format areas, dark module) in a side x side grid.
fn function_mask(version: u8) -> Vec<bool> {
    let side = 17 + 4 * version as usize;
    let mut f = vec![false; side * side];
    let mut mark = |x: usize, y: usize| f[y * side + x] = true;

    // Finder patterns with separators plus the adjacent format strips:
    // 9x9 at top-left, 8x9 top-right, 9x8 bottom-left.
    for y in 0..9 {
        for x in 0..9 {
            mark(x, y);
        }
    }
    for y in 0..9 {
        for x in side - 8..side {
            mark(x, y);
        }
    }
    for y in side - 8..side {
        for x in 0..9 {
            mark(x, y);
        }
    }
    // Timing patterns.
    for i in 0..side {
        mark(6, i);
        mark(i, 6);
    }
    // Alignment patterns (skip any overlapping a finder).
    let centers = alignment_centers(version);
    for &cy in centers {
        for &cx in centers {
            let in_finder = (cx < 9 && cy < 9) || (cx >= side - 9 && cy < 9) || (cx < 9 && cy >= side - 9);
            if in_finder {
                continue;
            }
            for dy in -2i32..=2 {
                for dx in -2i32..=2 {
                    mark((cx as i32 + dx) as usize, (cy as i32 + dy) as usize);
                }
            }
        }
    }
    f
}

/// Draws the fixed dark/light structure of the function modules (without
/// format bits).
fn draw_function_patterns(sym: &mut QrSymbol) {
    let side = sym.side;
    // 7x7 finder: dark border, light ring, dark 3x3 core, light separator.
    let finder = |sym: &mut QrSymbol, ox: i32, oy: i32| {
        for dy in -1i32..=7 {
            for dx in -1i32..=7 {
                let x = ox + dx;
                let y = oy + dy;
                if x < 0 || y < 0 || x >= side as i32 || y >= side as i32 {
                    continue;
                }
                let inside = (0..7).contains(&dx) && (0..7).contains(&dy);
                let dark = inside && {
                    let r = dx.min(6 - dx).min(dy).min(6 - dy);
                    r == 0 || r >= 2
                };
                sym.set(x as usize, y as usize, dark);
            }
        }
    };
    finder(sym, 0, 0);
    finder(sym, side as i32 - 7, 0);
    finder(sym, 0, side as i32 - 7);

    // Timing patterns.
    for i in 8..side - 8 {
        let dark = i % 2 == 0;
        sym.set(6, i, dark);
        sym.set(i, 6, dark);
    }

    // Alignment patterns: 5x5 with dark border, light ring, dark center.
    let centers = alignment_centers(sym.version);
    for &cy in centers {
        for &cx in centers {
            let in_finder = (cx < 9 && cy < 9) || (cx >= side - 9 && cy < 9) || (cx < 9 && cy >= side - 9);
            if in_finder {
                continue;
            }
            for dy in -2i32..=2 {
                for dx in -2i32..=2 {
                    let r = dx.abs().max(dy.abs());
                    sym.set(
                        (cx as i32 + dx) as usize,
                        (cy as i32 + dy) as usize,
                        r != 1,
                    );
                }
            }
        }
    }

    // Dark module.
    sym.set(8, side - 8, true);
}

/// BCH(15,5)-protected format sequence for (level, mask), already XORed
/// with the standard mask pattern.
fn format_sequence(ec: EcLevel, mask: u8) -> u32 {
    let data = (ec.format_bits() << 3) | u32::from(mask);
    let mut rem = data;
    for _ in 0..10 {
        rem = (rem << 1) ^ ((rem >> 9) * 0x537);
    }
    ((data << 10) | rem) ^ 0x5412
}

fn draw_format_bits(sym: &mut QrSymbol, mask: u8) {
    let bits = format_sequence(sym.ec_level, mask);
    let side = sym.side;
    let bit = |i: u32| (bits >> i) & 1 != 0;
    // First copy around the top-left finder.
    for i in 0..6 {
        sym.set(8, i as usize, bit(i));
    }
    sym.set(8, 7, bit(6));
    sym.set(8, 8, bit(7));
    sym.set(7, 8, bit(8));
    for i in 9..15u32 {
        sym.set((14 - i) as usize, 8, bit(i));
    }
    // Second copy split between the other two finders.
    for i in 0..8u32 {
        sym.set(side - 1 - i as usize, 8, bit(i));
    }
    for i in 8..15u32 {
        sym.set(8, side - 15 + i as usize, bit(i));
    }
}

#[inline]
fn mask_bit(mask: u8, x: usize, y: usize) -> bool {
    match mask {
        0 => (x + y) % 2 == 0,
        1 => y % 2 == 0,
        2 => x % 3 == 0,
        3 => (x + y) % 3 == 0,
        4 => (y / 2 + x / 3) % 2 == 0,
        5 => (x * y) % 2 + (x * y) % 3 == 0,
        6 => ((x * y) % 2 + (x * y) % 3) % 2 == 0,
        7 => (((x + y) % 2) + (x * y) % 3) % 2 == 0,
        _ => unreachable!(),
    }
}

/// Standard penalty score: rows/columns runs, 2x2 blocks, finder-like
/// patterns, and dark-module balance.
fn penalty_score(sym: &QrSymbol) -> i64 {
    let side = sym.side;
    let mut score = 0i64;

    // N1: runs of length >= 5 in rows and columns.
    for y in 0..side {
        let mut run = 1;
        for x in 1..side {
            if sym.get(x, y) == sym.get(x - 1, y) {
                run += 1;
            } else {
                if run >= 5 {
                    score += 3 + (run - 5) as i64;
                }
                run = 1;
            }
        }
        if run >= 5 {
            score += 3 + (run - 5) as i64;
        }
    }
    for x in 0..side {
        let mut run = 1;
        for y in 1..side {
            if sym.get(x, y) == sym.get(x, y - 1) {
                run += 1;
            } else {
                if run >= 5 {
                    score += 3 + (run - 5) as i64;
                }
                run = 1;
            }
        }
        if run >= 5 {
            score += 3 + (run - 5) as i64;
        }
    }

    // N2: 2x2 same-colored blocks.
    for y in 0..side - 1 {
        for x in 0..side - 1 {
            let v = sym.get(x, y);
            if v == sym.get(x + 1, y) && v == sym.get(x, y + 1) && v == sym.get(x + 1, y + 1) {
                score += 3;
            }
        }
    }

    // N3: finder-like pattern 1011101 with 4 light modules on a side.
    let pattern = [true, false, true, true, true, false, true];
    let check_line = |get: &dyn Fn(usize) -> bool, len: usize| -> i64 {
        let mut s = 0i64;
        for start in 0..len.saturating_sub(6) {
            if (0..7).all(|i| get(start + i) == pattern[i]) {
                let light_before =
                    start >= 4 && (start - 4..start).all(|i| !get(i));
                let light_after =
                    start + 11 <= len && (start + 7..start + 11).all(|i| !get(i));
                if light_before || light_after {
                    s += 40;
                }
            }
        }
        s
    };
    for y in 0..side {
        score += check_line(&|x| sym.get(x, y), side);
    }
    for x in 0..side {
        score += check_line(&|y| sym.get(x, y), side);
    }

    // N4: balance.
    let dark = sym.modules.iter().filter(|&&m| m).count() as i64;
    let total = (side * side) as i64;
    let percent = dark * 100 / total;
    let k = ((percent - 50).abs() / 5).max(((percent + 4 - 50).abs() / 5) - 1).max(0);
    score += 10 * k;
    score
}

/// Zig-zag order of data module coordinates.
fn data_module_order(side: usize, is_function: &[bool]) -> Vec<(usize, usize)> {
    let mut coords = Vec::new();
    let mut right = side as i32 - 1;
    while right >= 1 {
        if right == 6 {
            right = 5;
        }
        for vert in 0..side {
            for j in 0..2 {
                let x = (right - j) as usize;
                let upward = (right + 1) & 2 == 0;
                let y = if upward { side - 1 - vert } else { vert };
                if !is_function[y * side + x] {
                    coords.push((x, y));
                }
            }
        }
        right -= 2;
    }
    coords
}

/// Encodes an ASCII payload as a byte-mode symbol at EC level L, choosing
/// the smallest version that fits and the mask with the lowest penalty.
pub fn qr_encode(payload: &str) -> Result<QrSymbol> {
    if !payload.is_ascii() {
        return Err(Error::Domain("payload must be ASCII".into()));
    }
    let bytes = payload.as_bytes();
    let version = (1..=3u8)
        .find(|&v| bytes.len() <= byte_capacity(v))
        .ok_or_else(|| {
            Error::Domain(format!(
                "payload of {} bytes exceeds version-3 capacity {}",
                bytes.len(),
                byte_capacity(3)
            ))
        })?;
    let ec_level = EcLevel::L;
    let dc = data_codewords(version, ec_level);
    let (_, ec_per_block) = ec_layout(version, ec_level);

    // Bit stream: mode 0100, 8-bit count, payload, terminator, pad bytes.
    let mut bits: Vec<bool> = Vec::with_capacity(dc * 8);
    let push_bits = |bits: &mut Vec<bool>, value: u32, n: u32| {
        for i in (0..n).rev() {
            bits.push((value >> i) & 1 != 0);
        }
    };
    push_bits(&mut bits, 0b0100, 4);
    push_bits(&mut bits, bytes.len() as u32, 8);
    for &b in bytes {
        push_bits(&mut bits, u32::from(b), 8);
    }
    let capacity_bits = dc * 8;
    let terminator = (capacity_bits - bits.len()).min(4);
    push_bits(&mut bits, 0, terminator as u32);
    while bits.len() % 8 != 0 {
        bits.push(false);
    }
    let mut data: Vec<u8> = bits
        .chunks(8)
        .map(|c| c.iter().fold(0u8, |acc, &b| (acc << 1) | u8::from(b)))
        .collect();
    for &pad in [0xECu8, 0x11].iter().cycle() {
        if data.len() >= dc {
            break;
        }
        data.push(pad);
    }

    let codewords = rs_encode(&data, ec_per_block)?;

    // Lay out the matrix.
    let side = 17 + 4 * version as usize;
    let mut sym = QrSymbol {
        version,
        ec_level,
        side,
        modules: vec![false; side * side],
    };
    draw_function_patterns(&mut sym);
    let is_function = function_mask(version);
    let order = data_module_order(side, &is_function);
    debug_assert!(order.len() >= codewords.len() * 8);
    for (i, &(x, y)) in order.iter().enumerate() {
        let dark = if i < codewords.len() * 8 {
            (codewords[i / 8] >> (7 - (i % 8))) & 1 != 0
        } else {
            false // remainder bits
        };
        sym.set(x, y, dark);
    }

    // Pick the mask with the lowest penalty (ties to the lowest index).
    let mut best_mask = 0u8;
    let mut best_score = i64::MAX;
    for mask in 0..8u8 {
        let mut candidate = sym.clone();
        for (i, &f) in is_function.iter().enumerate() {
            if !f && mask_bit(mask, i % side, i / side) {
                candidate.modules[i] = !candidate.modules[i];
            }
        }
        draw_format_bits(&mut candidate, mask);
        let score = penalty_score(&candidate);
        if score < best_score {
            best_score = score;
            best_mask = mask;
        }
    }
    for (i, &f) in is_function.iter().enumerate() {
        if !f && mask_bit(best_mask, i % side, i / side) {
            sym.modules[i] = !sym.modules[i];
        }
    }
    draw_format_bits(&mut sym, best_mask);
    Ok(sym)
}

/// Number of quiet-zone modules rendered around a symbol.
pub const QUIET_ZONE_MODULES: usize = 4;

/// Rasterizes a symbol as a grayscale image (dark = 0, light = 255) with a
/// quiet zone.
pub fn render_qr(sym: &QrSymbol, module_px: usize) -> Result<ImageBuffer> {
    if module_px == 0 {
        return Err(Error::Domain("module_px must be positive".into()));
    }
    let total = sym.side + 2 * QUIET_ZONE_MODULES;
    let px = total * module_px;
    let mut data = vec![255u8; px * px];
    for my in 0..sym.side {
        for mx in 0..sym.side {
            if sym.get(mx, my) {
                let ox = (mx + QUIET_ZONE_MODULES) * module_px;
                let oy = (my + QUIET_ZONE_MODULES) * module_px;
                for y in 0..module_px {
                    let row = (oy + y) * px + ox;
                    data[row..row + module_px].fill(0);
                }
            }
        }
    }
    ImageBuffer::new(px, px, 1, data)
}

struct FinderCandidate {
    x: f64,
    y: f64,
    module_px: f64,
    hits: usize,
}

/// Scans one line of thresholded values for 1:1:3:1:1 dark runs, returning
/// (center, module width) pairs.
fn scan_line_for_finders(dark: &[bool]) -> Vec<(f64, f64)> {
    let mut runs: Vec<(bool, usize, usize)> = Vec::new(); // (dark, start, len)
    let mut start = 0usize;
    for i in 1..=dark.len() {
        if i == dark.len() || dark[i] != dark[start] {
            runs.push((dark[start], start, i - start));
            start = i;
        }
    }
    let mut found = Vec::new();
    for w in runs.windows(5) {
        if !w[0].0 || w[1].0 || !w[2].0 || w[3].0 || !w[4].0 {
            continue;
        }
        let lens: Vec<f64> = w.iter().map(|r| r.2 as f64).collect();
        let module = (lens[0] + lens[1] + lens[2] + lens[3] + lens[4]) / 7.0;
        if module < 1.0 {
            continue;
        }
        let ok = (lens[0] - module).abs() < module * 0.75
            && (lens[1] - module).abs() < module * 0.75
            && (lens[2] - 3.0 * module).abs() < module * 1.0
            && (lens[3] - module).abs() < module * 0.75
            && (lens[4] - module).abs() < module * 0.75;
        if ok {
            let center = w[2].1 as f64 + lens[2] / 2.0;
            found.push((center, module));
        }
    }
    found
}

/// Decodes an axis-aligned symbol inside `region`, returning the byte-mode
/// payload.
pub fn qr_decode(img: &ImageBuffer, region: Rect) -> Result<String> {
    let pad = 4usize;
    let x0 = region.x.saturating_sub(pad);
    let y0 = region.y.saturating_sub(pad);
    let x1 = (region.x + region.w + pad).min(img.width());
    let y1 = (region.y + region.h + pad).min(img.height());
    if x1 <= x0 || y1 <= y0 {
        return Err(Error::NotFound("empty decode region".into()));
    }
    let w = x1 - x0;
    let h = y1 - y0;

    let gray = to_grayscale(img);
    let mut luma = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            luma[y * w + x] = gray.get(x0 + x, y0 + y) * 255.0;
        }
    }
    let (lo, hi) = luma
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), &v| {
            (l.min(v), u.max(v))
        });
    if hi - lo < 32.0 {
        return Err(Error::NotFound("region has no contrast".into()));
    }
    let threshold = (lo + hi) / 2.0;
    let dark: Vec<bool> = luma.iter().map(|&v| v < threshold).collect();

    // Horizontal scan for candidates, vertical verification.
    let mut candidates: Vec<FinderCandidate> = Vec::new();
    for y in 0..h {
        let row = &dark[y * w..(y + 1) * w];
        for (cx, module) in scan_line_for_finders(row) {
            let col: Vec<bool> = (0..h).map(|yy| dark[yy * w + cx as usize]).collect();
            let vertical = scan_line_for_finders(&col);
            let Some(&(cy, vmod)) = vertical
                .iter()
                .find(|&&(c, _)| (c - y as f64).abs() < 3.5 * module)
            else {
                continue;
            };
            let m = (module + vmod) / 2.0;
            match candidates
                .iter_mut()
                .find(|c| (c.x - cx).abs() < 3.0 * m && (c.y - cy).abs() < 3.0 * m)
            {
                Some(c) => {
                    let n = c.hits as f64;
                    c.x = (c.x * n + cx) / (n + 1.0);
                    c.y = (c.y * n + cy) / (n + 1.0);
                    c.module_px = (c.module_px * n + m) / (n + 1.0);
                    c.hits += 1;
                }
                None => candidates.push(FinderCandidate {
                    x: cx,
                    y: cy,
                    module_px: m,
                    hits: 1,
                }),
            }
        }
    }
    candidates.retain(|c| c.hits >= 2);
    if candidates.len() < 3 {
        return Err(Error::NotFound(format!(
            "expected 3 finder patterns, found {}",
            candidates.len()
        )));
    }
    candidates.sort_by(|a, b| b.hits.cmp(&a.hits));
    candidates.truncate(3);

    // Assign corners: top-left is the corner adjacent to both others along
    // the axes.
    let mut tl = 0;
    let mut best = f64::INFINITY;
    for i in 0..3 {
        let others: Vec<usize> = (0..3).filter(|&j| j != i).collect();
        let (a, b) = (&candidates[others[0]], &candidates[others[1]]);
        let c = &candidates[i];
        // For the true TL, one neighbor shares y and the other shares x.
        let axis_err = ((a.y - c.y).abs().min((a.x - c.x).abs()))
            + ((b.y - c.y).abs().min((b.x - c.x).abs()));
        if axis_err < best {
            best = axis_err;
            tl = i;
        }
    }
    let tl_c = &candidates[tl];
    let rest: Vec<&FinderCandidate> = (0..3).filter(|&j| j != tl).map(|j| &candidates[j]).collect();
    let (tr_c, bl_c) = if (rest[0].x - tl_c.x).abs() > (rest[0].y - tl_c.y).abs() {
        (rest[0], rest[1])
    } else {
        (rest[1], rest[0])
    };
    if tr_c.x <= tl_c.x || bl_c.y <= tl_c.y {
        return Err(Error::NotFound("finder geometry is inconsistent".into()));
    }

    let module_px = (tl_c.module_px + tr_c.module_px + bl_c.module_px) / 3.0;
    let span = ((tr_c.x - tl_c.x).hypot(tr_c.y - tl_c.y)
        + (bl_c.x - tl_c.x).hypot(bl_c.y - tl_c.y))
        / 2.0;
    let side_est = span / module_px + 7.0;
    let version = [1u8, 2, 3]
        .into_iter()
        .min_by(|&a, &b| {
            let sa = (17 + 4 * a as usize) as f64;
            let sb = (17 + 4 * b as usize) as f64;
            (side_est - sa)
                .abs()
                .partial_cmp(&(side_est - sb).abs())
                .unwrap()
        })
        .unwrap();
    let side = 17 + 4 * version as usize;
    if (side_est - side as f64).abs() > 2.0 {
        return Err(Error::NotFound(format!(
            "estimated side {side_est:.1} matches no supported version"
        )));
    }

    // Sampling basis from the finder centers at module coordinates (3,3),
    // (side-4,3), (3,side-4).
    let denom = (side - 7) as f64;
    let ex = ((tr_c.x - tl_c.x) / denom, (tr_c.y - tl_c.y) / denom);
    let ey = ((bl_c.x - tl_c.x) / denom, (bl_c.y - tl_c.y) / denom);
    let sample = |col: usize, row: usize| -> bool {
        let fx = tl_c.x + (col as f64 - 3.0) * ex.0 + (row as f64 - 3.0) * ey.0;
        let fy = tl_c.y + (col as f64 - 3.0) * ex.1 + (row as f64 - 3.0) * ey.1;
        let xi = fx.round() as isize;
        let yi = fy.round() as isize;
        if xi < 0 || yi < 0 || xi >= w as isize || yi >= h as isize {
            return false;
        }
        dark[yi as usize * w + xi as usize]
    };

    let mut sym = QrSymbol {
        version,
        ec_level: EcLevel::L,
        side,
        modules: vec![false; side * side],
    };
    for row in 0..side {
        for col in 0..side {
            sym.set(col, row, sample(col, row));
        }
    }

    // Format info: read both copies, take the valid code with the smallest
    // Hamming distance.
    let mut bits1 = [false; 15];
    for (i, b) in bits1.iter_mut().enumerate().take(6) {
        *b = sym.get(8, i);
    }
    bits1[6] = sym.get(8, 7);
    bits1[7] = sym.get(8, 8);
    bits1[8] = sym.get(7, 8);
    for (i, b) in bits1.iter_mut().enumerate().skip(9) {
        *b = sym.get(14 - i, 8);
    }
    let mut bits2 = [false; 15];
    for (i, b) in bits2.iter_mut().enumerate().take(8) {
        *b = sym.get(side - 1 - i, 8);
    }
    for (i, b) in bits2.iter_mut().enumerate().skip(8) {
        *b = sym.get(8, side - 15 + i);
    }
    let to_u32 = |bits: &[bool; 15]| bits.iter().rev().fold(0u32, |acc, &b| (acc << 1) | u32::from(b));
    let read1 = to_u32(&bits1);
    let read2 = to_u32(&bits2);

    let mut best_fmt: Option<(u32, u32)> = None; // (distance, data)
    for ec_bits in 0..4u32 {
        for mask in 0..8u8 {
            let expected = format_sequence(EcLevel::from_format_bits(ec_bits), mask);
            for read in [read1, read2] {
                let dist = (expected ^ read).count_ones();
                if best_fmt.map_or(true, |(d, _)| dist < d) {
                    best_fmt = Some((dist, (ec_bits << 3) | u32::from(mask)));
                }
            }
        }
    }
    let (dist, fmt_data) = best_fmt.unwrap();
    if dist > 3 {
        return Err(Error::Uncorrectable(format!(
            "format information damaged (distance {dist})"
        )));
    }
    let ec_level = EcLevel::from_format_bits(fmt_data >> 3);
    let mask = (fmt_data & 7) as u8;
    sym.ec_level = ec_level;
    let (blocks, ec_per_block) = ec_layout(version, ec_level);
    if blocks != 1 {
        return Err(Error::Format(format!(
            "multi-block layout (version {version} level {ec_level:?}) is unsupported"
        )));
    }

    // Unmask and read the zig-zag stream.
    let is_function = function_mask(version);
    let order = data_module_order(side, &is_function);
    let total = total_codewords(version);
    let mut codewords = vec![0u8; total];
    for (i, &(x, y)) in order.iter().enumerate().take(total * 8) {
        let bit = sym.get(x, y) ^ mask_bit(mask, x, y);
        if bit {
            codewords[i / 8] |= 1 << (7 - (i % 8));
        }
    }

    let data = rs_correct(&codewords, ec_per_block)?;

    // Parse the byte-mode segment.
    let mut pos = 0usize;
    let mut take = |n: usize| -> u32 {
        let mut v = 0u32;
        for _ in 0..n {
            let byte = data[pos / 8];
            v = (v << 1) | u32::from((byte >> (7 - pos % 8)) & 1);
            pos += 1;
        }
        v
    };
    let mode = take(4);
    if mode != 0b0100 {
        return Err(Error::Format(format!("unsupported QR mode {mode:04b}")));
    }
    let count = take(8) as usize;
    if count > data.len().saturating_sub(2) {
        return Err(Error::Format(format!("char count {count} exceeds data")));
    }
    let mut payload = Vec::with_capacity(count);
    for _ in 0..count {
        payload.push(take(8) as u8);
    }
    String::from_utf8(payload).map_err(|_| Error::Format("payload is not valid UTF-8".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symbol_shape_matches_version() {
        let sym = qr_encode("128,064,032").unwrap();
        assert_eq!(sym.version(), 1);
        assert_eq!(sym.side(), 21);
        // Finder corners are dark.
        assert!(sym.get(0, 0) && sym.get(20, 0) && sym.get(0, 20));
    }

    #[test]
    fn version_selection_by_payload_length() {
        assert_eq!(qr_encode(&"x".repeat(17)).unwrap().version(), 1);
        assert_eq!(qr_encode(&"x".repeat(18)).unwrap().version(), 2);
        assert_eq!(qr_encode(&"x".repeat(33)).unwrap().version(), 3);
        assert_eq!(qr_encode(&"x".repeat(53)).unwrap().version(), 3);
        assert!(qr_encode(&"x".repeat(54)).is_err());
    }

    #[test]
    fn encode_render_decode_round_trip() {
        for payload in ["128,064,032", "000,000,000", "255,255,255", "007,200,013"] {
            let sym = qr_encode(payload).unwrap();
            let img = render_qr(&sym, 4).unwrap();
            let rect = Rect::new(0, 0, img.width(), img.height());
            assert_eq!(qr_decode(&img, rect).unwrap(), payload);
        }
    }

    #[test]
    fn decode_survives_uniform_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sym = qr_encode("031,128,222").unwrap();
        let img = render_qr(&sym, 4).unwrap();
        let mut noisy = img.data().to_vec();
        for v in noisy.iter_mut() {
            let delta: i16 = rng.random_range(-8..=8);
            *v = (*v as i16 + delta).clamp(0, 255) as u8;
        }
        let noisy = ImageBuffer::new(img.width(), img.height(), 1, noisy).unwrap();
        let rect = Rect::new(0, 0, noisy.width(), noisy.height());
        assert_eq!(qr_decode(&noisy, rect).unwrap(), "031,128,222");
    }

    #[test]
    fn decode_version_2_and_3() {
        for payload in [
            "a-version-2-payload-xyz".to_string(),
            "a much longer version three payload 0123456789".to_string(),
        ] {
            let sym = qr_encode(&payload).unwrap();
            let img = render_qr(&sym, 3).unwrap();
            let rect = Rect::new(0, 0, img.width(), img.height());
            assert_eq!(qr_decode(&img, rect).unwrap(), payload);
        }
    }

    #[test]
    fn blank_region_is_not_found() {
        let img = ImageBuffer::filled_rgb(64, 64, [255, 255, 255]).unwrap();
        let rect = Rect::new(0, 0, 64, 64);
        assert!(matches!(qr_decode(&img, rect), Err(Error::NotFound(_))));
    }

    #[test]
    fn format_sequence_matches_published_vector() {
        // Known value: EC level M (00), mask 5 -> 0x40CE per the standard's
        // format-information example.
        assert_eq!(format_sequence(EcLevel::M, 5), 0x40CE);
    }
}
