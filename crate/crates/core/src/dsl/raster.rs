//! Deterministic binary rasterization of stroke lists.
//!
//! A pixel is ink iff its center lies within half the stroke width of some
//! stroke's curve. Strokes outside the viewport clip silently. Rendering
//! scans only the inflated bounding box of each stroke, so small drawings
//! rasterize in microseconds, and [`MatchScratch`] additionally aborts as
//! soon as a candidate stroke inks a pixel the target image does not have.

use crate::geom::{v, Stroke, Vec2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
    /// Canvas coordinates of the top-left viewport corner (y-down).
    pub min: Vec2,
    /// Canvas coordinates of the bottom-right viewport corner.
    pub max: Vec2,
    pub stroke_width: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            width: 80,
            height: 80,
            min: v(-0.5, -0.5),
            max: v(4.5, 4.5),
            stroke_width: 0.08,
        }
    }
}

impl RenderConfig {
    pub fn pixel_size(&self) -> (f64, f64) {
        (
            (self.max.x - self.min.x) / self.width as f64,
            (self.max.y - self.min.y) / self.height as f64,
        )
    }

    pub fn pixel_center(&self, row: usize, col: usize) -> Vec2 {
        let (sx, sy) = self.pixel_size();
        v(
            self.min.x + (col as f64 + 0.5) * sx,
            self.min.y + (row as f64 + 0.5) * sy,
        )
    }

    /// Pixel rows/cols whose centers may lie within `pad` of the given
    /// canvas-space box; `None` when the box misses the viewport entirely.
    fn clipped_span(&self, lo: Vec2, hi: Vec2, pad: f64) -> Option<(usize, usize, usize, usize)> {
        let (sx, sy) = self.pixel_size();
        let eps = 1e-9;
        let col_lo = ((lo.x - pad - self.min.x) / sx - 0.5 - eps).ceil().max(0.0);
        let col_hi = ((hi.x + pad - self.min.x) / sx - 0.5 + eps).floor();
        let row_lo = ((lo.y - pad - self.min.y) / sy - 0.5 - eps).ceil().max(0.0);
        let row_hi = ((hi.y + pad - self.min.y) / sy - 0.5 + eps).floor();
        let col_hi = col_hi.min(self.width as f64 - 1.0);
        let row_hi = row_hi.min(self.height as f64 - 1.0);
        if col_lo > col_hi || row_lo > row_hi {
            return None;
        }
        Some((row_lo as usize, row_hi as usize, col_lo as usize, col_hi as usize))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RasterError {
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimMismatch(usize, usize, usize, usize),
    #[error("bad PGM data: {0}")]
    BadPgm(String),
}

/// A binary image, one bit per pixel, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: usize,
    height: usize,
    words: Vec<u64>,
    ink: usize,
}

impl RasterImage {
    pub fn blank(width: usize, height: usize) -> RasterImage {
        RasterImage {
            width,
            height,
            words: vec![0; (width * height + 63) / 64],
            ink: 0,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of ink pixels.
    pub fn ink(&self) -> usize {
        self.ink
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        let idx = row * self.width + col;
        self.words[idx / 64] >> (idx % 64) & 1 == 1
    }

    pub fn set(&mut self, row: usize, col: usize) {
        let idx = row * self.width + col;
        let (w, b) = (idx / 64, idx % 64);
        if self.words[w] >> b & 1 == 0 {
            self.words[w] |= 1 << b;
            self.ink += 1;
        }
    }

    /// Euclidean norm of the pixelwise difference. For binary images this is
    /// the square root of the count of differing pixels.
    pub fn distance(&self, other: &RasterImage) -> Result<f64, RasterError> {
        if self.width != other.width || self.height != other.height {
            return Err(RasterError::DimMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        let diff: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum();
        Ok((diff as f64).sqrt())
    }

    /// Block-averaged ink fractions on a `fw` x `fh` grid, row-major.
    pub fn downsample(&self, fw: usize, fh: usize) -> Vec<f64> {
        let mut sums = vec![0.0f64; fw * fh];
        let mut counts = vec![0u32; fw * fh];
        for row in 0..self.height {
            let fr = row * fh / self.height;
            for col in 0..self.width {
                let fc = col * fw / self.width;
                let cell = fr * fw + fc;
                counts[cell] += 1;
                if self.get(row, col) {
                    sums[cell] += 1.0;
                }
            }
        }
        sums.iter()
            .zip(&counts)
            .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect()
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for row in 0..self.height {
            for col in 0..self.width {
                out.push(if self.get(row, col) { 255 } else { 0 });
            }
        }
        out
    }

    pub fn from_pgm(data: &[u8]) -> Result<RasterImage, RasterError> {
        let bad = |m: &str| RasterError::BadPgm(m.to_string());
        if !data.starts_with(b"P5") {
            return Err(bad("missing P5 magic"));
        }
        // Header: three whitespace-separated numbers after the magic,
        // with '#' comment lines allowed.
        let mut pos = 2;
        let mut nums = [0usize; 3];
        for slot in nums.iter_mut() {
            while pos < data.len() && (data[pos].is_ascii_whitespace() || data[pos] == b'#') {
                if data[pos] == b'#' {
                    while pos < data.len() && data[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < data.len() && data[pos].is_ascii_digit() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            *slot = std::str::from_utf8(&data[start..pos])
                .unwrap()
                .parse()
                .map_err(|_| bad("bad header number"))?;
        }
        let (width, height, maxval) = (nums[0], nums[1], nums[2]);
        if maxval != 255 {
            return Err(bad("expected maxval 255"));
        }
        pos += 1; // single whitespace byte ends the header
        if data.len() < pos + width * height {
            return Err(bad("truncated pixel data"));
        }
        let mut img = RasterImage::blank(width, height);
        for row in 0..height {
            for col in 0..width {
                if data[pos + row * width + col] > 127 {
                    img.set(row, col);
                }
            }
        }
        Ok(img)
    }
}

/// Renders strokes to a fresh image.
pub fn render(strokes: &[Stroke], cfg: &RenderConfig) -> RasterImage {
    let mut img = RasterImage::blank(cfg.width, cfg.height);
    let half = cfg.stroke_width / 2.0;
    for s in strokes {
        let (lo, hi) = s.bbox();
        let Some((r0, r1, c0, c1)) = cfg.clipped_span(lo, hi, half) else {
            continue;
        };
        for row in r0..=r1 {
            for col in c0..=c1 {
                if s.curve_dist(cfg.pixel_center(row, col)) <= half {
                    img.set(row, col);
                }
            }
        }
    }
    img
}

/// Reusable buffer for testing whether a stroke list renders exactly to a
/// target image, with early abort on the first wrong pixel.
pub struct MatchScratch {
    words: Vec<u64>,
    dirty: Vec<u32>,
    len: usize,
}

impl MatchScratch {
    pub fn new(cfg: &RenderConfig) -> MatchScratch {
        let len = cfg.width * cfg.height;
        MatchScratch {
            words: vec![0; (len + 63) / 64],
            dirty: Vec::new(),
            len,
        }
    }

    /// True iff `strokes` renders to exactly `target` under `cfg`. The
    /// target must have the same dimensions as the config used here.
    pub fn matches(&mut self, strokes: &[Stroke], cfg: &RenderConfig, target: &RasterImage) -> bool {
        debug_assert_eq!(self.len, target.width * target.height);
        for &w in &self.dirty {
            self.words[w as usize] = 0;
        }
        self.dirty.clear();
        let mut ink = 0usize;
        let half = cfg.stroke_width / 2.0;
        for s in strokes {
            let (lo, hi) = s.bbox();
            let Some((r0, r1, c0, c1)) = cfg.clipped_span(lo, hi, half) else {
                continue;
            };
            for row in r0..=r1 {
                for col in c0..=c1 {
                    if s.curve_dist(cfg.pixel_center(row, col)) <= half {
                        let idx = row * target.width + col;
                        let (w, b) = (idx / 64, idx % 64);
                        if target.words[w] >> b & 1 == 0 {
                            // Inked a pixel the target lacks: no match.
                            return false;
                        }
                        if self.words[w] >> b & 1 == 0 {
                            if self.words[w] == 0 {
                                self.dirty.push(w as u32);
                            }
                            self.words[w] |= 1 << b;
                            ink += 1;
                        }
                    }
                }
            }
        }
        // Every inked pixel is in the target, so equality is a count check.
        ink == target.ink
    }
}

/// SVG export of the stroke list, black on white, canvas units.
pub fn to_svg(strokes: &[Stroke], cfg: &RenderConfig) -> String {
    use std::fmt::Write;
    let w = cfg.max.x - cfg.min.x;
    let h = cfg.max.y - cfg.min.y;
    let mut out = String::new();
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\" width=\"{}\" height=\"{}\">\n",
        cfg.min.x, cfg.min.y, w, h, cfg.width, cfg.height
    );
    let _ = write!(
        out,
        "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n",
        cfg.min.x, cfg.min.y, w, h
    );
    for s in strokes {
        match *s {
            Stroke::Line { a, b } => {
                let _ = write!(
                    out,
                    "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" stroke-width=\"{}\" stroke-linecap=\"round\"/>\n",
                    a.x, a.y, b.x, b.y, cfg.stroke_width
                );
            }
            Stroke::Circle { c, r } => {
                let _ = write!(
                    out,
                    "  <circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"{}\"/>\n",
                    c.x, c.y, r, cfg.stroke_width
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
