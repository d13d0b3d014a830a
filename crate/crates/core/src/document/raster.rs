//! Metric-grade rasterizer.
//!
//! This is not a display renderer. Each element paints a footprint onto a
//! white grayscale grid in paint order: filled shapes paint their interior at
//! the fill luminance, strokes paint an outline whose width is scaled to
//! pixels (at least one pixel), and text paints its area at [`TEXT_GRAY`].
//! A pixel belongs to a footprint when its centre lies inside it.

use std::io::Write;

use super::{DiagramElement, DocumentError, ElementKind, Point, Rect, VectorDocument};

/// Default length of the short raster side in pixels.
pub const DEFAULT_SHORT_SIDE: u32 = 1024;

/// Gray level used for text areas.
pub const TEXT_GRAY: u8 = 128;

/// Grayscale raster, row-major, 255 = white background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterGrid {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RasterGrid {
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        RasterGrid {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn from_pixels(
        width: usize,
        height: usize,
        pixels: Vec<u8>,
    ) -> Result<Self, DocumentError> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(DocumentError::MalformedInput(format!(
                "pixel buffer of {} bytes does not match {width}x{height}",
                pixels.len()
            )));
        }
        Ok(RasterGrid {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    /// Number of pixels darker than the background.
    pub fn ink_count(&self) -> usize {
        self.pixels.iter().filter(|&&v| v < 255).count()
    }

    /// Binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self, DocumentError> {
        let malformed = |m: &str| DocumentError::MalformedInput(format!("pgm: {m}"));
        let mut fields = Vec::with_capacity(4);
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(malformed("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| malformed("header"))?);
        }
        if fields[0] != "P5" || fields[3] != "255" {
            return Err(malformed("expected P5 with maxval 255"));
        }
        let width: usize = fields[1].parse().map_err(|_| malformed("width"))?;
        let height: usize = fields[2].parse().map_err(|_| malformed("height"))?;
        let data = bytes
            .get(pos + 1..)
            .ok_or_else(|| malformed("missing data"))?;
        if data.len() != width * height {
            return Err(malformed("data length"));
        }
        RasterGrid::from_pixels(width, height, data.to_vec())
    }

    /// 8-bit grayscale PNG.
    pub fn to_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut encoder = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            encoder.set_color(png::ColorType::Grayscale);
            encoder.set_depth(png::BitDepth::Eight);
            let mut writer = encoder.write_header().expect("in-memory png header");
            writer
                .write_image_data(&self.pixels)
                .expect("in-memory png data");
            writer.finish().expect("in-memory png finish");
        }
        out
    }

    pub fn write_pgm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&self.to_pgm())
    }
}

/// Raster size for a canvas: the short side becomes `short_side`, the long
/// side is scaled by the aspect ratio and rounded. Returns
/// `(width, height, pixels_per_unit)`.
pub fn raster_dimensions(canvas_w: f64, canvas_h: f64, short_side: u32) -> (usize, usize, f64) {
    let short = f64::from(short_side);
    let scale = short / canvas_w.min(canvas_h);
    if canvas_w <= canvas_h {
        let h = (short * canvas_h / canvas_w).round() as usize;
        (short_side as usize, h, scale)
    } else {
        let w = (short * canvas_w / canvas_h).round() as usize;
        (w, short_side as usize, scale)
    }
}

/// Rasterize `doc` with its short side normalized to `short_side` pixels.
pub fn rasterize(doc: &VectorDocument, short_side: u32) -> Result<RasterGrid, DocumentError> {
    if short_side == 0 {
        return Err(DocumentError::DegenerateCanvas {
            width: doc.canvas_width(),
            height: doc.canvas_height(),
        });
    }
    let (w, h, scale) = raster_dimensions(doc.canvas_width(), doc.canvas_height(), short_side);
    if w == 0 || h == 0 {
        return Err(DocumentError::DegenerateCanvas {
            width: doc.canvas_width(),
            height: doc.canvas_height(),
        });
    }
    let mut painter = Painter {
        grid: RasterGrid::filled(w, h, 255),
        scale,
    };
    for idx in doc.paint_order() {
        painter.paint_element(&doc.elements()[idx]);
    }
    Ok(painter.grid)
}

fn luma(c: super::Color) -> u8 {
    c.luminance().round().clamp(0.0, 255.0) as u8
}

struct Painter {
    grid: RasterGrid,
    scale: f64,
}

impl Painter {
    /// Pixel index range whose centres fall in `[a, b)` (document units).
    fn span(&self, a: f64, b: f64, limit: usize) -> (usize, usize) {
        let lo = (a * self.scale - 0.5).ceil().max(0.0);
        let hi = (b * self.scale - 0.5).ceil().max(0.0);
        let lo = (lo as usize).min(limit);
        let hi = (hi as usize).min(limit);
        (lo, hi.max(lo))
    }

    fn blend(&mut self, x: usize, y: usize, value: u8, opacity: f64) {
        if opacity >= 1.0 {
            self.grid.set(x, y, value);
        } else if opacity > 0.0 {
            let cur = f64::from(self.grid.get(x, y));
            let v = opacity * f64::from(value) + (1.0 - opacity) * cur;
            self.grid.set(x, y, v.round().clamp(0.0, 255.0) as u8);
        }
    }

    fn stroke_px(&self, width: f64) -> f64 {
        (width * self.scale).round().max(1.0)
    }

    fn paint_element(&mut self, el: &DiagramElement) {
        match el.kind {
            ElementKind::Rect | ElementKind::TextBox => {
                if let Some(fill) = el.fill {
                    self.fill_rect(el.bbox, luma(fill.color), fill.opacity);
                }
                if let Some(stroke) = el.stroke.filter(|s| s.width > 0.0) {
                    let t = self.stroke_px(stroke.width);
                    self.outline_rect(el.bbox, luma(stroke.color), t);
                }
            }
            ElementKind::Ellipse => {
                if let Some(fill) = el.fill {
                    self.fill_ellipse(el.bbox, luma(fill.color), fill.opacity, None);
                }
                if let Some(stroke) = el.stroke.filter(|s| s.width > 0.0) {
                    let t = self.stroke_px(stroke.width);
                    self.fill_ellipse(el.bbox, luma(stroke.color), 1.0, Some(t));
                }
            }
            ElementKind::Line | ElementKind::Polyline | ElementKind::Connector => {
                let (value, width) = match el.stroke {
                    Some(s) if s.width > 0.0 => (luma(s.color), s.width),
                    Some(_) => return,
                    None => (0, 1.0),
                };
                let t = self.stroke_px(width);
                let pts = el.path_points();
                for seg in pts.windows(2) {
                    self.segment(seg[0], seg[1], value, t);
                }
            }
        }
        if let Some(area) = el.text_area() {
            self.fill_rect(area, TEXT_GRAY, 1.0);
        }
    }

    fn fill_rect(&mut self, r: Rect, value: u8, opacity: f64) {
        let (x0, x1) = self.span(r.x, r.right(), self.grid.width);
        let (y0, y1) = self.span(r.y, r.bottom(), self.grid.height);
        for y in y0..y1 {
            for x in x0..x1 {
                self.blend(x, y, value, opacity);
            }
        }
    }

    fn outline_rect(&mut self, r: Rect, value: u8, thickness: f64) {
        let t = thickness as usize;
        let (x0, x1) = self.span(r.x, r.right(), self.grid.width);
        let (y0, y1) = self.span(r.y, r.bottom(), self.grid.height);
        for y in y0..y1 {
            for x in x0..x1 {
                let edge = x < x0 + t || x + t >= x1 || y < y0 + t || y + t >= y1;
                if edge {
                    self.grid.set(x, y, value);
                }
            }
        }
    }

    /// Fill an ellipse inscribed in `r`; with `ring = Some(t)` only the band
    /// of `t` pixels inside the boundary is painted.
    fn fill_ellipse(&mut self, r: Rect, value: u8, opacity: f64, ring: Option<f64>) {
        let c = r.center();
        let (rx, ry) = (r.w / 2.0, r.h / 2.0);
        if rx <= 0.0 || ry <= 0.0 {
            return;
        }
        let inner = ring.map(|t| (rx - t / self.scale, ry - t / self.scale));
        let (x0, x1) = self.span(r.x, r.right() + 1.0 / self.scale, self.grid.width);
        let (y0, y1) = self.span(r.y, r.bottom() + 1.0 / self.scale, self.grid.height);
        for y in y0..y1 {
            let py = (y as f64 + 0.5) / self.scale;
            for x in x0..x1 {
                let px = (x as f64 + 0.5) / self.scale;
                let outer = ((px - c.x) / rx).powi(2) + ((py - c.y) / ry).powi(2) <= 1.0;
                if !outer {
                    continue;
                }
                let inside_inner = match inner {
                    Some((irx, iry)) if irx > 0.0 && iry > 0.0 => {
                        ((px - c.x) / irx).powi(2) + ((py - c.y) / iry).powi(2) < 1.0
                    }
                    _ => false,
                };
                if !inside_inner {
                    self.blend(x, y, value, opacity);
                }
            }
        }
    }

    /// Pixels whose centre is within `thickness / 2` (at least half a pixel)
    /// of the segment, measured in pixel space.
    fn segment(&mut self, a: Point, b: Point, value: u8, thickness: f64) {
        let half = (thickness / 2.0).max(0.5);
        let (ax, ay) = (a.x * self.scale, a.y * self.scale);
        let (bx, by) = (b.x * self.scale, b.y * self.scale);
        let xmin = (ax.min(bx) - half).floor().max(0.0) as usize;
        let ymin = (ay.min(by) - half).floor().max(0.0) as usize;
        let xmax = ((ax.max(bx) + half).ceil().max(0.0) as usize).min(self.grid.width);
        let ymax = ((ay.max(by) + half).ceil().max(0.0) as usize).min(self.grid.height);
        let (dx, dy) = (bx - ax, by - ay);
        let len2 = dx * dx + dy * dy;
        for y in ymin..ymax {
            let cy = y as f64 + 0.5;
            for x in xmin..xmax {
                let cx = x as f64 + 0.5;
                let t = if len2 > 0.0 {
                    (((cx - ax) * dx + (cy - ay) * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (qx, qy) = (ax + t * dx, ay + t * dy);
                if (cx - qx).hypot(cy - qy) <= half {
                    self.grid.set(x, y, value);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::{Color, DiagramElement, TextPayload};

    fn doc(w: f64, h: f64, els: Vec<DiagramElement>) -> VectorDocument {
        VectorDocument::new(w, h, els, "").unwrap()
    }

    #[test]
    fn full_canvas_black_rect_covers_everything() {
        let d = doc(
            300.0,
            200.0,
            vec![DiagramElement::rect("r", Rect::new(0.0, 0.0, 300.0, 200.0))
                .with_fill(Color::BLACK)],
        );
        let g = rasterize(&d, DEFAULT_SHORT_SIDE).unwrap();
        assert_eq!((g.width(), g.height()), (1536, 1024));
        assert!(g.pixels().iter().all(|&v| v == 0));
    }

    #[test]
    fn short_side_is_forced_and_ratio_kept() {
        assert_eq!(raster_dimensions(2000.0, 1000.0, 1024).0, 2048);
        assert_eq!(raster_dimensions(2000.0, 1000.0, 1024).1, 1024);
        assert_eq!(raster_dimensions(1000.0, 3000.0, 1024).1, 3072);
        assert_eq!(
            raster_dimensions(300.0, 700.0, 1024),
            (1024, 2389, 1024.0 / 300.0)
        );
    }

    #[test]
    fn text_paints_mid_gray() {
        let d = doc(
            100.0,
            100.0,
            vec![DiagramElement::text_box(
                "t",
                Rect::new(0.0, 0.0, 50.0, 50.0),
                TextPayload::new("hi", 12.0),
            )],
        );
        let g = rasterize(&d, 100).unwrap();
        assert_eq!(g.get(10, 10), TEXT_GRAY);
        assert_eq!(g.get(60, 60), 255);
        assert_eq!(g.ink_count(), 2500);
    }

    #[test]
    fn translucent_fill_blends_with_background() {
        let d = doc(
            10.0,
            10.0,
            vec![DiagramElement::rect("r", Rect::new(0.0, 0.0, 10.0, 10.0))
                .with_fill_opacity(Color::BLACK, 0.5)],
        );
        let g = rasterize(&d, 10).unwrap();
        assert_eq!(g.get(5, 5), 128);
    }

    #[test]
    fn lines_without_stroke_are_one_pixel_black() {
        let d = doc(
            10.0,
            10.0,
            vec![DiagramElement::path(
                "l",
                ElementKind::Line,
                vec![Point::new(0.0, 5.0), Point::new(10.0, 5.0)],
            )],
        );
        let g = rasterize(&d, 10).unwrap();
        // y = 5.0 sits exactly between rows 4 and 5; both centres are 0.5 away.
        assert_eq!(g.ink_count(), 20);
        assert_eq!(g.get(3, 4), 0);
    }

    #[test]
    fn pgm_round_trip_is_bit_exact() {
        let mut g = RasterGrid::filled(3, 2, 255);
        g.set(1, 1, 7);
        let bytes = g.to_pgm();
        assert_eq!(&bytes[..11], b"P5\n3 2\n255\n");
        assert_eq!(bytes.len(), 11 + 6);
        assert_eq!(RasterGrid::from_pgm(&bytes).unwrap(), g);
    }

    #[test]
    fn png_has_signature() {
        let g = RasterGrid::filled(4, 4, 200);
        assert_eq!(&g.to_png()[..8], b"\x89PNG\r\n\x1a\n");
    }

    #[test]
    fn repeated_rasterization_is_bit_identical() {
        let d = doc(
            50.0,
            40.0,
            vec![
                DiagramElement::rect("a", Rect::new(5.0, 5.0, 20.0, 10.0))
                    .with_fill(Color::rgb(200, 10, 10))
                    .with_stroke(Color::BLACK, 1.0),
                DiagramElement::new("e", ElementKind::Ellipse, Rect::new(20.0, 10.0, 20.0, 20.0))
                    .with_fill(Color::gray(90))
                    .with_z(-1),
            ],
        );
        assert_eq!(rasterize(&d, 1024).unwrap(), rasterize(&d, 1024).unwrap());
    }
}
