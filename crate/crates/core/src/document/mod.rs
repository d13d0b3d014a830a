//! Diagram object model, input parsing and metric-grade rasterization.

mod manifest;
mod raster;
mod svg;
mod text;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use manifest::{parse_manifest, to_manifest_json, to_manifest_value};
pub use raster::{raster_dimensions, rasterize, RasterGrid, DEFAULT_SHORT_SIDE, TEXT_GRAY};
pub use svg::parse_svg;
pub use text::{extract_text_set, normalize_text};

/// Fraction of the font size taken by an average glyph.
pub const GLYPH_ASPECT: f64 = 0.6;
/// Line height as a multiple of the font size.
pub const LINE_HEIGHT: f64 = 1.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DocumentError {
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
    #[error("document has no elements")]
    EmptyDocument,
    #[error("degenerate canvas {width}x{height}")]
    DegenerateCanvas { width: f64, height: f64 },
    #[error("duplicate element id '{0}'")]
    DuplicateId(String),
    #[error("invalid element '{id}': {reason}")]
    InvalidElement { id: String, reason: String },
}

/// Input formats accepted by [`parse_document`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    ManifestJson,
    SvgSubset,
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "manifest-json" | "manifest" | "json" => Ok(InputFormat::ManifestJson),
            "svg-subset" | "svg" => Ok(InputFormat::SvgSubset),
            other => Err(format!("unknown document format '{other}'")),
        }
    }
}

impl InputFormat {
    /// Guess the format from a file extension.
    pub fn from_extension(ext: &str) -> Option<Self> {
        match ext.to_ascii_lowercase().as_str() {
            "json" => Some(InputFormat::ManifestJson),
            "svg" => Some(InputFormat::SvgSubset),
            _ => None,
        }
    }
}

/// Parse a document in the declared format.
pub fn parse_document(bytes: &[u8], format: InputFormat) -> Result<VectorDocument, DocumentError> {
    let doc = match format {
        InputFormat::ManifestJson => parse_manifest(bytes)?,
        InputFormat::SvgSubset => parse_svg(bytes)?,
    };
    if doc.elements().is_empty() {
        return Err(DocumentError::EmptyDocument);
    }
    Ok(doc)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Axis-aligned rectangle in document units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Rect { x, y, w, h }
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> Point {
        Point::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x && p.x <= self.right() && p.y >= self.y && p.y <= self.bottom()
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x1 > x0 && y1 > y0).then(|| Rect::new(x0, y0, x1 - x0, y1 - y0))
    }

    /// Euclidean distance from `p` to the rectangle (0 when inside).
    pub fn distance_to(&self, p: Point) -> f64 {
        let dx = (self.x - p.x).max(0.0).max(p.x - self.right());
        let dy = (self.y - p.y).max(0.0).max(p.y - self.bottom());
        dx.hypot(dy)
    }

    pub fn bounding(points: &[Point]) -> Option<Rect> {
        let first = points.first()?;
        let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
        for p in &points[1..] {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        Some(Rect::new(x0, y0, x1 - x0, y1 - y0))
    }
}

/// 8-bit sRGB color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Color {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Color {
    pub const BLACK: Color = Color::rgb(0, 0, 0);
    pub const WHITE: Color = Color::rgb(255, 255, 255);

    pub const fn rgb(r: u8, g: u8, b: u8) -> Self {
        Color { r, g, b }
    }

    pub const fn gray(v: u8) -> Self {
        Color { r: v, g: v, b: v }
    }

    /// Rec. 601 luma on the 0..=255 scale.
    pub fn luminance(&self) -> f64 {
        0.299 * f64::from(self.r) + 0.587 * f64::from(self.g) + 0.114 * f64::from(self.b)
    }

    pub fn parse(s: &str) -> Option<Color> {
        let s = s.trim();
        if let Some(hex) = s.strip_prefix('#') {
            let digits: Vec<u8> = hex
                .chars()
                .map(|c| c.to_digit(16).map(|d| d as u8))
                .collect::<Option<_>>()?;
            return match digits.len() {
                3 => Some(Color::rgb(digits[0] * 17, digits[1] * 17, digits[2] * 17)),
                6 => Some(Color::rgb(
                    digits[0] * 16 + digits[1],
                    digits[2] * 16 + digits[3],
                    digits[4] * 16 + digits[5],
                )),
                _ => None,
            };
        }
        let named = match s.to_ascii_lowercase().as_str() {
            "black" => Color::BLACK,
            "white" => Color::WHITE,
            "gray" | "grey" => Color::gray(128),
            "silver" => Color::gray(192),
            "red" => Color::rgb(255, 0, 0),
            "green" => Color::rgb(0, 128, 0),
            "blue" => Color::rgb(0, 0, 255),
            "yellow" => Color::rgb(255, 255, 0),
            "orange" => Color::rgb(255, 165, 0),
            _ => return None,
        };
        Some(named)
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02x}{:02x}{:02x}", self.r, self.g, self.b)
    }
}

impl Serialize for Color {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Color {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Color::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("invalid color '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fill {
    pub color: Color,
    pub opacity: f64,
}

impl Fill {
    pub fn solid(color: Color) -> Self {
        Fill {
            color,
            opacity: 1.0,
        }
    }

    pub fn is_opaque(&self) -> bool {
        self.opacity >= 1.0
    }

    /// Luminance of the fill composited over a white canvas.
    pub fn composite_luminance(&self) -> f64 {
        self.opacity * self.color.luminance() + (1.0 - self.opacity) * 255.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    pub color: Color,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextPayload {
    pub content: String,
    pub font_size: f64,
    pub color: Color,
    pub container_id: Option<String>,
}

impl TextPayload {
    pub fn new(content: impl Into<String>, font_size: f64) -> Self {
        TextPayload {
            content: content.into(),
            font_size,
            color: Color::BLACK,
            container_id: None,
        }
    }

    /// Estimated single-line extent `(width, height)` in document units.
    pub fn estimated_extent(&self) -> (f64, f64) {
        let chars = self.content.chars().count() as f64;
        (
            GLYPH_ASPECT * self.font_size * chars,
            LINE_HEIGHT * self.font_size,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementKind {
    Rect,
    Ellipse,
    Line,
    Polyline,
    Connector,
    TextBox,
}

impl ElementKind {
    /// Kinds whose geometry is a path rather than an area.
    pub fn is_linear(self) -> bool {
        matches!(
            self,
            ElementKind::Line | ElementKind::Polyline | ElementKind::Connector
        )
    }

    pub fn is_area_shape(self) -> bool {
        matches!(self, ElementKind::Rect | ElementKind::Ellipse)
    }
}

/// One typed diagram element.
///
/// Linear kinds carry their vertices in `points`; when `points` is empty a
/// line runs from the top-left to the bottom-right corner of `bbox`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagramElement {
    pub id: String,
    pub kind: ElementKind,
    pub bbox: Rect,
    pub fill: Option<Fill>,
    pub stroke: Option<Stroke>,
    pub text: Option<TextPayload>,
    pub z_order: i32,
    pub points: Vec<Point>,
}

impl DiagramElement {
    pub fn new(id: impl Into<String>, kind: ElementKind, bbox: Rect) -> Self {
        DiagramElement {
            id: id.into(),
            kind,
            bbox,
            fill: None,
            stroke: None,
            text: None,
            z_order: 0,
            points: Vec::new(),
        }
    }

    pub fn rect(id: impl Into<String>, bbox: Rect) -> Self {
        Self::new(id, ElementKind::Rect, bbox)
    }

    pub fn text_box(id: impl Into<String>, bbox: Rect, text: TextPayload) -> Self {
        Self::new(id, ElementKind::TextBox, bbox).with_text(text)
    }

    /// A linear element through `points`; the bbox is their bounding box.
    pub fn path(id: impl Into<String>, kind: ElementKind, points: Vec<Point>) -> Self {
        let bbox = Rect::bounding(&points).unwrap_or_default();
        let mut el = Self::new(id, kind, bbox);
        el.points = points;
        el
    }

    pub fn with_fill(mut self, color: Color) -> Self {
        self.fill = Some(Fill::solid(color));
        self
    }

    pub fn with_fill_opacity(mut self, color: Color, opacity: f64) -> Self {
        self.fill = Some(Fill { color, opacity });
        self
    }

    pub fn with_stroke(mut self, color: Color, width: f64) -> Self {
        self.stroke = Some(Stroke { color, width });
        self
    }

    pub fn with_text(mut self, text: TextPayload) -> Self {
        self.text = Some(text);
        self
    }

    pub fn with_z(mut self, z: i32) -> Self {
        self.z_order = z;
        self
    }

    /// Vertices of a linear element.
    pub fn path_points(&self) -> Vec<Point> {
        if self.points.len() >= 2 {
            self.points.clone()
        } else {
            vec![
                Point::new(self.bbox.x, self.bbox.y),
                Point::new(self.bbox.right(), self.bbox.bottom()),
            ]
        }
    }

    /// Area covered by this element's text, if any.
    ///
    /// A text box's text fills its own bbox; text attached to any other
    /// element occupies its estimated extent, centred in and clipped to the
    /// element's bbox.
    pub fn text_area(&self) -> Option<Rect> {
        let text = self.text.as_ref()?;
        if self.kind == ElementKind::TextBox {
            return Some(self.bbox);
        }
        let (w, h) = text.estimated_extent();
        let w = w.min(self.bbox.w);
        let h = h.min(self.bbox.h);
        let c = self.bbox.center();
        Some(Rect::new(c.x - w / 2.0, c.y - h / 2.0, w, h))
    }

    fn validate(&self) -> Result<(), DocumentError> {
        let invalid = |reason: &str| DocumentError::InvalidElement {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        let b = &self.bbox;
        if ![b.x, b.y, b.w, b.h].iter().all(|v| v.is_finite()) {
            return Err(invalid("bbox must be finite"));
        }
        if b.w < 0.0 || b.h < 0.0 {
            return Err(invalid("bbox width and height must be non-negative"));
        }
        if let Some(fill) = &self.fill {
            if !(0.0..=1.0).contains(&fill.opacity) {
                return Err(invalid("fill opacity must be in [0, 1]"));
            }
        }
        if let Some(stroke) = &self.stroke {
            if !(stroke.width >= 0.0 && stroke.width.is_finite()) {
                return Err(invalid("stroke width must be >= 0"));
            }
        }
        if let Some(text) = &self.text {
            if text.content.trim().is_empty() {
                return Err(invalid("text content is empty"));
            }
            if !(text.font_size > 0.0 && text.font_size.is_finite()) {
                return Err(invalid("font size must be > 0"));
            }
        }
        if self
            .points
            .iter()
            .any(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err(invalid("points must be finite"));
        }
        Ok(())
    }
}

/// Canvas plus ordered diagram elements; the unit being scored.
///
/// Values are validated at construction and immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorDocument {
    canvas_width: f64,
    canvas_height: f64,
    elements: Vec<DiagramElement>,
    source_id: String,
}

impl VectorDocument {
    pub fn new(
        canvas_width: f64,
        canvas_height: f64,
        elements: Vec<DiagramElement>,
        source_id: impl Into<String>,
    ) -> Result<Self, DocumentError> {
        if !(canvas_width > 0.0 && canvas_height > 0.0)
            || !canvas_width.is_finite()
            || !canvas_height.is_finite()
        {
            return Err(DocumentError::DegenerateCanvas {
                width: canvas_width,
                height: canvas_height,
            });
        }
        let mut seen = HashSet::with_capacity(elements.len());
        for el in &elements {
            el.validate()?;
            if !seen.insert(el.id.as_str()) {
                return Err(DocumentError::DuplicateId(el.id.clone()));
            }
        }
        Ok(VectorDocument {
            canvas_width,
            canvas_height,
            elements,
            source_id: source_id.into(),
        })
    }

    pub fn canvas_width(&self) -> f64 {
        self.canvas_width
    }

    pub fn canvas_height(&self) -> f64 {
        self.canvas_height
    }

    pub fn canvas(&self) -> Rect {
        Rect::new(0.0, 0.0, self.canvas_width, self.canvas_height)
    }

    pub fn elements(&self) -> &[DiagramElement] {
        &self.elements
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    /// Number of graphical components; the difficulty measure of a task.
    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn element(&self, id: &str) -> Option<&DiagramElement> {
        self.elements.iter().find(|e| e.id == id)
    }

    /// Element indices in painting order: ascending `z_order`, ties by
    /// document order.
    pub fn paint_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.elements.len()).collect();
        order.sort_by_key(|&i| (self.elements[i].z_order, i));
        order
    }
}
