//! Canonical JSON manifest format.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "source_id": "fig-12",
//!   "canvas": {"w": 800, "h": 600},
//!   "elements": [
//!     {"id": "enc", "kind": "rect", "bbox": [10, 10, 120, 60],
//!      "fill": {"color": "#dde8ff", "opacity": 1.0},
//!      "stroke": {"color": "#000000", "width": 1.0},
//!      "text": {"content": "Encoder", "font_size": 12, "color": "#000000", "container_id": null},
//!      "z": 0},
//!     {"id": "c1", "kind": "connector", "bbox": [130, 40, 50, 0],
//!      "points": [[130, 40], [180, 40]], "z": 1}
//!   ]
//! }
//! ```
//!
//! `source_id`, `fill`, `stroke`, `text`, `points` and `z` are optional;
//! `opacity` defaults to 1 and `z` to 0. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use super::{
    Color, DiagramElement, DocumentError, ElementKind, Fill, Point, Rect, Stroke, TextPayload,
    VectorDocument,
};
use crate::SCHEMA_VERSION;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    #[serde(default = "default_schema")]
    schema_version: u32,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    source_id: String,
    canvas: Canvas,
    elements: Vec<ManifestElement>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Canvas {
    w: f64,
    h: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestElement {
    id: String,
    kind: ElementKind,
    bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fill: Option<ManifestFill>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stroke: Option<Stroke>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<ManifestText>,
    #[serde(default)]
    z: i32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    points: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFill {
    color: Color,
    #[serde(default = "one")]
    opacity: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestText {
    content: String,
    font_size: f64,
    #[serde(default = "black")]
    color: Color,
    #[serde(default)]
    container_id: Option<String>,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn one() -> f64 {
    1.0
}

fn black() -> Color {
    Color::BLACK
}

/// Parse a JSON manifest. Zero elements is accepted here; use
/// [`super::parse_document`] to reject empty documents.
pub fn parse_manifest(bytes: &[u8]) -> Result<VectorDocument, DocumentError> {
    let manifest: Manifest =
        serde_json::from_slice(bytes).map_err(|e| DocumentError::MalformedInput(e.to_string()))?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(DocumentError::UnsupportedFeature(format!(
            "schema_version {}",
            manifest.schema_version
        )));
    }
    let elements = manifest
        .elements
        .into_iter()
        .map(|e| {
            let [x, y, w, h] = e.bbox;
            DiagramElement {
                id: e.id,
                kind: e.kind,
                bbox: Rect::new(x, y, w, h),
                fill: e.fill.map(|f| Fill {
                    color: f.color,
                    opacity: f.opacity,
                }),
                stroke: e.stroke,
                text: e.text.map(|t| TextPayload {
                    content: t.content,
                    font_size: t.font_size,
                    color: t.color,
                    container_id: t.container_id,
                }),
                z_order: e.z,
                points: e
                    .points
                    .into_iter()
                    .map(|[x, y]| Point::new(x, y))
                    .collect(),
            }
        })
        .collect();
    VectorDocument::new(
        manifest.canvas.w,
        manifest.canvas.h,
        elements,
        manifest.source_id,
    )
}

fn to_manifest(doc: &VectorDocument) -> Manifest {
    Manifest {
        schema_version: SCHEMA_VERSION,
        source_id: doc.source_id().to_string(),
        canvas: Canvas {
            w: doc.canvas_width(),
            h: doc.canvas_height(),
        },
        elements: doc
            .elements()
            .iter()
            .map(|e| ManifestElement {
                id: e.id.clone(),
                kind: e.kind,
                bbox: [e.bbox.x, e.bbox.y, e.bbox.w, e.bbox.h],
                fill: e.fill.map(|f| ManifestFill {
                    color: f.color,
                    opacity: f.opacity,
                }),
                stroke: e.stroke,
                text: e.text.as_ref().map(|t| ManifestText {
                    content: t.content.clone(),
                    font_size: t.font_size,
                    color: t.color,
                    container_id: t.container_id.clone(),
                }),
                z: e.z_order,
                points: e.points.iter().map(|p| [p.x, p.y]).collect(),
            })
            .collect(),
    }
}

/// Canonical manifest as a JSON value.
pub fn to_manifest_value(doc: &VectorDocument) -> serde_json::Value {
    serde_json::to_value(to_manifest(doc)).expect("manifest serializes")
}

/// Canonical manifest text (pretty-printed, stable key order).
pub fn to_manifest_json(doc: &VectorDocument) -> String {
    serde_json::to_string_pretty(&to_manifest(doc)).expect("manifest serializes")
}
