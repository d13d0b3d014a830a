//! Perceptual metrics: design errors and readability.
//!
//! Both have a deterministic geometric checker here. The judge-backed design
//! count lives in [`crate::judge`]; readability is deterministic only.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::document::{
    normalize_text, DiagramElement, ElementKind, Point, RasterGrid, Rect, VectorDocument,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptualError {
    #[error("design error count must be non-negative, got {0}")]
    NegativeCount(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Overlap,
    OffCanvas,
    TextOverflow,
    Duplicate,
    DanglingConnector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignError {
    pub kind: ErrorKind,
    pub element_ids: Vec<String>,
    pub detail: String,
}

/// Where an error count came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ErrorSource {
    Deterministic,
    Judge { model: String, runs: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub errors: Vec<DesignError>,
    /// `e`: error count, or the mean of judge run counts.
    pub count_e: f64,
    pub source: ErrorSource,
}

impl ErrorReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("error report serializes")
    }
}

/// Thresholds of the deterministic design-error checker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorThresholds {
    /// Overlap area, as a fraction of the smaller bbox, above which two
    /// opaque shapes conflict.
    pub overlap_fraction: f64,
    /// Maximum distance (document units) from a connector endpoint to the
    /// nearest element bbox.
    pub connector_snap: f64,
}

impl Default for DetectorThresholds {
    fn default() -> Self {
        DetectorThresholds {
            overlap_fraction: 0.02,
            connector_snap: 5.0,
        }
    }
}

pub fn detect_design_errors(doc: &VectorDocument) -> ErrorReport {
    detect_design_errors_with(doc, &DetectorThresholds::default())
}

fn is_opaque_shape(e: &DiagramElement) -> bool {
    e.kind.is_area_shape() && e.fill.is_some_and(|f| f.is_opaque())
}

/// Container bbox for a text: the named container if it exists, else the
/// carrying element's own bbox.
fn text_container<'a>(doc: &'a VectorDocument, el: &'a DiagramElement) -> &'a Rect {
    el.text
        .as_ref()
        .and_then(|t| t.container_id.as_deref())
        .and_then(|id| doc.element(id))
        .map(|c| &c.bbox)
        .unwrap_or(&el.bbox)
}

fn sorted_pair(a: &str, b: &str) -> Vec<String> {
    if a <= b {
        vec![a.to_string(), b.to_string()]
    } else {
        vec![b.to_string(), a.to_string()]
    }
}

/// Deterministic design-error detection.
///
/// One error per: overlapping pair of opaque filled shapes; element leaving
/// the canvas; text whose estimated extent exceeds its container; pair of
/// identical elements (kind, bbox and text); dangling connector endpoint.
/// Errors are reported in a canonical order so the report does not depend on
/// element order.
pub fn detect_design_errors_with(doc: &VectorDocument, th: &DetectorThresholds) -> ErrorReport {
    let els = doc.elements();
    let canvas = doc.canvas();
    let mut errors = Vec::new();

    for (i, a) in els.iter().enumerate() {
        for b in &els[i + 1..] {
            if is_opaque_shape(a) && is_opaque_shape(b) {
                if let Some(inter) = a.bbox.intersection(&b.bbox) {
                    let smaller = a.bbox.area().min(b.bbox.area());
                    if smaller > 0.0 && inter.area() > th.overlap_fraction * smaller {
                        errors.push(DesignError {
                            kind: ErrorKind::Overlap,
                            element_ids: sorted_pair(&a.id, &b.id),
                            detail: format!(
                                "overlap covers {:.1}% of the smaller shape",
                                100.0 * inter.area() / smaller
                            ),
                        });
                    }
                }
            }
            let same_text =
                a.text.as_ref().map(|t| &t.content) == b.text.as_ref().map(|t| &t.content);
            if a.kind == b.kind && a.bbox == b.bbox && same_text {
                errors.push(DesignError {
                    kind: ErrorKind::Duplicate,
                    element_ids: sorted_pair(&a.id, &b.id),
                    detail: "identical kind, bbox and text".into(),
                });
            }
        }
    }

    for el in els {
        let b = &el.bbox;
        if b.x < canvas.x
            || b.y < canvas.y
            || b.right() > canvas.right()
            || b.bottom() > canvas.bottom()
        {
            errors.push(DesignError {
                kind: ErrorKind::OffCanvas,
                element_ids: vec![el.id.clone()],
                detail: format!("bbox ({}, {}, {}, {}) exits the canvas", b.x, b.y, b.w, b.h),
            });
        }
        if let Some(text) = &el.text {
            let (tw, th_) = text.estimated_extent();
            let container = text_container(doc, el);
            if tw > container.w || th_ > container.h {
                errors.push(DesignError {
                    kind: ErrorKind::TextOverflow,
                    element_ids: vec![el.id.clone()],
                    detail: format!(
                        "text needs {tw:.1}x{th_:.1}, container is {:.1}x{:.1}",
                        container.w, container.h
                    ),
                });
            }
        }
        if el.kind == ElementKind::Connector {
            let pts = el.path_points();
            let ends = [("start", pts[0]), ("end", pts[pts.len() - 1])];
            for (label, p) in ends {
                if !endpoint_attached(els, el, p, th.connector_snap) {
                    errors.push(DesignError {
                        kind: ErrorKind::DanglingConnector,
                        element_ids: vec![el.id.clone()],
                        detail: format!("{label} point ({}, {}) attaches to nothing", p.x, p.y),
                    });
                }
            }
        }
    }

    errors.sort_by(|a, b| {
        (a.kind, &a.element_ids, &a.detail).cmp(&(b.kind, &b.element_ids, &b.detail))
    });
    let count_e = errors.len() as f64;
    ErrorReport {
        errors,
        count_e,
        source: ErrorSource::Deterministic,
    }
}

fn endpoint_attached(
    els: &[DiagramElement],
    connector: &DiagramElement,
    p: Point,
    snap: f64,
) -> bool {
    els.iter()
        .filter(|o| o.id != connector.id && !o.kind.is_linear())
        .any(|o| o.bbox.distance_to(p) <= snap)
}

/// `1 / (1 + 2e)`; `e` may be fractional (judge averages).
pub fn design_score(e: f64) -> Result<f64, PerceptualError> {
    if !(e >= 0.0) {
        return Err(PerceptualError::NegativeCount(e));
    }
    Ok(1.0 / (1.0 + 2.0 * e))
}

/// Thresholds of the deterministic readability checker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadabilityRules {
    /// Minimum rendered font size in raster pixels.
    pub min_font_px: f64,
    /// Minimum luminance difference (0..=255) between text and backing.
    pub min_contrast: f64,
    /// Maximum fraction of the text area covered by higher opaque shapes.
    pub max_occlusion: f64,
}

impl Default for ReadabilityRules {
    fn default() -> Self {
        ReadabilityRules {
            min_font_px: 6.0,
            min_contrast: 64.0,
            max_occlusion: 0.30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnreadableReason {
    SmallFont,
    LowContrast,
    Occluded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextVerdict {
    pub element_id: String,
    pub string: String,
    pub readable: bool,
    pub font_px: f64,
    pub contrast: f64,
    pub occlusion: f64,
    pub reasons: Vec<UnreadableReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadabilityReport {
    /// `R`: normalized strings with at least one readable occurrence.
    pub readable: BTreeSet<String>,
    pub per_text: Vec<TextVerdict>,
}

pub fn assess_readability(doc: &VectorDocument, grid: &RasterGrid) -> ReadabilityReport {
    assess_readability_with(doc, grid, &ReadabilityRules::default())
}

/// Area of `target` covered by the union of `covers` (bbox geometry).
pub(crate) fn covered_area(target: &Rect, covers: &[Rect]) -> f64 {
    let clipped: Vec<Rect> = covers
        .iter()
        .filter_map(|c| c.intersection(target))
        .collect();
    if clipped.is_empty() {
        return 0.0;
    }
    let mut xs: Vec<f64> = clipped.iter().flat_map(|r| [r.x, r.right()]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut area = 0.0;
    for win in xs.windows(2) {
        let (x0, x1) = (win[0], win[1]);
        let mut spans: Vec<(f64, f64)> = clipped
            .iter()
            .filter(|r| r.x <= x0 && r.right() >= x1)
            .map(|r| (r.y, r.bottom()))
            .collect();
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut covered = 0.0;
        let mut cur: Option<(f64, f64)> = None;
        for (s, e) in spans {
            cur = match cur {
                Some((cs, ce)) if s <= ce => Some((cs, ce.max(e))),
                Some((cs, ce)) => {
                    covered += ce - cs;
                    Some((s, e))
                }
                None => Some((s, e)),
            };
        }
        if let Some((cs, ce)) = cur {
            covered += ce - cs;
        }
        area += covered * (x1 - x0);
    }
    area
}

/// Deterministic readability check. A text is readable when its rendered
/// font size, its contrast against the backing fill and its occlusion by
/// later-painted opaque shapes all pass `rules`.
///
/// The backing is the last-painted filled element (the text's own element
/// included) at or below the text whose bbox holds the text-area centre,
/// composited over white; with none, the canvas white.
pub fn assess_readability_with(
    doc: &VectorDocument,
    grid: &RasterGrid,
    rules: &ReadabilityRules,
) -> ReadabilityReport {
    let els = doc.elements();
    let scale =
        grid.width().min(grid.height()) as f64 / doc.canvas_width().min(doc.canvas_height());
    let order = doc.paint_order();
    let mut rank = vec![0usize; els.len()];
    for (pos, &idx) in order.iter().enumerate() {
        rank[idx] = pos;
    }

    let mut per_text = Vec::new();
    let mut readable = BTreeSet::new();
    for (idx, el) in els.iter().enumerate() {
        let (Some(text), Some(area)) = (el.text.as_ref(), el.text_area()) else {
            continue;
        };
        let string = normalize_text(&text.content);
        if string.is_empty() {
            continue;
        }
        let font_px = text.font_size * scale;
        let center = area.center();
        let backing = order[..=rank[idx]]
            .iter()
            .rev()
            .map(|&i| &els[i])
            .find(|o| o.fill.is_some() && !o.kind.is_linear() && o.bbox.contains(center))
            .and_then(|o| o.fill)
            .map(|f| f.composite_luminance())
            .unwrap_or(255.0);
        let contrast = (text.color.luminance() - backing).abs();
        let covers: Vec<Rect> = order[rank[idx] + 1..]
            .iter()
            .map(|&i| &els[i])
            .filter(|o| !o.kind.is_linear() && o.fill.is_some_and(|f| f.is_opaque()))
            .map(|o| o.bbox)
            .collect();
        let occlusion = if area.area() > 0.0 {
            covered_area(&area, &covers) / area.area()
        } else {
            1.0
        };
        let mut reasons = Vec::new();
        if font_px < rules.min_font_px {
            reasons.push(UnreadableReason::SmallFont);
        }
        if contrast < rules.min_contrast {
            reasons.push(UnreadableReason::LowContrast);
        }
        if occlusion > rules.max_occlusion {
            reasons.push(UnreadableReason::Occluded);
        }
        let ok = reasons.is_empty();
        if ok {
            readable.insert(string.clone());
        }
        per_text.push(TextVerdict {
            element_id: el.id.clone(),
            string,
            readable: ok,
            font_px,
            contrast,
            occlusion,
            reasons,
        });
    }
    ReadabilityReport { readable, per_text }
}

/// `|R ∩ G| / |G|`; 1 when `G` is empty.
pub fn readability_score(report: &ReadabilityReport, generated: &BTreeSet<String>) -> f64 {
    if generated.is_empty() {
        return 1.0;
    }
    report.readable.intersection(generated).count() as f64 / generated.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::{rasterize, Color, TextPayload};

    fn doc(els: Vec<DiagramElement>) -> VectorDocument {
        VectorDocument::new(200.0, 100.0, els, "").unwrap()
    }

    fn filled(id: &str, r: Rect) -> DiagramElement {
        DiagramElement::rect(id, r).with_fill(Color::gray(200))
    }

    #[test]
    fn disjoint_rects_have_no_errors() {
        let d = doc(vec![
            filled("a", Rect::new(0.0, 0.0, 20.0, 20.0)),
            filled("b", Rect::new(30.0, 0.0, 20.0, 20.0)),
        ]);
        assert_eq!(detect_design_errors(&d).count_e, 0.0);
    }

    #[test]
    fn off_canvas_plus_overlap_is_two() {
        let d = doc(vec![
            filled("off", Rect::new(300.0, 10.0, 20.0, 20.0)),
            filled("a", Rect::new(0.0, 0.0, 20.0, 20.0)),
            filled("b", Rect::new(10.0, 10.0, 20.0, 20.0)),
        ]);
        let r = detect_design_errors(&d);
        assert_eq!(r.count_e, 2.0);
        let kinds: Vec<_> = r.errors.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, [ErrorKind::Overlap, ErrorKind::OffCanvas]);
    }

    #[test]
    fn small_overlap_and_transparent_shapes_are_tolerated() {
        // 1x20 sliver over a 20x20 rect = 5% > 2%; 0.2x20 = 1% is fine.
        let sliver = doc(vec![
            filled("a", Rect::new(0.0, 0.0, 20.0, 20.0)),
            filled("b", Rect::new(19.8, 0.0, 20.0, 20.0)),
        ]);
        assert_eq!(detect_design_errors(&sliver).count_e, 0.0);
        let ghost = doc(vec![
            filled("a", Rect::new(0.0, 0.0, 20.0, 20.0)),
            DiagramElement::rect("b", Rect::new(5.0, 5.0, 20.0, 20.0))
                .with_fill_opacity(Color::BLACK, 0.5),
        ]);
        assert_eq!(detect_design_errors(&ghost).count_e, 0.0);
    }

    #[test]
    fn text_overflow_and_duplicates_and_connectors() {
        let long = DiagramElement::rect("box", Rect::new(0.0, 0.0, 30.0, 20.0))
            .with_fill(Color::WHITE)
            .with_text(TextPayload::new("a very long label", 10.0));
        let dup_a = DiagramElement::rect("d1", Rect::new(100.0, 50.0, 10.0, 10.0));
        let dup_b = DiagramElement::rect("d2", Rect::new(100.0, 50.0, 10.0, 10.0));
        let conn = DiagramElement::path(
            "c",
            ElementKind::Connector,
            vec![Point::new(33.0, 10.0), Point::new(80.0, 90.0)],
        );
        let r = detect_design_errors(&doc(vec![long, dup_a, dup_b, conn]));
        let kinds: Vec<_> = r.errors.iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            [
                ErrorKind::TextOverflow,
                ErrorKind::Duplicate,
                ErrorKind::DanglingConnector
            ]
        );
        assert!(r.errors[2].detail.starts_with("end"));
    }

    #[test]
    fn design_score_formula() {
        assert_eq!(design_score(0.0).unwrap(), 1.0);
        assert_eq!(design_score(2.0).unwrap(), 0.2);
        assert_eq!(design_score(0.5).unwrap(), 0.5);
        assert_eq!(
            design_score(-1.0),
            Err(PerceptualError::NegativeCount(-1.0))
        );
    }

    #[test]
    fn lone_black_text_is_readable() {
        let d = doc(vec![DiagramElement::text_box(
            "t",
            Rect::new(10.0, 10.0, 60.0, 15.0),
            TextPayload::new("Encoder", 12.0),
        )]);
        let g = rasterize(&d, 1024).unwrap();
        let rep = assess_readability(&d, &g);
        assert!(rep.per_text[0].readable);
        assert!(rep.readable.contains("encoder"));
    }

    #[test]
    fn covered_text_is_occluded() {
        let d = doc(vec![
            DiagramElement::text_box(
                "t",
                Rect::new(10.0, 10.0, 60.0, 15.0),
                TextPayload::new("x", 12.0),
            ),
            filled("lid", Rect::new(0.0, 0.0, 100.0, 50.0)).with_z(5),
        ]);
        let g = rasterize(&d, 1024).unwrap();
        let v = &assess_readability(&d, &g).per_text[0];
        assert!(!v.readable);
        assert_eq!(v.occlusion, 1.0);
        assert_eq!(v.reasons, [UnreadableReason::Occluded]);
    }

    #[test]
    fn tiny_and_low_contrast_text() {
        let tiny = DiagramElement::text_box(
            "a",
            Rect::new(0.0, 0.0, 10.0, 5.0),
            TextPayload::new("a", 0.5),
        );
        let mut pale = TextPayload::new("b", 12.0);
        pale.color = Color::gray(220);
        let pale = DiagramElement::text_box("b", Rect::new(0.0, 50.0, 10.0, 15.0), pale);
        let d = doc(vec![tiny, pale]);
        let g = rasterize(&d, 1024).unwrap();
        let rep = assess_readability(&d, &g);
        assert_eq!(rep.per_text[0].reasons, [UnreadableReason::SmallFont]);
        assert_eq!(rep.per_text[1].reasons, [UnreadableReason::LowContrast]);
        assert!(rep.readable.is_empty());
    }

    #[test]
    fn readability_score_cases() {
        let g: BTreeSet<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let rep = ReadabilityReport {
            readable: ["a", "b", "c", "zz"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            per_text: vec![],
        };
        assert_eq!(readability_score(&rep, &g), 0.75);
        assert_eq!(readability_score(&rep, &BTreeSet::new()), 1.0);
    }

    #[test]
    fn union_area_of_overlapping_covers() {
        let t = Rect::new(0.0, 0.0, 10.0, 10.0);
        let covers = [
            Rect::new(0.0, 0.0, 5.0, 10.0),
            Rect::new(3.0, 0.0, 5.0, 5.0),
        ];
        assert!((covered_area(&t, &covers) - 65.0).abs() < 1e-12);
    }
}
