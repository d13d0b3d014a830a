//! Independent reference implementations and random-input generators.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use diagscore::document::{
    Color, DiagramElement, ElementKind, Point, Rect, TextPayload, VectorDocument,
};
use diagscore::registry::CorpusItem;
use diagscore::Mode;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `|P ∩ G|` by nested scan.
pub fn naive_intersection(p: &[String], g: &[String]) -> usize {
    let mut hits = 0;
    for a in p {
        for b in g {
            if a == b {
                hits += 1;
                break;
            }
        }
    }
    hits
}

pub fn random_token_set(rng: &mut ChaCha8Rng, alphabet: usize, max_len: usize) -> Vec<String> {
    let len = rng.random_range(0..=max_len);
    let mut out: Vec<String> = Vec::new();
    for _ in 0..len {
        let t = format!("tok{}", rng.random_range(0..alphabet));
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

pub fn as_set(v: &[String]) -> BTreeSet<String> {
    v.iter().cloned().collect()
}

/// (kind, sorted element ids) for one expected design error.
pub type ErrorKey = (&'static str, Vec<String>);

fn inter_area(a: &Rect, b: &Rect) -> f64 {
    let w = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let h = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if w > 0.0 && h > 0.0 {
        w * h
    } else {
        0.0
    }
}

fn dist_to_box(r: &Rect, p: Point) -> f64 {
    let dx = if p.x < r.x {
        r.x - p.x
    } else if p.x > r.x + r.w {
        p.x - (r.x + r.w)
    } else {
        0.0
    };
    let dy = if p.y < r.y {
        r.y - p.y
    } else if p.y > r.y + r.h {
        p.y - (r.y + r.h)
    } else {
        0.0
    };
    (dx * dx + dy * dy).sqrt()
}

fn pair(a: &str, b: &str) -> Vec<String> {
    let mut v = vec![a.to_string(), b.to_string()];
    v.sort();
    v
}

/// Brute-force design-error checker: every ordered pair is visited, each
/// unordered pair counted once.
pub fn naive_design_errors(
    doc: &VectorDocument,
    overlap_fraction: f64,
    snap: f64,
) -> Vec<ErrorKey> {
    let els = doc.elements();
    let (cw, ch) = (doc.canvas_width(), doc.canvas_height());
    let mut out = Vec::new();
    let solid = |e: &DiagramElement| {
        matches!(e.kind, ElementKind::Rect | ElementKind::Ellipse)
            && e.fill.map(|f| f.opacity >= 1.0).unwrap_or(false)
    };
    for i in 0..els.len() {
        for j in 0..els.len() {
            if i >= j {
                continue;
            }
            let (a, b) = (&els[i], &els[j]);
            if solid(a) && solid(b) {
                let smaller = (a.bbox.w * a.bbox.h).min(b.bbox.w * b.bbox.h);
                if smaller > 0.0 && inter_area(&a.bbox, &b.bbox) > overlap_fraction * smaller {
                    out.push(("overlap", pair(&a.id, &b.id)));
                }
            }
            let ta = a.text.as_ref().map(|t| t.content.as_str());
            let tb = b.text.as_ref().map(|t| t.content.as_str());
            if a.kind == b.kind && a.bbox == b.bbox && ta == tb {
                out.push(("duplicate", pair(&a.id, &b.id)));
            }
        }
    }
    for e in els {
        let b = &e.bbox;
        if b.x < 0.0 || b.y < 0.0 || b.x + b.w > cw || b.y + b.h > ch {
            out.push(("off_canvas", vec![e.id.clone()]));
        }
        if let Some(t) = &e.text {
            let container = t
                .container_id
                .as_ref()
                .and_then(|id| els.iter().find(|o| &o.id == id))
                .map(|o| o.bbox)
                .unwrap_or(e.bbox);
            let need_w = 0.6 * t.font_size * t.content.chars().count() as f64;
            let need_h = 1.2 * t.font_size;
            if need_w > container.w || need_h > container.h {
                out.push(("text_overflow", vec![e.id.clone()]));
            }
        }
        if e.kind == ElementKind::Connector {
            let ends = if e.points.len() >= 2 {
                [e.points[0], e.points[e.points.len() - 1]]
            } else {
                [Point::new(b.x, b.y), Point::new(b.x + b.w, b.y + b.h)]
            };
            for p in ends {
                let attached = els.iter().any(|o| {
                    o.id != e.id
                        && !matches!(
                            o.kind,
                            ElementKind::Line | ElementKind::Polyline | ElementKind::Connector
                        )
                        && dist_to_box(&o.bbox, p) <= snap
                });
                if !attached {
                    out.push(("dangling_connector", vec![e.id.clone()]));
                }
            }
        }
    }
    out.sort();
    out
}

pub fn kind_name(k: diagscore::perceptual::ErrorKind) -> &'static str {
    use diagscore::perceptual::ErrorKind::*;
    match k {
        Overlap => "overlap",
        OffCanvas => "off_canvas",
        TextOverflow => "text_overflow",
        Duplicate => "duplicate",
        DanglingConnector => "dangling_connector",
    }
}

pub fn report_keys(report: &diagscore::perceptual::ErrorReport) -> Vec<ErrorKey> {
    let mut v: Vec<ErrorKey> = report
        .errors
        .iter()
        .map(|e| (kind_name(e.kind), e.element_ids.clone()))
        .collect();
    v.sort();
    v
}

const WORDS: [&str; 8] = [
    "enc",
    "decoder",
    "Loss",
    "attn",
    "x",
    "GRU cell",
    "softmax(z)",
    "Σ",
];

/// Random layout on a 400×300 canvas on a coarse integer lattice, so that
/// touching edges, exact duplicates and boundary snaps occur often.
pub fn random_layout(rng: &mut ChaCha8Rng) -> VectorDocument {
    let count = rng.random_range(2..=14);
    let mut els: Vec<DiagramElement> = Vec::with_capacity(count);
    for i in 0..count {
        let id = format!("e{i}");
        let roll = rng.random_range(0..100);
        let x = f64::from(rng.random_range(-2..=42)) * 10.0;
        let y = f64::from(rng.random_range(-2..=32)) * 10.0;
        let w = f64::from(rng.random_range(1..=12)) * 10.0;
        let h = f64::from(rng.random_range(1..=8)) * 10.0;
        let r = Rect::new(x, y, w, h);
        let mut el = if roll < 8 && !els.is_empty() {
            let src = els[rng.random_range(0..els.len())].clone();
            DiagramElement { id, ..src }
        } else if roll < 45 {
            DiagramElement::rect(id, r)
        } else if roll < 58 {
            DiagramElement::new(id, ElementKind::Ellipse, r)
        } else if roll < 78 {
            let word = WORDS[rng.random_range(0..WORDS.len())];
            let fs = [4.0, 8.0, 12.0, 16.0][rng.random_range(0..4)];
            let mut t = TextPayload::new(word, fs);
            if rng.random_bool(0.3) && !els.is_empty() {
                t.container_id = Some(els[rng.random_range(0..els.len())].id.clone());
            }
            DiagramElement::text_box(id, r, t)
        } else {
            let end = |rng: &mut ChaCha8Rng, els: &[DiagramElement]| -> Point {
                if !els.is_empty() && rng.random_bool(0.6) {
                    let o = &els[rng.random_range(0..els.len())].bbox;
                    let off = f64::from(rng.random_range(0..=8));
                    Point::new(o.x + o.w + off, o.y + o.h / 2.0)
                } else {
                    Point::new(
                        f64::from(rng.random_range(0..=40)) * 10.0,
                        f64::from(rng.random_range(0..=30)) * 10.0,
                    )
                }
            };
            let a = end(rng, &els);
            let b = end(rng, &els);
            DiagramElement::path(id, ElementKind::Connector, vec![a, b])
        };
        if !el.kind.is_linear() && el.fill.is_none() {
            match rng.random_range(0..3) {
                0 => el = el.with_fill(Color::rgb(200, 210, 255)),
                1 => el = el.with_fill_opacity(Color::rgb(90, 90, 90), 0.5),
                _ => {}
            }
        }
        el.z_order = rng.random_range(0..3);
        els.push(el);
    }
    VectorDocument::new(400.0, 300.0, els, "random").expect("generated layout is valid")
}

pub fn shuffled(doc: &VectorDocument, rng: &mut ChaCha8Rng) -> VectorDocument {
    let mut els = doc.elements().to_vec();
    els.shuffle(rng);
    VectorDocument::new(
        doc.canvas_width(),
        doc.canvas_height(),
        els,
        doc.source_id(),
    )
    .unwrap()
}

pub fn corpus_item(id: &str, mode: Mode, element_count: u32) -> CorpusItem {
    CorpusItem {
        id: id.to_string(),
        mode,
        element_count,
        description: format!("diagram task {id}"),
        reference_image: (mode == Mode::TI2I).then(|| format!("refs/{id}.png").into()),
        required_text: BTreeSet::new(),
        license_url: "https://creativecommons.org/licenses/by/4.0/".into(),
        added_at: NaiveDate::from_ymd_opt(2025, 3, 1).unwrap(),
    }
}

/// `per_mode` items of each mode with difficulties spread over 5..=60.
pub fn corpus_items(prefix: &str, per_mode: usize, seed: u64) -> Vec<CorpusItem> {
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(2 * per_mode);
    for i in 0..per_mode {
        out.push(corpus_item(
            &format!("{prefix}-t2i-{i:04}"),
            Mode::T2I,
            r.random_range(5..=50),
        ));
        out.push(corpus_item(
            &format!("{prefix}-ti2i-{i:04}"),
            Mode::TI2I,
            r.random_range(8..=60),
        ));
    }
    out
}
