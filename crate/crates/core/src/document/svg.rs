//! Reader for a small SVG subset.
//!
//! Supported: `svg`, `g` (flattened; `translate()` transforms and inherited
//! `fill`/`stroke`/`stroke-width`/`font-size`), `rect`, `ellipse`, `line`,
//! `polyline`, `text` (plain character data), plus the non-visual `title`,
//! `desc` and `metadata`. Lines and polylines with `data-kind="connector"`
//! become connectors; `data-container` on a `text` names its container.
//! Everything else is rejected with [`DocumentError::UnsupportedFeature`].

use roxmltree::{Document, Node};

use super::{
    Color, DiagramElement, DocumentError, ElementKind, Fill, Point, Rect, Stroke, TextPayload,
    VectorDocument, LINE_HEIGHT,
};

const REJECTED_ATTRIBUTES: &[&str] = &[
    "filter",
    "clip-path",
    "mask",
    "style",
    "marker-end",
    "marker-start",
];

#[derive(Clone)]
struct Inherited {
    dx: f64,
    dy: f64,
    fill: Option<String>,
    stroke: Option<String>,
    stroke_width: Option<String>,
    font_size: Option<String>,
}

struct Reader {
    elements: Vec<DiagramElement>,
}

pub fn parse_svg(bytes: &[u8]) -> Result<VectorDocument, DocumentError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| DocumentError::MalformedInput(format!("svg is not utf-8: {e}")))?;
    let xml = Document::parse(text).map_err(|e| DocumentError::MalformedInput(e.to_string()))?;
    let root = xml.root_element();
    if root.tag_name().name() != "svg" {
        return Err(DocumentError::MalformedInput(format!(
            "root element is <{}>, expected <svg>",
            root.tag_name().name()
        )));
    }
    let (w, h) = canvas_size(&root)?;
    let base = Inherited {
        dx: 0.0,
        dy: 0.0,
        fill: None,
        stroke: None,
        stroke_width: None,
        font_size: None,
    };
    let mut reader = Reader {
        elements: Vec::new(),
    };
    check_attributes(&root)?;
    for child in root.children().filter(Node::is_element) {
        reader.visit(child, &base)?;
    }
    VectorDocument::new(w, h, reader.elements, root.attribute("id").unwrap_or(""))
}

fn canvas_size(root: &Node) -> Result<(f64, f64), DocumentError> {
    let w = root.attribute("width").map(parse_length).transpose()?;
    let h = root.attribute("height").map(parse_length).transpose()?;
    if let (Some(w), Some(h)) = (w, h) {
        return Ok((w, h));
    }
    if let Some(vb) = root.attribute("viewBox") {
        let nums = parse_numbers(vb)?;
        if nums.len() == 4 {
            return Ok((nums[2], nums[3]));
        }
    }
    Err(DocumentError::MalformedInput(
        "svg needs width/height or a viewBox".into(),
    ))
}

fn parse_length(s: &str) -> Result<f64, DocumentError> {
    let t = s.trim();
    let t = t.strip_suffix("px").unwrap_or(t);
    if t.ends_with('%') || t.ends_with("em") || t.ends_with("pt") {
        return Err(DocumentError::UnsupportedFeature(format!(
            "length unit in '{s}'"
        )));
    }
    t.parse::<f64>()
        .map_err(|_| DocumentError::MalformedInput(format!("bad length '{s}'")))
}

fn parse_numbers(s: &str) -> Result<Vec<f64>, DocumentError> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| DocumentError::MalformedInput(format!("bad number '{t}'")))
        })
        .collect()
}

fn parse_translate(s: &str) -> Result<(f64, f64), DocumentError> {
    let t = s.trim();
    let inner = t
        .strip_prefix("translate(")
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| DocumentError::UnsupportedFeature("transform".into()))?;
    let nums = parse_numbers(inner)?;
    match nums.as_slice() {
        [x] => Ok((*x, 0.0)),
        [x, y] => Ok((*x, *y)),
        _ => Err(DocumentError::MalformedInput(format!(
            "bad translate '{s}'"
        ))),
    }
}

fn check_attributes(node: &Node) -> Result<(), DocumentError> {
    for attr in node.attributes() {
        if REJECTED_ATTRIBUTES.contains(&attr.name()) {
            return Err(DocumentError::UnsupportedFeature(attr.name().to_string()));
        }
    }
    Ok(())
}

fn color_attr(value: &str) -> Result<Option<Color>, DocumentError> {
    if value.trim() == "none" {
        return Ok(None);
    }
    if value.trim_start().starts_with("url(") {
        return Err(DocumentError::UnsupportedFeature("paint server".into()));
    }
    Color::parse(value)
        .map(Some)
        .ok_or_else(|| DocumentError::MalformedInput(format!("bad color '{value}'")))
}

fn opacity_attr(node: &Node, name: &str) -> Result<f64, DocumentError> {
    match node.attribute(name) {
        None => Ok(1.0),
        Some(v) => v
            .trim()
            .parse::<f64>()
            .map(|o| o.clamp(0.0, 1.0))
            .map_err(|_| DocumentError::MalformedInput(format!("bad {name} '{v}'"))),
    }
}

impl Reader {
    fn visit(&mut self, node: Node, inherited: &Inherited) -> Result<(), DocumentError> {
        check_attributes(&node)?;
        let tag = node.tag_name().name();
        let mut ctx = inherited.clone();
        if let Some(tf) = node.attribute("transform") {
            if tag != "g" {
                return Err(DocumentError::UnsupportedFeature("transform".into()));
            }
            let (dx, dy) = parse_translate(tf)?;
            ctx.dx += dx;
            ctx.dy += dy;
        }
        for (name, slot) in [
            ("fill", &mut ctx.fill),
            ("stroke", &mut ctx.stroke),
            ("stroke-width", &mut ctx.stroke_width),
            ("font-size", &mut ctx.font_size),
        ] {
            if let Some(v) = node.attribute(name) {
                *slot = Some(v.to_string());
            }
        }
        match tag {
            "g" => {
                for child in node.children().filter(Node::is_element) {
                    self.visit(child, &ctx)?;
                }
                Ok(())
            }
            "title" | "desc" | "metadata" => Ok(()),
            "rect" => self.shape(node, &ctx, ElementKind::Rect),
            "ellipse" => self.shape(node, &ctx, ElementKind::Ellipse),
            "line" | "polyline" => self.path(node, &ctx, tag),
            "text" => self.text(node, &ctx),
            other => Err(DocumentError::UnsupportedFeature(other.to_string())),
        }
    }

    fn next_id(&self, node: &Node) -> String {
        node.attribute("id")
            .map(str::to_string)
            .unwrap_or_else(|| format!("el-{}", self.elements.len()))
    }

    fn num(node: &Node, name: &str) -> Result<f64, DocumentError> {
        node.attribute(name)
            .map(parse_length)
            .transpose()
            .map(|v| v.unwrap_or(0.0))
    }

    fn stroke(ctx: &Inherited) -> Result<Option<Stroke>, DocumentError> {
        let Some(color) = ctx.stroke.as_deref().map(color_attr).transpose()?.flatten() else {
            return Ok(None);
        };
        let width = ctx
            .stroke_width
            .as_deref()
            .map(parse_length)
            .transpose()?
            .unwrap_or(1.0);
        Ok(Some(Stroke { color, width }))
    }

    fn push(&mut self, el: DiagramElement) {
        let mut el = el;
        el.z_order = self.elements.len() as i32;
        self.elements.push(el);
    }

    fn shape(
        &mut self,
        node: Node,
        ctx: &Inherited,
        kind: ElementKind,
    ) -> Result<(), DocumentError> {
        let bbox = match kind {
            ElementKind::Ellipse => {
                let (cx, cy) = (Self::num(&node, "cx")?, Self::num(&node, "cy")?);
                let (rx, ry) = (Self::num(&node, "rx")?, Self::num(&node, "ry")?);
                Rect::new(cx - rx + ctx.dx, cy - ry + ctx.dy, 2.0 * rx, 2.0 * ry)
            }
            _ => Rect::new(
                Self::num(&node, "x")? + ctx.dx,
                Self::num(&node, "y")? + ctx.dy,
                Self::num(&node, "width")?,
                Self::num(&node, "height")?,
            ),
        };
        // SVG paints shapes black when no fill is given.
        let fill_color = match ctx.fill.as_deref() {
            Some(v) => color_attr(v)?,
            None => Some(Color::BLACK),
        };
        let opacity = opacity_attr(&node, "fill-opacity")? * opacity_attr(&node, "opacity")?;
        let mut el = DiagramElement::new(self.next_id(&node), kind, bbox);
        el.fill = fill_color.map(|color| Fill { color, opacity });
        el.stroke = Self::stroke(ctx)?;
        self.push(el);
        Ok(())
    }

    fn path(&mut self, node: Node, ctx: &Inherited, tag: &str) -> Result<(), DocumentError> {
        let points: Vec<Point> = if tag == "line" {
            vec![
                Point::new(Self::num(&node, "x1")?, Self::num(&node, "y1")?),
                Point::new(Self::num(&node, "x2")?, Self::num(&node, "y2")?),
            ]
        } else {
            let nums = parse_numbers(node.attribute("points").unwrap_or(""))?;
            if nums.len() < 4 || nums.len() % 2 != 0 {
                return Err(DocumentError::MalformedInput(
                    "polyline needs at least two coordinate pairs".into(),
                ));
            }
            nums.chunks(2).map(|c| Point::new(c[0], c[1])).collect()
        };
        let points = points
            .into_iter()
            .map(|p| Point::new(p.x + ctx.dx, p.y + ctx.dy))
            .collect();
        let kind = match (node.attribute("data-kind"), tag) {
            (Some("connector"), _) => ElementKind::Connector,
            (_, "line") => ElementKind::Line,
            _ => ElementKind::Polyline,
        };
        let mut el = DiagramElement::path(self.next_id(&node), kind, points);
        // SVG lines are invisible without a stroke.
        let Some(stroke) = Self::stroke(ctx)? else {
            return Err(DocumentError::MalformedInput(format!(
                "<{tag}> '{}' has no stroke",
                el.id
            )));
        };
        el.stroke = Some(stroke);
        self.push(el);
        Ok(())
    }

    fn text(&mut self, node: Node, ctx: &Inherited) -> Result<(), DocumentError> {
        if let Some(child) = node.children().find(Node::is_element) {
            return Err(DocumentError::UnsupportedFeature(
                child.tag_name().name().to_string(),
            ));
        }
        let content: String = node.children().filter_map(|c| c.text()).collect();
        let font_size = ctx
            .font_size
            .as_deref()
            .map(parse_length)
            .transpose()?
            .unwrap_or(16.0);
        let color = match ctx.fill.as_deref() {
            Some(v) => color_attr(v)?.unwrap_or(Color::BLACK),
            None => Color::BLACK,
        };
        let payload = TextPayload {
            content: content.trim().to_string(),
            font_size,
            color,
            container_id: node.attribute("data-container").map(str::to_string),
        };
        let (w, h) = payload.estimated_extent();
        let x = Self::num(&node, "x")? + ctx.dx;
        let baseline = Self::num(&node, "y")? + ctx.dy;
        let left = match node.attribute("text-anchor") {
            Some("middle") => x - w / 2.0,
            Some("end") => x - w,
            _ => x,
        };
        // Ascent is one font size above the baseline.
        let top = baseline - h / LINE_HEIGHT;
        let el = DiagramElement::text_box(self.next_id(&node), Rect::new(left, top, w, h), payload);
        self.push(el);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::{parse_document, InputFormat};

    fn parse(s: &str) -> Result<VectorDocument, DocumentError> {
        parse_document(s.as_bytes(), InputFormat::SvgSubset)
    }

    #[test]
    fn reads_basic_shapes_in_document_order() {
        let doc = parse(
            r##"<svg xmlns="http://www.w3.org/2000/svg" width="200" height="100">
                <title>t</title>
                <rect id="a" x="10" y="10" width="50" height="30" fill="#ff0000"/>
                <g transform="translate(100, 5)" stroke="black">
                    <ellipse id="e" cx="20" cy="20" rx="10" ry="5" fill="none"/>
                    <line id="c" x1="0" y1="0" x2="10" y2="0" data-kind="connector"/>
                </g>
                <text id="t" x="10" y="80" font-size="10">Encoder</text>
            </svg>"##,
        )
        .unwrap();
        assert_eq!(doc.element_count(), 4);
        let ids: Vec<_> = doc.elements().iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["a", "e", "c", "t"]);
        let e = &doc.elements()[1];
        assert_eq!(e.bbox, Rect::new(110.0, 20.0, 20.0, 10.0));
        assert!(e.fill.is_none());
        assert!(e.stroke.is_some());
        assert_eq!(doc.elements()[2].kind, ElementKind::Connector);
        assert_eq!(doc.elements()[2].points[0], Point::new(100.0, 5.0));
        let t = &doc.elements()[3];
        assert_eq!(t.text.as_ref().unwrap().content, "Encoder");
        assert!((t.bbox.w - 42.0).abs() < 1e-9);
    }

    #[test]
    fn filter_is_rejected_by_name() {
        let err = parse(
            r#"<svg width="10" height="10"><filter id="f"/><rect width="1" height="1"/></svg>"#,
        )
        .unwrap_err();
        assert_eq!(err, DocumentError::UnsupportedFeature("filter".into()));
        let err = parse(
            r#"<svg width="10" height="10"><rect width="1" height="1" filter="url(#f)"/></svg>"#,
        )
        .unwrap_err();
        assert_eq!(err, DocumentError::UnsupportedFeature("filter".into()));
    }

    #[test]
    fn other_unsupported_features() {
        let cases = [
            (
                r#"<svg width="10" height="10"><circle r="1"/></svg>"#,
                "circle",
            ),
            (
                r#"<svg width="10" height="10"><path d="M0 0"/></svg>"#,
                "path",
            ),
            (
                r#"<svg width="10" height="10"><g transform="rotate(4)"><rect/></g></svg>"#,
                "transform",
            ),
            (
                r#"<svg width="10" height="10"><text>a<tspan>b</tspan></text></svg>"#,
                "tspan",
            ),
        ];
        for (src, feature) in cases {
            assert_eq!(
                parse(src).unwrap_err(),
                DocumentError::UnsupportedFeature(feature.into()),
                "{src}"
            );
        }
    }

    #[test]
    fn viewbox_and_malformed() {
        let doc = parse(r#"<svg viewBox="0 0 30 20"><rect width="1" height="1"/></svg>"#).unwrap();
        assert_eq!((doc.canvas_width(), doc.canvas_height()), (30.0, 20.0));
        assert!(matches!(
            parse("<svg"),
            Err(DocumentError::MalformedInput(_))
        ));
        assert_eq!(
            parse(r#"<svg width="1" height="1"></svg>"#).unwrap_err(),
            DocumentError::EmptyDocument
        );
    }
}
