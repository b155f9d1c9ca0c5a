//! Reader for kanjiVG SVG files.
//!
//! The output mirrors the file: groups nest as they do in the document and
//! strokes are numbered in document order. Repairs happen later in
//! [`crate::decomposition`].

use serde::{Deserialize, Serialize};
use svgtypes::{PathParser, PathSegment};

use crate::error::{Error, Result};
use crate::geometry::{CubicBezier, Point, SOURCE_CANVAS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    /// 1-based stroke number.
    pub index: usize,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub type_tag: Option<String>,
    /// Segments in kanjiVG source coordinates.
    #[serde(with = "bezier_rows")]
    pub beziers: Vec<CubicBezier>,
}

impl Stroke {
    /// The path mapped to the unit canvas.
    pub fn unit_path(&self) -> Vec<CubicBezier> {
        self.beziers
            .iter()
            .map(|c| c.map(|p| Point::new(p.x / SOURCE_CANVAS, p.y / SOURCE_CANVAS)))
            .collect()
    }
}

/// Beziers are stored as flat `[x0,y0,x1,y1,x2,y2,x3,y3]` rows.
mod bezier_rows {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[CubicBezier], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<[f64; 8]> = v
            .iter()
            .map(|c| [c.p0.x, c.p0.y, c.p1.x, c.p1.y, c.p2.x, c.p2.y, c.p3.x, c.p3.y])
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CubicBezier>, D::Error> {
        let rows = Vec::<[f64; 8]>::deserialize(d)?;
        Ok(rows
            .into_iter()
            .map(|r| {
                CubicBezier::new(
                    Point::new(r[0], r[1]),
                    Point::new(r[2], r[3]),
                    Point::new(r[4], r[5]),
                    Point::new(r[6], r[7]),
                )
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawChild {
    Group(RawGroup),
    /// 1-based index into [`RawKanjiTree::strokes`].
    Stroke(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RawGroup {
    pub id: Option<String>,
    pub element: Option<String>,
    pub original: Option<String>,
    pub part: Option<u32>,
    pub number: Option<u32>,
    pub children: Vec<RawChild>,
}

impl RawGroup {
    /// All stroke indices below this group, in document order.
    pub fn strokes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_strokes(&mut out);
        out
    }

    fn collect_strokes(&self, out: &mut Vec<usize>) {
        for c in &self.children {
            match c {
                RawChild::Stroke(s) => out.push(*s),
                RawChild::Group(g) => g.collect_strokes(out),
            }
        }
    }

    pub fn groups(&self) -> impl Iterator<Item = &RawGroup> {
        self.children.iter().filter_map(|c| match c {
            RawChild::Group(g) => Some(g),
            RawChild::Stroke(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawKanjiTree {
    /// Taken from the `kvg:StrokePaths_xxxxx` / `kvg:xxxxx` ids when present.
    pub codepoint: Option<char>,
    pub root: RawGroup,
    pub strokes: Vec<Stroke>,
}

/// Codepoint encoded in a kanjiVG id such as `kvg:StrokePaths_09854` or
/// `kvg:09854-Kaisho`.
fn codepoint_from_id(id: &str) -> Option<char> {
    let rest = id.strip_prefix("kvg:")?;
    let rest = rest.strip_prefix("StrokePaths_").unwrap_or(rest);
    let hex = rest.split('-').next()?;
    if hex.is_empty() || !hex.chars().all(|c| c.is_ascii_hexdigit()) {
        return None;
    }
    u32::from_str_radix(hex, 16).ok().and_then(char::from_u32)
}

fn attr<'a>(node: roxmltree::Node<'a, '_>, local: &str) -> Option<&'a str> {
    node.attributes().find(|a| a.name() == local).map(|a| a.value())
}

fn parse_number(node: roxmltree::Node, local: &str) -> Result<Option<u32>> {
    match attr(node, local) {
        None => Ok(None),
        Some(v) => v.trim().parse().map(Some).map_err(|_| {
            let pos = node.document().text_pos_at(node.range().start);
            Error::Xml { line: pos.row, message: format!("bad {local} attribute {v:?}") }
        }),
    }
}

/// Converts an SVG path `d` attribute into connected cubic segments.
pub fn parse_path_data(d: &str) -> Result<Vec<CubicBezier>> {
    let mut out = Vec::new();
    let mut cur = Point::default();
    let mut start_seen = false;
    // reflected second control point for S/s
    let mut last_ctrl: Option<Point> = None;
    for seg in PathParser::from(d) {
        let seg = seg.map_err(|e| Error::PathData(e.to_string()))?;
        let mut ctrl = None;
        match seg {
            PathSegment::MoveTo { abs, x, y } => {
                if start_seen {
                    return Err(Error::PathData("stroke path has more than one subpath".into()));
                }
                cur = if abs { Point::new(x, y) } else { Point::new(cur.x + x, cur.y + y) };
                start_seen = true;
            }
            PathSegment::CurveTo { abs, x1, y1, x2, y2, x, y } => {
                let o = if abs { Point::default() } else { cur };
                let p1 = Point::new(o.x + x1, o.y + y1);
                let p2 = Point::new(o.x + x2, o.y + y2);
                let p3 = Point::new(o.x + x, o.y + y);
                out.push(CubicBezier::new(cur, p1, p2, p3));
                ctrl = Some(p2);
                cur = p3;
            }
            PathSegment::SmoothCurveTo { abs, x2, y2, x, y } => {
                let o = if abs { Point::default() } else { cur };
                let p1 = match last_ctrl {
                    Some(c) => Point::new(2.0 * cur.x - c.x, 2.0 * cur.y - c.y),
                    None => cur,
                };
                let p2 = Point::new(o.x + x2, o.y + y2);
                let p3 = Point::new(o.x + x, o.y + y);
                out.push(CubicBezier::new(cur, p1, p2, p3));
                ctrl = Some(p2);
                cur = p3;
            }
            PathSegment::LineTo { abs, x, y } => {
                let p = if abs { Point::new(x, y) } else { Point::new(cur.x + x, cur.y + y) };
                out.push(CubicBezier::line(cur, p));
                cur = p;
            }
            PathSegment::HorizontalLineTo { abs, x } => {
                let p = Point::new(if abs { x } else { cur.x + x }, cur.y);
                out.push(CubicBezier::line(cur, p));
                cur = p;
            }
            PathSegment::VerticalLineTo { abs, y } => {
                let p = Point::new(cur.x, if abs { y } else { cur.y + y });
                out.push(CubicBezier::line(cur, p));
                cur = p;
            }
            other => return Err(Error::UnsupportedPathCommand(command_char(&other))),
        }
        if !start_seen {
            return Err(Error::PathData("path does not start with a moveto".into()));
        }
        last_ctrl = ctrl;
    }
    if out.is_empty() {
        return Err(Error::PathData(format!("path without segments: {d:?}")));
    }
    Ok(out)
}

fn command_char(seg: &PathSegment) -> char {
    let (c, abs) = match *seg {
        PathSegment::MoveTo { abs, .. } => ('m', abs),
        PathSegment::LineTo { abs, .. } => ('l', abs),
        PathSegment::HorizontalLineTo { abs, .. } => ('h', abs),
        PathSegment::VerticalLineTo { abs, .. } => ('v', abs),
        PathSegment::CurveTo { abs, .. } => ('c', abs),
        PathSegment::SmoothCurveTo { abs, .. } => ('s', abs),
        PathSegment::Quadratic { abs, .. } => ('q', abs),
        PathSegment::SmoothQuadratic { abs, .. } => ('t', abs),
        PathSegment::EllipticalArc { abs, .. } => ('a', abs),
        PathSegment::ClosePath { abs } => ('z', abs),
    };
    if abs {
        c.to_ascii_uppercase()
    } else {
        c
    }
}

struct Builder {
    strokes: Vec<Stroke>,
}

impl Builder {
    fn group(&mut self, node: roxmltree::Node) -> Result<RawGroup> {
        let mut g = RawGroup {
            id: attr(node, "id").map(str::to_owned),
            element: attr(node, "element").filter(|s| !s.is_empty()).map(str::to_owned),
            original: attr(node, "original").filter(|s| !s.is_empty()).map(str::to_owned),
            part: parse_number(node, "part")?,
            number: parse_number(node, "number")?,
            children: Vec::new(),
        };
        for child in node.children().filter(roxmltree::Node::is_element) {
            match child.tag_name().name() {
                "g" => {
                    let sub = self.group(child)?;
                    // text-only groups such as stroke numbers carry nothing
                    if !sub.strokes().is_empty() {
                        g.children.push(RawChild::Group(sub));
                    }
                }
                "path" => {
                    let d = attr(child, "d").ok_or_else(|| {
                        let pos = node.document().text_pos_at(child.range().start);
                        Error::Xml { line: pos.row, message: "path without d attribute".into() }
                    })?;
                    let index = self.strokes.len() + 1;
                    self.strokes.push(Stroke {
                        index,
                        type_tag: attr(child, "type").filter(|s| !s.is_empty()).map(str::to_owned),
                        beziers: parse_path_data(d)?,
                    });
                    g.children.push(RawChild::Stroke(index));
                }
                _ => {}
            }
        }
        Ok(g)
    }
}

/// Parses one kanjiVG file.
pub fn parse_kanjivg(svg_text: &str) -> Result<RawKanjiTree> {
    let opts = roxmltree::ParsingOptions { allow_dtd: true, ..Default::default() };
    let doc = roxmltree::Document::parse_with_options(svg_text, opts).map_err(|e| Error::Xml {
        line: e.pos().row,
        message: e.to_string(),
    })?;
    let svg = doc.root_element();
    let stroke_paths = svg.descendants().find(|n| {
        n.has_tag_name("g") && attr(*n, "id").is_some_and(|id| id.starts_with("kvg:StrokePaths"))
    });
    let mut builder = Builder { strokes: Vec::new() };
    let root = builder.group(stroke_paths.unwrap_or(svg))?;
    if builder.strokes.is_empty() {
        return Err(Error::NoStrokes);
    }
    let codepoint = svg
        .descendants()
        .filter(|n| n.has_tag_name("g"))
        .filter_map(|n| attr(n, "id"))
        .find_map(codepoint_from_id);
    Ok(RawKanjiTree { codepoint, root, strokes: builder.strokes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(body: &str) -> String {
        format!(
            r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" xmlns:kvg="https://kanjivg.tagaini.net/" width="109" height="109">
{body}
</svg>"#
        )
    }

    #[test]
    fn minimal_file() {
        let t = parse_kanjivg(&doc(r#"<g><path d="M0,0 C1,1 2,2 3,3"/></g>"#)).unwrap();
        assert_eq!(t.strokes.len(), 1);
        assert_eq!(t.strokes[0].beziers.len(), 1);
        assert_eq!(t.strokes[0].beziers[0].p3, Point::new(3.0, 3.0));
        assert_eq!(t.codepoint, None);
    }

    #[test]
    fn parts_stay_separate_groups() {
        let t = parse_kanjivg(&doc(
            r#"<g id="kvg:StrokePaths_04e00"><g id="kvg:04e00" kvg:element="X">
<g kvg:element="厂" kvg:part="1"><path d="M1,1c1,0 2,0 3,0"/></g>
<g kvg:element="口"><path d="M5,5c1,0 2,0 3,0"/></g>
<g kvg:element="厂" kvg:part="2"><path d="M9,9c1,0 2,0 3,0"/></g>
</g></g>"#,
        ))
        .unwrap();
        assert_eq!(t.codepoint, Some('一'));
        let kanji = t.root.groups().next().unwrap();
        let parts: Vec<_> = kanji.groups().map(|g| (g.element.as_deref(), g.part)).collect();
        assert_eq!(parts, [(Some("厂"), Some(1)), (Some("口"), None), (Some("厂"), Some(2))]);
        assert_eq!(kanji.strokes(), [1, 2, 3]);
    }

    #[test]
    fn relative_and_smooth_commands() {
        let c = parse_path_data("M10,10c1,2 3,4 5,6s7,8 9,10").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].p3, Point::new(15.0, 16.0));
        // reflection of (13,14) about (15,16)
        assert_eq!(c[1].p1, Point::new(17.0, 18.0));
        assert_eq!(c[1].p2, Point::new(22.0, 24.0));
        assert_eq!(c[1].p3, Point::new(24.0, 26.0));
        let a = parse_path_data("M10,10C11,12 13,14 15,16S22,24 24,26").unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn smooth_without_previous_curve_uses_current_point() {
        let c = parse_path_data("M1,1S2,2 3,3").unwrap();
        assert_eq!(c[0].p1, Point::new(1.0, 1.0));
    }

    #[test]
    fn unsupported_command_is_named() {
        match parse_path_data("M0,0 Q1,1 2,2") {
            Err(Error::UnsupportedPathCommand('Q')) => {}
            other => panic!("{other:?}"),
        }
        match parse_path_data("M0,0 a1,1 0 0 1 2,2") {
            Err(Error::UnsupportedPathCommand('a')) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_xml_reports_line() {
        match parse_kanjivg("<svg>\n<g>\n<path d=\"M0,0 C1,1 2,2 3,3\">\n</g></svg>") {
            Err(Error::Xml { line, .. }) => assert!(line >= 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn no_strokes_is_an_error() {
        assert!(matches!(parse_kanjivg(&doc("<g></g>")), Err(Error::NoStrokes)));
    }

    #[test]
    fn codepoint_ids() {
        assert_eq!(codepoint_from_id("kvg:StrokePaths_09854"), Some('顔'));
        assert_eq!(codepoint_from_id("kvg:09854-g1"), Some('顔'));
        assert_eq!(codepoint_from_id("kvg:StrokeNumbers_09854"), None);
    }
}
