//! Static SVG renderings of map layouts.

use std::fmt::Write;

use kanjidist::analysis::{bracket, FocusedLayout, GlobalPoint};

const SIZE: f64 = 640.0;
const MARGIN: f64 = 40.0;
const RING_STEP: f64 = 0.05;
const FONT: &str = "font-family=\"sans-serif\" text-anchor=\"middle\" dominant-baseline=\"central\"";

fn header(out: &mut String) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">"
    );
    let _ = writeln!(out, "<rect width=\"{SIZE}\" height=\"{SIZE}\" fill=\"white\"/>");
}

/// Center kanji in the middle, rings at multiples of 0.05, others at their
/// polar positions on a background of their distance bracket color.
pub fn focused_svg(layout: &FocusedLayout) -> String {
    let max_r = layout.points.iter().map(|p| p.r).fold(0.0, f64::max);
    let rings = ((max_r / RING_STEP).ceil() as usize).max(1);
    let scale = (SIZE / 2.0 - MARGIN) / (rings as f64 * RING_STEP);
    let c = SIZE / 2.0;
    let mut out = String::new();
    header(&mut out);
    for k in 1..=rings {
        let _ = writeln!(
            out,
            "<circle cx=\"{c:.3}\" cy=\"{c:.3}\" r=\"{:.3}\" fill=\"none\" stroke=\"#bbbbbb\" stroke-width=\"1\"/>",
            k as f64 * RING_STEP * scale
        );
    }
    let _ = writeln!(out, "<text x=\"{c:.3}\" y=\"{c:.3}\" font-size=\"28\" {FONT}>{}</text>", layout.center);
    for p in &layout.points {
        let x = c + p.r * p.theta.cos() * scale;
        let y = c - p.r * p.theta.sin() * scale;
        let color = bracket(p.r).color;
        let _ = writeln!(out, "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"14\" fill=\"{color}\"/>");
        let _ = writeln!(out, "<text x=\"{x:.3}\" y=\"{y:.3}\" font-size=\"20\" {FONT}>{}</text>", p.cp);
    }
    out.push_str("</svg>\n");
    out
}

/// Points scaled uniformly into the canvas.
pub fn global_svg(points: &[GlobalPoint]) -> String {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let span = (x1 - x0).max(y1 - y0);
    let scale = if span > 0.0 { (SIZE - 2.0 * MARGIN) / span } else { 0.0 };
    let mut out = String::new();
    header(&mut out);
    for p in points {
        let x = if span > 0.0 { MARGIN + (p.x - x0) * scale } else { SIZE / 2.0 };
        let y = if span > 0.0 { SIZE - MARGIN - (p.y - y0) * scale } else { SIZE / 2.0 };
        let _ = writeln!(out, "<text x=\"{x:.3}\" y=\"{y:.3}\" font-size=\"18\" {FONT}>{}</text>", p.cp);
    }
    out.push_str("</svg>\n");
    out
}
