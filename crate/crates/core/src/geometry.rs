//! Planar geometry of strokes: cubic Bézier segments, arc length, tight
//! bounding boxes and the centering/scaling that registers a component on the
//! unit canvas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side length of the kanjiVG source canvas.
pub const SOURCE_CANVAS: f64 = 109.0;

/// Largest side of a normalized component's bounding box.
pub const NORMALIZED_EXTENT: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicBezier {
    pub p0: Point,
    pub p1: Point,
    pub p2: Point,
    pub p3: Point,
}

impl CubicBezier {
    pub const fn new(p0: Point, p1: Point, p2: Point, p3: Point) -> Self {
        Self { p0, p1, p2, p3 }
    }

    /// Straight segment as a cubic with control points at thirds.
    pub fn line(a: Point, b: Point) -> Self {
        Self::new(a, a.lerp(b, 1.0 / 3.0), a.lerp(b, 2.0 / 3.0), b)
    }

    pub fn eval(&self, t: f64) -> Point {
        let u = 1.0 - t;
        let (a, b, c, d) = (u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t);
        Point::new(
            a * self.p0.x + b * self.p1.x + c * self.p2.x + d * self.p3.x,
            a * self.p0.y + b * self.p1.y + c * self.p2.y + d * self.p3.y,
        )
    }

    /// De Casteljau split at `t`.
    pub fn split(&self, t: f64) -> (CubicBezier, CubicBezier) {
        let p01 = self.p0.lerp(self.p1, t);
        let p12 = self.p1.lerp(self.p2, t);
        let p23 = self.p2.lerp(self.p3, t);
        let p012 = p01.lerp(p12, t);
        let p123 = p12.lerp(p23, t);
        let mid = p012.lerp(p123, t);
        (
            CubicBezier::new(self.p0, p01, p012, mid),
            CubicBezier::new(mid, p123, p23, self.p3),
        )
    }

    pub fn map(&self, f: impl Fn(Point) -> Point) -> CubicBezier {
        CubicBezier::new(f(self.p0), f(self.p1), f(self.p2), f(self.p3))
    }

    fn control_polygon_length(&self) -> f64 {
        self.p0.dist(self.p1) + self.p1.dist(self.p2) + self.p2.dist(self.p3)
    }

    /// Arc length by adaptive subdivision: the control polygon and the chord
    /// bracket the true length, so a piece is accepted once they agree.
    pub fn arc_length(&self, tol: f64) -> f64 {
        fn rec(c: &CubicBezier, tol: f64, depth: u32) -> f64 {
            let chord = c.p0.dist(c.p3);
            let poly = c.control_polygon_length();
            if poly - chord <= tol || depth >= 30 {
                // Gravesen's estimate for cubics.
                return (2.0 * chord + poly) / 3.0;
            }
            let (l, r) = c.split(0.5);
            rec(&l, tol * 0.5, depth + 1) + rec(&r, tol * 0.5, depth + 1)
        }
        rec(self, tol, 0)
    }

    /// Parameters in (0,1) where a coordinate derivative vanishes.
    fn extremum_params(&self) -> Vec<f64> {
        let mut ts = Vec::new();
        for (a, b, c, d) in [
            (self.p0.x, self.p1.x, self.p2.x, self.p3.x),
            (self.p0.y, self.p1.y, self.p2.y, self.p3.y),
        ] {
            // derivative / 3 = qa t^2 + qb t + qc
            let qa = -a + 3.0 * b - 3.0 * c + d;
            let qb = 2.0 * (a - 2.0 * b + c);
            let qc = b - a;
            if qa.abs() < 1e-12 {
                if qb.abs() > 1e-12 {
                    ts.push(-qc / qb);
                }
            } else {
                let disc = qb * qb - 4.0 * qa * qc;
                if disc >= 0.0 {
                    let s = disc.sqrt();
                    ts.push((-qb + s) / (2.0 * qa));
                    ts.push((-qb - s) / (2.0 * qa));
                }
            }
        }
        ts.retain(|t| *t > 0.0 && *t < 1.0);
        ts
    }

    pub fn bbox(&self) -> BBox {
        let mut b = BBox::point(self.p0);
        b.include(self.p3);
        for t in self.extremum_params() {
            b.include(self.eval(t));
        }
        b
    }

    /// Polyline approximation with maximal deviation below `tol`, appended to
    /// `out` without repeating the start point.
    pub fn flatten_into(&self, tol: f64, out: &mut Vec<Point>) {
        // distance of inner control points from the chord bounds the deviation
        let flat_enough = |c: &CubicBezier| {
            let d1 = seg_point_dist(c.p1, c.p0, c.p3);
            let d2 = seg_point_dist(c.p2, c.p0, c.p3);
            d1.max(d2) * 0.75 <= tol
        };
        let mut stack = vec![(*self, 0u32)];
        while let Some((c, depth)) = stack.pop() {
            if depth >= 16 || flat_enough(&c) {
                out.push(c.p3);
            } else {
                let (l, r) = c.split(0.5);
                stack.push((r, depth + 1));
                stack.push((l, depth + 1));
            }
        }
    }
}

/// Distance from `p` to the segment `a`–`b`.
pub fn seg_point_dist(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 <= 0.0 {
        return p.dist(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.dist(Point::new(a.x + t * dx, a.y + t * dy))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl BBox {
    pub fn point(p: Point) -> Self {
        Self { xmin: p.x, xmax: p.x, ymin: p.y, ymax: p.y }
    }

    pub fn include(&mut self, p: Point) {
        self.xmin = self.xmin.min(p.x);
        self.xmax = self.xmax.max(p.x);
        self.ymin = self.ymin.min(p.y);
        self.ymax = self.ymax.max(p.y);
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            xmin: self.xmin.min(other.xmin),
            xmax: self.xmax.max(other.xmax),
            ymin: self.ymin.min(other.ymin),
            ymax: self.ymax.max(other.ymax),
        }
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))
    }
}

/// Arc length of a stroke path given as connected cubic segments.
pub fn stroke_length(path: &[CubicBezier]) -> f64 {
    path.iter().map(|c| c.arc_length(1e-9)).sum()
}

/// Tight bounding box of all segments of all strokes of a component.
pub fn bounding_box<'a, I>(strokes: I) -> Result<BBox>
where
    I: IntoIterator<Item = &'a [CubicBezier]>,
{
    strokes
        .into_iter()
        .flat_map(|s| s.iter())
        .map(CubicBezier::bbox)
        .reduce(|a, b| a.union(&b))
        .ok_or(Error::EmptyComponent)
}

/// The affine map applied by [`normalize_component`]: `p ↦ (p - center)·scale + (½,½)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub center: Point,
    pub scale: f64,
}

impl NormalizationRecord {
    pub fn apply(&self, p: Point) -> Point {
        Point::new(
            (p.x - self.center.x) * self.scale + 0.5,
            (p.y - self.center.y) * self.scale + 0.5,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedComponent {
    pub strokes: Vec<Vec<CubicBezier>>,
    pub record: NormalizationRecord,
}

/// Centers the component's bounding box in the unit canvas and scales it so
/// that its larger side is [`NORMALIZED_EXTENT`]. A component without extent
/// (a single dot) is only centered.
pub fn normalize_component(strokes: &[Vec<CubicBezier>]) -> Result<NormalizedComponent> {
    let bbox = bounding_box(strokes.iter().map(Vec::as_slice))?;
    let extent = bbox.width().max(bbox.height());
    let scale = if extent > 0.0 { NORMALIZED_EXTENT / extent } else { 1.0 };
    let record = NormalizationRecord { center: bbox.center(), scale };
    let strokes = strokes
        .iter()
        .map(|s| s.iter().map(|c| c.map(|p| record.apply(p))).collect())
        .collect();
    Ok(NormalizedComponent { strokes, record })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn straight_length_is_pythagorean() {
        let s = [CubicBezier::line(p(0.0, 0.0), p(0.3, 0.4))];
        assert_abs_diff_eq!(stroke_length(&s), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_segment_has_zero_length() {
        let q = p(0.2, 0.7);
        assert_eq!(stroke_length(&[CubicBezier::new(q, q, q, q)]), 0.0);
    }

    #[test]
    fn thirds_parametrized_line_has_unit_length() {
        let c = CubicBezier::new(p(0.0, 0.0), p(1.0 / 3.0, 0.0), p(2.0 / 3.0, 0.0), p(1.0, 0.0));
        assert_abs_diff_eq!(stroke_length(&[c]), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn curved_length_matches_fine_polyline() {
        let c = CubicBezier::new(p(0.1, 0.1), p(0.9, 0.0), p(0.0, 0.8), p(0.7, 0.9));
        let n = 200_000;
        let mut acc = 0.0;
        let mut prev = c.eval(0.0);
        for k in 1..=n {
            let q = c.eval(k as f64 / n as f64);
            acc += prev.dist(q);
            prev = q;
        }
        let len = stroke_length(&[c]);
        assert!((len - acc).abs() / acc < 1e-4, "{len} vs {acc}");
    }

    #[test]
    fn horizontal_stroke_box() {
        let s = vec![CubicBezier::line(p(0.2, 0.5), p(0.8, 0.5))];
        let b = bounding_box([s.as_slice()]).unwrap();
        assert_eq!((b.xmin, b.xmax, b.ymin, b.ymax), (0.2, 0.8, 0.5, 0.5));
    }

    #[test]
    fn box_union_of_two_strokes() {
        let s1 = vec![CubicBezier::line(p(0.0, 0.0), p(0.4, 1.0))];
        let s2 = vec![CubicBezier::line(p(0.3, 0.2), p(0.9, 0.5))];
        let b = bounding_box([s1.as_slice(), s2.as_slice()]).unwrap();
        assert_eq!((b.xmin, b.xmax, b.ymin, b.ymax), (0.0, 0.9, 0.0, 1.0));
    }

    #[test]
    fn curved_box_matches_dense_sampling() {
        // control polygon overshoots the curve on both axes
        let c = CubicBezier::new(p(0.2, 0.5), p(0.0, -0.2), p(1.0, 1.3), p(0.8, 0.5));
        let b = c.bbox();
        let mut s = BBox::point(c.p0);
        for k in 0..=10_000 {
            s.include(c.eval(k as f64 / 10_000.0));
        }
        assert!(b.ymin < 0.5 && b.ymin > -0.2);
        for (x, y) in [(b.xmin, s.xmin), (b.xmax, s.xmax), (b.ymin, s.ymin), (b.ymax, s.ymax)] {
            assert_abs_diff_eq!(x, y, epsilon = 1e-6);
        }
        // the exact extrema are never inside the sampled box
        assert!(b.xmin <= s.xmin && b.xmax >= s.xmax && b.ymin <= s.ymin && b.ymax >= s.ymax);
    }

    #[test]
    fn empty_component_is_an_error() {
        assert!(matches!(bounding_box(std::iter::empty()), Err(Error::EmptyComponent)));
    }

    #[test]
    fn normalize_hand_computed_box() {
        // box (0.1..0.5, 0.1..0.3): center (0.3,0.2), scale 0.98/0.4
        let s = vec![vec![CubicBezier::line(p(0.1, 0.1), p(0.5, 0.3))]];
        let n = normalize_component(&s).unwrap();
        assert_abs_diff_eq!(n.record.scale, 0.98 / 0.4, epsilon = 1e-15);
        let c = n.strokes[0][0];
        assert_abs_diff_eq!(c.p0.x, 0.01, epsilon = 1e-12);
        assert_abs_diff_eq!(c.p0.y, 0.5 - 0.1 * 0.98 / 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(c.p3.x, 0.99, epsilon = 1e-12);
        assert_abs_diff_eq!(c.p3.y, 0.5 + 0.1 * 0.98 / 0.4, epsilon = 1e-12);
    }

    #[test]
    fn normalizing_a_centered_component_changes_nothing() {
        let s = vec![vec![CubicBezier::line(p(0.01, 0.45), p(0.99, 0.55))]];
        let n = normalize_component(&s).unwrap();
        assert_abs_diff_eq!(n.record.scale, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(n.strokes[0][0].p0.x, 0.01, epsilon = 1e-12);
        assert_abs_diff_eq!(n.strokes[0][0].p3.y, 0.55, epsilon = 1e-12);
    }

    #[test]
    fn single_dot_is_only_centered() {
        let q = p(0.2, 0.3);
        let n = normalize_component(&[vec![CubicBezier::new(q, q, q, q)]]).unwrap();
        assert_eq!(n.record.scale, 1.0);
        assert_abs_diff_eq!(n.strokes[0][0].p0.x, 0.5, epsilon = 1e-15);
    }

    fn arb_curve() -> impl Strategy<Value = CubicBezier> {
        prop::array::uniform8(0.0f64..1.0).prop_map(|v| {
            CubicBezier::new(p(v[0], v[1]), p(v[2], v[3]), p(v[4], v[5]), p(v[6], v[7]))
        })
    }

    proptest! {
        #[test]
        fn length_translation_invariant_scale_equivariant(
            c in arb_curve(), dx in -1.0f64..1.0, dy in -1.0f64..1.0, k in 0.1f64..5.0
        ) {
            let l = stroke_length(&[c]);
            let moved = c.map(|q| p(q.x + dx, q.y + dy));
            let scaled = c.map(|q| p(q.x * k, q.y * k));
            prop_assert!((stroke_length(&[moved]) - l).abs() < 1e-6);
            prop_assert!((stroke_length(&[scaled]) - k * l).abs() < 1e-6);
        }

        #[test]
        fn normalize_is_idempotent_and_similarity_invariant(
            a in arb_curve(), b in arb_curve(), dx in -0.5f64..0.5, k in 0.2f64..3.0
        ) {
            let comp = vec![vec![a], vec![b]];
            let once = normalize_component(&comp).unwrap();
            let twice = normalize_component(&once.strokes).unwrap();
            let moved: Vec<Vec<CubicBezier>> = comp
                .iter()
                .map(|s| s.iter().map(|c| c.map(|q| p(q.x * k + dx, q.y * k - dx))).collect())
                .collect();
            let other = normalize_component(&moved).unwrap();
            for (s1, (s2, s3)) in once.strokes.iter().zip(twice.strokes.iter().zip(&other.strokes)) {
                for (c1, (c2, c3)) in s1.iter().zip(s2.iter().zip(s3)) {
                    for (q1, (q2, q3)) in [c1.p0, c1.p1, c1.p2, c1.p3]
                        .into_iter()
                        .zip([c2.p0, c2.p1, c2.p2, c2.p3].into_iter().zip([c3.p0, c3.p1, c3.p2, c3.p3]))
                    {
                        prop_assert!(q1.dist(q2) < 1e-9);
                        prop_assert!(q1.dist(q3) < 1e-9);
                    }
                }
            }
            let bb = bounding_box(once.strokes.iter().map(Vec::as_slice)).unwrap();
            prop_assert!((bb.width().max(bb.height()) - NORMALIZED_EXTENT).abs() < 1e-9);
            prop_assert!((bb.center().x - 0.5).abs() < 1e-9 && (bb.center().y - 0.5).abs() < 1e-9);
        }
    }
}
