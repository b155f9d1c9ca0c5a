//! Distance matrices and what is computed from them: neighbor lists,
//! triangle-inequality audits and two-dimensional layouts.

use std::f64::consts::TAU;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{Engine, Neighbor};
use crate::error::{Error, Result};
use crate::matching::MatchParams;

const SYMMETRY_TOL: f64 = 1e-9;
const TRIANGLE_TOL: f64 = 1e-12;
const ANGLE_TOL: f64 = 1e-6;
const ANGLE_RESTARTS: usize = 16;
const SMACOF_MAX_ITER: usize = 500;
const SMACOF_TOL: f64 = 1e-8;

/// Hex SHA-256 of the parameters and raster resolution a matrix was computed with.
pub fn params_fingerprint(params: &MatchParams, resolution: usize) -> String {
    let json = serde_json::json!({ "params": params, "resolution": resolution });
    hex::encode(Sha256::digest(json.to_string().as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub codepoints: Vec<char>,
    pub values: Vec<Vec<f64>>,
    pub fingerprint: String,
}

#[derive(Serialize, Deserialize)]
struct BinarySidecar {
    codepoints: String,
    fingerprint: String,
    layout: String,
}

impl DistanceMatrix {
    pub fn new(codepoints: Vec<char>, values: Vec<Vec<f64>>, fingerprint: String) -> Result<Self> {
        let n = codepoints.len();
        if values.len() != n || values.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter(format!("distance matrix is not {n}x{n}")));
        }
        for i in 0..n {
            if values[i][i] != 0.0 {
                return Err(Error::InvalidParameter(format!("nonzero diagonal at {}", codepoints[i])));
            }
            for j in 0..i {
                let (x, y) = (values[i][j], values[j][i]);
                if !x.is_finite() || x < 0.0 || (x - y).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "entry ({}, {}) = {x} / {y}",
                        codepoints[i], codepoints[j]
                    )));
                }
            }
        }
        Ok(Self { codepoints, values, fingerprint })
    }

    pub fn compute(engine: &Engine, set: &[char]) -> Result<Self> {
        let values = engine.distance_matrix(set)?;
        Self::new(set.to_vec(), values, params_fingerprint(engine.params(), engine.resolution()))
    }

    pub fn len(&self) -> usize {
        self.codepoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codepoints.is_empty()
    }

    pub fn index_of(&self, cp: char) -> Result<usize> {
        self.codepoints.iter().position(|c| *c == cp).ok_or_else(|| Error::UnknownKanji(cp.to_string()))
    }

    pub fn get(&self, c1: char, c2: char) -> Result<f64> {
        Ok(self.values[self.index_of(c1)?][self.index_of(c2)?])
    }

    /// The `k` nearest others of `query`, ascending, ties by codepoint.
    pub fn knn(&self, query: char, k: usize) -> Result<Vec<Neighbor>> {
        let q = self.index_of(query)?;
        let mut out: Vec<Neighbor> = (0..self.len())
            .filter(|j| *j != q)
            .map(|j| Neighbor { codepoint: self.codepoints[j], distance: self.values[q][j] })
            .collect();
        out.sort_by(|x, y| x.distance.total_cmp(&y.distance).then(x.codepoint.cmp(&y.codepoint)));
        out.truncate(k);
        Ok(out)
    }

    /// CSV with a header row of codepoints and one row per kanji, led by its codepoint.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![String::new()];
        header.extend(self.codepoints.iter().map(|c| c.to_string()));
        w.write_record(&header).map_err(csv_error)?;
        for (c, row) in self.codepoints.iter().zip(&self.values) {
            let mut rec = vec![c.to_string()];
            rec.extend(row.iter().map(|v| format!("{v:.17e}")));
            w.write_record(&rec).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_csv(text: &str, fingerprint: String) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = r.headers().map_err(csv_error)?.clone();
        let codepoints: Vec<char> = header.iter().skip(1).map(single_char).collect::<Result<_>>()?;
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_error)?;
            let row: Vec<f64> = rec
                .iter()
                .skip(1)
                .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Config(format!("matrix entry {v:?}: {e}"))))
                .collect::<Result<_>>()?;
            values.push(row);
        }
        Self::new(codepoints, values, fingerprint)
    }

    /// Little-endian `f64` values in row-major order, plus a JSON sidecar.
    pub fn to_binary(&self) -> Result<(Vec<u8>, String)> {
        let bytes = self.values.iter().flatten().flat_map(|v| v.to_le_bytes()).collect();
        let sidecar = BinarySidecar {
            codepoints: self.codepoints.iter().collect(),
            fingerprint: self.fingerprint.clone(),
            layout: "f64-le-row-major".into(),
        };
        Ok((bytes, serde_json::to_string_pretty(&sidecar)?))
    }

    pub fn from_binary(bytes: &[u8], sidecar: &str) -> Result<Self> {
        let side: BinarySidecar = serde_json::from_str(sidecar)?;
        let codepoints: Vec<char> = side.codepoints.chars().collect();
        let n = codepoints.len();
        if bytes.len() != n * n * 8 {
            return Err(Error::Config(format!("expected {} bytes for {n} kanji, got {}", n * n * 8, bytes.len())));
        }
        let flat: Vec<f64> =
            bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        let values = flat.chunks(n.max(1)).take(n).map(|r| r.to_vec()).collect();
        Self::new(codepoints, values, side.fingerprint)
    }

    /// Writes `path` and `path` with `.json` appended.
    pub fn save_binary(&self, path: &Path) -> Result<()> {
        let (bytes, sidecar) = self.to_binary()?;
        std::fs::write(path, bytes)?;
        std::fs::write(sidecar_path(path), sidecar)?;
        Ok(())
    }

    pub fn load_binary(path: &Path) -> Result<Self> {
        Self::from_binary(&std::fs::read(path)?, &std::fs::read_to_string(sidecar_path(path))?)
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

fn csv_error(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

fn single_char(s: &str) -> Result<char> {
    let mut it = s.trim().chars();
    match (it.next(), it.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(Error::Config(format!("expected a single kanji, got {s:?}"))),
    }
}

/// Upper ends of the distance brackets used to color neighbor tables.
pub const BRACKET_BOUNDS: [f64; 6] = [0.075, 0.1, 0.125, 0.15, 0.175, 0.2];
const BRACKET_COLORS: [&str; 7] = ["#EA4C3B", "#F0724B", "#F49265", "#F7AE83", "#F9C8A4", "#FADDC3", "#FFFFFF"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bracket {
    /// 1 for the closest bracket, 7 for distances of 0.2 and more.
    pub index: usize,
    pub lower: f64,
    pub upper: Option<f64>,
    pub color: &'static str,
}

impl Bracket {
    pub fn label(&self) -> String {
        match self.upper {
            Some(u) => format!("{}-{}", self.lower, u),
            None => format!(">={}", self.lower),
        }
    }
}

/// Bracket of a distance; brackets include their lower end.
pub fn bracket(d: f64) -> Bracket {
    let i = BRACKET_BOUNDS.iter().position(|b| d < *b).unwrap_or(BRACKET_BOUNDS.len());
    Bracket {
        index: i + 1,
        lower: if i == 0 { 0.0 } else { BRACKET_BOUNDS[i - 1] },
        upper: BRACKET_BOUNDS.get(i).copied(),
        color: BRACKET_COLORS[i],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangleViolation {
    /// `d(i, j) > d(i, k) + d(k, j)` with `(i, j)` the longest side.
    pub triple: [char; 3],
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangleAudit {
    pub triples: usize,
    pub violations: usize,
    pub worst_gap: f64,
    pub violating: Vec<TriangleViolation>,
}

impl TriangleAudit {
    pub fn rate(&self) -> f64 {
        if self.triples == 0 {
            0.0
        } else {
            self.violations as f64 / self.triples as f64
        }
    }
}

/// Scans every unordered triple; a triple violates when its longest side
/// exceeds the sum of the other two by more than `1e-12`.
pub fn triangle_audit(m: &DistanceMatrix) -> TriangleAudit {
    let n = m.len();
    let d = &m.values;
    let mut audit = TriangleAudit { triples: 0, violations: 0, worst_gap: 0.0, violating: Vec::new() };
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                audit.triples += 1;
                let sides = [(d[i][j], [i, j, k]), (d[i][k], [i, k, j]), (d[j][k], [j, k, i])];
                let (long, [x, y, z]) = sides.into_iter().max_by(|a, b| a.0.total_cmp(&b.0)).expect("three sides");
                let gap = long - d[x][z] - d[z][y];
                if gap > TRIANGLE_TOL {
                    audit.violations += 1;
                    audit.worst_gap = audit.worst_gap.max(gap);
                    audit.violating.push(TriangleViolation {
                        triple: [m.codepoints[x], m.codepoints[y], m.codepoints[z]],
                        gap,
                    });
                }
            }
        }
    }
    audit
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusedPoint {
    pub cp: char,
    pub r: f64,
    pub theta: f64,
}

/// Polar layout around `center`: radii are the exact distances to the
/// center, angles are chosen one kanji at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusedLayout {
    pub center: char,
    pub points: Vec<FocusedPoint>,
}

impl FocusedLayout {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn chord(r1: f64, t1: f64, r2: f64, t2: f64) -> f64 {
    (r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * (t1 - t2).cos()).max(0.0).sqrt()
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    (lo + hi) / 2.0
}

/// Places the other kanji in ascending distance from `center` (ties by
/// codepoint). The first gets angle 0; each later one gets the angle that
/// minimizes the squared mismatch between chord lengths to the already
/// placed kanji and their matrix distances.
pub fn focused_mds(m: &DistanceMatrix, center: char) -> Result<FocusedLayout> {
    let c = m.index_of(center)?;
    let mut order: Vec<usize> = (0..m.len()).filter(|i| *i != c).collect();
    order.sort_by(|x, y| m.values[c][*x].total_cmp(&m.values[c][*y]).then(m.codepoints[*x].cmp(&m.codepoints[*y])));
    let mut placed: Vec<(usize, f64, f64)> = Vec::new();
    for i in order {
        let r = m.values[c][i];
        let theta = if placed.is_empty() {
            0.0
        } else {
            let stress = |t: f64| -> f64 {
                placed.iter().map(|(j, rj, tj)| (chord(r, t, *rj, *tj) - m.values[i][*j]).powi(2)).sum()
            };
            let width = TAU / ANGLE_RESTARTS as f64;
            let mut best = (f64::INFINITY, 0.0);
            for s in 0..ANGLE_RESTARTS {
                let t = golden_section(&stress, s as f64 * width, (s + 1) as f64 * width, ANGLE_TOL);
                let v = stress(t);
                if v < best.0 {
                    best = (v, t);
                }
            }
            best.1.rem_euclid(TAU)
        };
        placed.push((i, r, theta));
    }
    Ok(FocusedLayout {
        center,
        points: placed.into_iter().map(|(i, r, theta)| FocusedPoint { cp: m.codepoints[i], r, theta }).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalPoint {
    pub cp: char,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MdsResult {
    pub coords: Vec<Vec<f64>>,
    /// `Σ_{i<j} (‖xᵢ − xⱼ‖ − dᵢⱼ)²` after each iteration, starting with the
    /// classical-scaling configuration.
    pub stress_history: Vec<f64>,
}

impl MdsResult {
    pub fn stress(&self) -> f64 {
        *self.stress_history.last().expect("at least the starting stress")
    }

    /// First two coordinates as a labelled point list.
    pub fn points(&self, codepoints: &[char]) -> Vec<GlobalPoint> {
        codepoints
            .iter()
            .zip(&self.coords)
            .map(|(cp, x)| GlobalPoint { cp: *cp, x: x.first().copied().unwrap_or(0.0), y: x.get(1).copied().unwrap_or(0.0) })
            .collect()
    }
}

fn raw_stress(x: &DMatrix<f64>, d: &[Vec<f64>]) -> f64 {
    let n = x.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += ((x.row(i) - x.row(j)).norm() - d[i][j]).powi(2);
        }
    }
    s
}

/// Classical scaling: top eigenvectors of the double-centered squared
/// distances, each signed so that its largest-magnitude entry is positive.
fn classical_scaling(d: &[Vec<f64>], dims: usize) -> DMatrix<f64> {
    let n = d.len();
    let sq = DMatrix::from_fn(n, n, |i, j| d[i][j] * d[i][j]);
    let centering = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let b = -0.5 * &centering * sq * &centering;
    let eig = SymmetricEigen::new(b);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|x, y| eig.eigenvalues[*y].total_cmp(&eig.eigenvalues[*x]).then(x.cmp(y)));
    let mut x = DMatrix::zeros(n, dims);
    for (col, &k) in idx.iter().take(dims).enumerate() {
        let lambda = eig.eigenvalues[k];
        if lambda <= 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        let pivot = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(1.0);
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            x[(i, col)] = sign * v[i] * lambda.sqrt();
        }
    }
    x
}

/// Metric MDS by SMACOF majorization with unit weights, started from
/// classical scaling. Stops when the stress decreases by less than `1e-8`
/// or after 500 iterations.
pub fn metric_mds(m: &DistanceMatrix, dims: usize) -> Result<MdsResult> {
    if dims == 0 {
        return Err(Error::InvalidParameter("mds needs at least one dimension".into()));
    }
    let n = m.len();
    let d = &m.values;
    let mut x = classical_scaling(d, dims);
    let mut history = vec![raw_stress(&x, d)];
    for _ in 0..SMACOF_MAX_ITER {
        if n < 2 {
            break;
        }
        let mut bmat = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let dist = (x.row(i) - x.row(j)).norm();
                    if dist > 0.0 {
                        bmat[(i, j)] = -d[i][j] / dist;
                    }
                }
            }
            let row_sum: f64 = (0..n).filter(|j| *j != i).map(|j| bmat[(i, j)]).sum();
            bmat[(i, i)] = -row_sum;
        }
        let next = bmat * &x / n as f64;
        let stress = raw_stress(&next, d);
        let prev = *history.last().expect("nonempty");
        debug_assert!(stress <= prev * (1.0 + 1e-12) + 1e-15, "stress rose from {prev} to {stress}");
        x = next;
        history.push(stress);
        if prev - stress < SMACOF_TOL {
            break;
        }
    }
    let coords = (0..n).map(|i| x.row(i).iter().copied().collect()).collect();
    Ok(MdsResult { coords, stress_history: history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn matrix(points: &[(f64, f64)]) -> DistanceMatrix {
        let n = points.len();
        let values = (0..n)
            .map(|i| (0..n).map(|j| (points[i].0 - points[j].0).hypot(points[i].1 - points[j].1)).collect())
            .collect();
        let cps = (0..n).map(|i| char::from_u32(0x4e00 + i as u32).unwrap()).collect();
        DistanceMatrix::new(cps, values, String::new()).unwrap()
    }

    #[test]
    fn euclidean_points_have_no_violations() {
        let m = matrix(&[(0.0, 0.0), (1.0, 0.0), (0.3, 0.8), (0.5, 0.5), (2.0, 1.0)]);
        let audit = triangle_audit(&m);
        assert_eq!(audit.triples, 10);
        assert_eq!(audit.violations, 0);
    }

    #[test]
    fn constructed_violation_is_found_once() {
        let cps = vec!['a', 'b', 'c'];
        let values = vec![vec![0.0, 0.3, 0.1], vec![0.3, 0.0, 0.1], vec![0.1, 0.1, 0.0]];
        let audit = triangle_audit(&DistanceMatrix::new(cps, values, String::new()).unwrap());
        assert_eq!(audit.violations, 1);
        assert_abs_diff_eq!(audit.worst_gap, 0.1, epsilon = 1e-15);
        assert_eq!(audit.violating[0].triple, ['a', 'b', 'c']);
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let values = vec![vec![0.0, 0.3], vec![0.2, 0.0]];
        assert!(DistanceMatrix::new(vec!['a', 'b'], values, String::new()).is_err());
    }

    #[test]
    fn brackets_follow_bounds() {
        assert_eq!(bracket(0.0).index, 1);
        assert_eq!(bracket(0.075).index, 2);
        let b = bracket(0.13);
        assert_eq!((b.index, b.lower, b.upper, b.label().as_str()), (4, 0.125, Some(0.15), "0.125-0.15"));
        assert_eq!(bracket(0.2).upper, None);
        assert_eq!(bracket(0.25).color, "#FFFFFF");
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let t = golden_section(|x| (x - 0.7).powi(2), 0.0, 2.0, 1e-9);
        assert_abs_diff_eq!(t, 0.7, epsilon = 1e-8);
    }
}
