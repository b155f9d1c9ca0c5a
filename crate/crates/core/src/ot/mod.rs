//! Unbalanced Wasserstein distance between pixel images.
//!
//! Ink may be moved between pixels at cost `δᵖ` per unit, or deleted from the
//! first image and created in the second at cost `bᵖ/2` per unit each. The
//! problem is solved exactly as a min-cost flow with one extra node standing
//! for deletion and creation.
//!
//! For `p = 1` the costs form a metric (pixel distance truncated at `b`, and
//! `b/2` to the extra node), so ink shared by both images at the same pixel
//! stays in place and only the pixelwise differences are transported. Other
//! exponents use the plain bipartite formulation.
//!
//! Masses are rounded to multiples of 2⁻³⁶ and unit costs to multiples of
//! 2⁻⁴⁰ for the integer solver; the reported cost is recomputed in floating
//! point from the resulting plan.

pub mod network_simplex;
pub mod oracle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::PixelImage;
use network_simplex::{NetworkSimplex, SolveStatus};

pub use oracle::brute_oracle;

const MASS_SCALE: f64 = (1u64 << 36) as f64;
const COST_SCALE: f64 = (1u64 << 40) as f64;
/// Pixel arcs in the first round reach this many pixels; longer ones are
/// added only when pricing shows they are needed.
const INITIAL_REACH: f64 = 3.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UbwParams {
    pub p: f64,
    pub b: f64,
}

impl Default for UbwParams {
    fn default() -> Self {
        Self { p: 1.0, b: 0.4 }
    }
}

impl UbwParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p = {} (need p >= 1)", self.p)));
        }
        if !(self.b > 0.0 && self.b <= std::f64::consts::SQRT_2) {
            return Err(Error::InvalidParameter(format!("b = {} (need 0 < b <= sqrt 2)", self.b)));
        }
        Ok(())
    }

    /// Cost of deleting (or creating) one unit of ink.
    pub fn slack_cost(&self) -> f64 {
        self.b.powf(self.p) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub from: [usize; 2],
    pub to: [usize; 2],
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlackEntry {
    pub at: [usize; 2],
    pub mass: f64,
}

/// Optimal plan. `entries` include ink that stays at its pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub n: usize,
    pub entries: Vec<PlanEntry>,
    pub created: Vec<SlackEntry>,
    pub destroyed: Vec<SlackEntry>,
    pub source_total: f64,
    pub target_total: f64,
}

impl TransportPlan {
    /// `‖Π‖₁`.
    pub fn transported(&self) -> f64 {
        self.entries.iter().map(|e| e.mass).sum()
    }

    pub fn created_total(&self) -> f64 {
        self.created.iter().map(|e| e.mass).sum()
    }

    pub fn destroyed_total(&self) -> f64 {
        self.destroyed.iter().map(|e| e.mass).sum()
    }

    /// Objective value of this plan; equals the distance for an optimal plan.
    pub fn cost(&self, params: &UbwParams) -> f64 {
        let n = self.n as f64;
        let moved: f64 = self
            .entries
            .iter()
            .map(|e| {
                let dr = (e.from[0] as f64 - e.to[0] as f64) / n;
                let ds = (e.from[1] as f64 - e.to[1] as f64) / n;
                dr.hypot(ds).powf(params.p) * e.mass
            })
            .sum();
        let slack = (self.source_total + self.target_total - 2.0 * self.transported()) * params.slack_cost();
        (moved + slack.max(0.0)).powf(1.0 / params.p)
    }

    /// JSON with ink that stays in place left out.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Export<'a> {
            n: usize,
            entries: Vec<&'a PlanEntry>,
            created: &'a [SlackEntry],
            destroyed: &'a [SlackEntry],
            source_total: f64,
            target_total: f64,
        }
        Ok(serde_json::to_string(&Export {
            n: self.n,
            entries: self.entries.iter().filter(|e| e.from != e.to).collect(),
            created: &self.created,
            destroyed: &self.destroyed,
            source_total: self.source_total,
            target_total: self.target_total,
        })?)
    }
}

fn quantize(x: f64) -> i64 {
    (x * MASS_SCALE).round() as i64
}

fn dequantize(q: i64) -> f64 {
    q as f64 / MASS_SCALE
}

fn check_pair(c: &PixelImage, c2: &PixelImage, params: &UbwParams) -> Result<()> {
    params.validate()?;
    if c.n != c2.n {
        return Err(Error::ResolutionMismatch(c.n, c2.n));
    }
    if c.is_empty() && c2.is_empty() {
        return Err(Error::EmptyImages);
    }
    Ok(())
}

/// Integer cost per pixel offset, `None` when moving costs at least as much
/// as deleting and re-creating.
struct OffsetCosts {
    n: usize,
    table: Vec<Option<i64>>,
    reach2: Vec<f64>,
}

impl OffsetCosts {
    fn new(n: usize, params: &UbwParams) -> Self {
        let mut table = vec![None; n * n];
        let mut reach2 = vec![0.0; n * n];
        for dr in 0..n {
            for ds in 0..n {
                let d = (dr as f64).hypot(ds as f64) / n as f64;
                reach2[dr * n + ds] = (dr * dr + ds * ds) as f64;
                if d < params.b {
                    table[dr * n + ds] = Some((d.powf(params.p) * COST_SCALE).round() as i64);
                }
            }
        }
        Self { n, table, reach2 }
    }

    fn get(&self, a: usize, b: usize) -> Option<i64> {
        let n = self.n;
        let (ra, sa, rb, sb) = (a / n, a % n, b / n, b % n);
        self.table[ra.abs_diff(rb) * n + sa.abs_diff(sb)]
    }

    fn near(&self, a: usize, b: usize) -> bool {
        let n = self.n;
        let (ra, sa, rb, sb) = (a / n, a % n, b / n, b % n);
        self.reach2[ra.abs_diff(rb) * n + sa.abs_diff(sb)] <= INITIAL_REACH * INITIAL_REACH
    }
}

struct Solved {
    ns: NetworkSimplex,
    /// (arc, from pixel, to pixel) for pixel-to-pixel arcs.
    pixel_arcs: Vec<(usize, usize, usize)>,
}

/// Min-cost flow where `from` nodes may ship to `to` nodes along priced pixel
/// arcs; `fixed` arcs (to and from the slack nodes) are always present.
/// Pixel arcs are generated lazily: short ones first, then any arc whose
/// reduced cost is negative, until none is left.
fn solve_generated(
    supply: Vec<i64>,
    fixed: &[(usize, usize, i64)],
    from: &[(usize, usize)],
    to: &[(usize, usize)],
    costs: &OffsetCosts,
    cost_bound: i64,
) -> Solved {
    let mut ns = NetworkSimplex::new(supply, cost_bound);
    for &(u, v, c) in fixed {
        ns.add_arc(u, v, c);
    }
    let mut pixel_arcs = Vec::new();
    let mut present = vec![false; from.len() * to.len()];
    for (fi, &(fnode, fpix)) in from.iter().enumerate() {
        for (ti, &(tnode, tpix)) in to.iter().enumerate() {
            if costs.near(fpix, tpix) {
                if let Some(c) = costs.get(fpix, tpix) {
                    let a = ns.add_arc(fnode, tnode, c);
                    pixel_arcs.push((a, fpix, tpix));
                    present[fi * to.len() + ti] = true;
                }
            }
        }
    }
    loop {
        let status = ns.solve();
        debug_assert_eq!(status, SolveStatus::Optimal);
        let mut added = 0;
        for (fi, &(fnode, fpix)) in from.iter().enumerate() {
            for (ti, &(tnode, tpix)) in to.iter().enumerate() {
                let k = fi * to.len() + ti;
                if present[k] {
                    continue;
                }
                if let Some(c) = costs.get(fpix, tpix) {
                    if ns.reduced_cost(fnode, tnode, c) < 0 {
                        let a = ns.add_arc(fnode, tnode, c);
                        pixel_arcs.push((a, fpix, tpix));
                        present[k] = true;
                        added += 1;
                    }
                }
            }
        }
        if added == 0 {
            break;
        }
    }
    Solved { ns, pixel_arcs }
}

fn rc_of(pix: usize, n: usize) -> [usize; 2] {
    [pix / n, pix % n]
}

/// Exact `d_UBW` together with an optimal plan.
pub fn ubw_distance(c: &PixelImage, c2: &PixelImage, params: &UbwParams) -> Result<(f64, TransportPlan)> {
    check_pair(c, c2, params)?;
    let plan = if params.p == 1.0 { solve_metric(c, c2, params) } else { solve_bipartite(c, c2, params) };
    Ok((plan.cost(params), plan))
}

/// `d_UBW / (b · max(‖C‖₁, ‖C′‖₁)^{1/p})`, which lies in `[0, 1]`.
pub fn relative_ubw(c: &PixelImage, c2: &PixelImage, params: &UbwParams) -> Result<f64> {
    let (d, plan) = ubw_distance(c, c2, params)?;
    Ok(relative_from(d, plan.source_total.max(plan.target_total), params))
}

pub(crate) fn relative_from(d: f64, max_mass: f64, params: &UbwParams) -> f64 {
    (d / (params.b * max_mass.powf(1.0 / params.p))).clamp(0.0, 1.0)
}

fn solve_metric(c: &PixelImage, c2: &PixelImage, params: &UbwParams) -> TransportPlan {
    let n = c.n;
    let qa: Vec<i64> = c.cells.iter().map(|x| quantize(*x)).collect();
    let qb: Vec<i64> = c2.cells.iter().map(|x| quantize(*x)).collect();
    let mut entries = Vec::new();
    let mut from = Vec::new();
    let mut to = Vec::new();
    let mut supply = Vec::new();
    for pix in 0..n * n {
        let kept = qa[pix].min(qb[pix]);
        if kept > 0 {
            entries.push(PlanEntry { from: rc_of(pix, n), to: rc_of(pix, n), mass: dequantize(kept) });
        }
        let e = qa[pix] - qb[pix];
        if e > 0 {
            from.push((supply.len(), pix));
            supply.push(e);
        } else if e < 0 {
            to.push((supply.len(), pix));
            supply.push(e);
        }
    }
    let slack_node = supply.len();
    supply.push(-supply.iter().sum::<i64>());
    let half = (params.slack_cost() * COST_SCALE).round() as i64;
    let mut fixed = Vec::new();
    for &(node, _) in &from {
        fixed.push((node, slack_node, half));
    }
    for &(node, _) in &to {
        fixed.push((slack_node, node, half));
    }
    let costs = OffsetCosts::new(n, params);
    let bound = (2.0 * COST_SCALE) as i64;
    let solved = solve_generated(supply, &fixed, &from, &to, &costs, bound);
    collect_plan(c, c2, entries, &solved, &from, &to, slack_node, slack_node)
}

fn solve_bipartite(c: &PixelImage, c2: &PixelImage, params: &UbwParams) -> TransportPlan {
    let n = c.n;
    let mut from = Vec::new();
    let mut to = Vec::new();
    let mut supply = Vec::new();
    let mut total_a = 0;
    let mut total_b = 0;
    for pix in 0..n * n {
        let q = quantize(c.cells[pix]);
        if q > 0 {
            from.push((supply.len(), pix));
            supply.push(q);
            total_a += q;
        }
    }
    for pix in 0..n * n {
        let q = quantize(c2.cells[pix]);
        if q > 0 {
            to.push((supply.len(), pix));
            supply.push(-q);
            total_b += q;
        }
    }
    let create = supply.len();
    supply.push(total_b);
    let delete = supply.len();
    supply.push(-total_a);
    let half = (params.slack_cost() * COST_SCALE).round() as i64;
    let mut fixed = vec![(create, delete, 0)];
    for &(node, _) in &from {
        fixed.push((node, delete, half));
    }
    for &(node, _) in &to {
        fixed.push((create, node, half));
    }
    let costs = OffsetCosts::new(n, params);
    let bound = (2f64.powf(params.p) * COST_SCALE) as i64;
    let solved = solve_generated(supply, &fixed, &from, &to, &costs, bound);
    collect_plan(c, c2, Vec::new(), &solved, &from, &to, create, delete)
}

#[allow(clippy::too_many_arguments)]
fn collect_plan(
    c: &PixelImage,
    c2: &PixelImage,
    mut entries: Vec<PlanEntry>,
    solved: &Solved,
    from: &[(usize, usize)],
    to: &[(usize, usize)],
    create: usize,
    delete: usize,
) -> TransportPlan {
    let n = c.n;
    let ns = &solved.ns;
    for &(a, fpix, tpix) in &solved.pixel_arcs {
        let f = ns.flow(a);
        if f > 0 {
            entries.push(PlanEntry { from: rc_of(fpix, n), to: rc_of(tpix, n), mass: dequantize(f) });
        }
    }
    let mut created = Vec::new();
    let mut destroyed = Vec::new();
    // slack arcs were added first, in the order of `from` then `to`
    for a in 0..ns.arc_count() {
        let (u, v) = ns.arc(a);
        let f = ns.flow(a);
        if f <= 0 || (u == create && v == delete) {
            continue;
        }
        if v == delete && u != create {
            if let Ok(k) = from.binary_search_by_key(&u, |x| x.0) {
                destroyed.push(SlackEntry { at: rc_of(from[k].1, n), mass: dequantize(f) });
            }
        } else if u == create && v != delete {
            if let Ok(k) = to.binary_search_by_key(&v, |x| x.0) {
                created.push(SlackEntry { at: rc_of(to[k].1, n), mass: dequantize(f) });
            }
        }
    }
    entries.sort_by(|x, y| (x.from, x.to).cmp(&(y.from, y.to)));
    created.sort_by(|x, y| x.at.cmp(&y.at));
    destroyed.sort_by(|x, y| x.at.cmp(&y.at));
    let total = |img: &PixelImage| img.cells.iter().map(|x| dequantize(quantize(*x))).sum::<f64>();
    TransportPlan { n, entries, created, destroyed, source_total: total(c), target_total: total(c2) }
}

/// Lower bound on `d_UBW` for `p = 1` from images coarsened by `factor`:
/// blocks of pixels are merged and moving between two blocks is charged the
/// smallest pixel distance between them.
pub fn ubw_lower_bound(c: &PixelImage, c2: &PixelImage, params: &UbwParams, factor: usize) -> Result<f64> {
    check_pair(c, c2, params)?;
    if params.p != 1.0 {
        return Err(Error::InvalidParameter("coarse lower bound needs p = 1".into()));
    }
    let n = c.n;
    let m = n.div_ceil(factor);
    let coarse = |img: &PixelImage| {
        let mut q = vec![0i64; m * m];
        for r in 0..n {
            for s in 0..n {
                q[(r / factor) * m + s / factor] += quantize(img.get(r, s));
            }
        }
        q
    };
    let (qa, qb) = (coarse(c), coarse(c2));
    let mut from = Vec::new();
    let mut to = Vec::new();
    let mut supply = Vec::new();
    for blk in 0..m * m {
        if qa[blk] > 0 {
            from.push((supply.len(), blk));
            supply.push(qa[blk]);
        }
    }
    for blk in 0..m * m {
        if qb[blk] > 0 {
            to.push((supply.len(), blk));
            supply.push(-qb[blk]);
        }
    }
    let total_a: i64 = qa.iter().sum();
    let total_b: i64 = qb.iter().sum();
    let create = supply.len();
    supply.push(total_b);
    let delete = supply.len();
    supply.push(-total_a);
    let half = (params.slack_cost() * COST_SCALE).round() as i64;
    let gap = |d: usize| if d == 0 { 0.0 } else { ((d - 1) * factor + 1) as f64 / n as f64 };
    let mut ns = NetworkSimplex::new(supply, (2.0 * COST_SCALE) as i64);
    ns.add_arc(create, delete, 0);
    for &(node, _) in &from {
        ns.add_arc(node, delete, half);
    }
    for &(node, _) in &to {
        ns.add_arc(create, node, half);
    }
    let mut moves = Vec::new();
    for &(fnode, fb) in &from {
        for &(tnode, tb) in &to {
            let d = gap((fb / m).abs_diff(tb / m)).hypot(gap((fb % m).abs_diff(tb % m)));
            if d < params.b {
                moves.push((ns.add_arc(fnode, tnode, (d * COST_SCALE).round() as i64), d));
            }
        }
    }
    ns.solve();
    let mut moved = 0.0;
    let mut transported = 0i64;
    for (a, d) in moves {
        let f = ns.flow(a);
        moved += d * dequantize(f);
        transported += f;
    }
    let slack = dequantize(total_a + total_b - 2 * transported) * params.slack_cost();
    // rounding of integer costs can only lose a few units in the last place
    Ok(((moved + slack) * (1.0 - 1e-9)).max(0.0))
}
