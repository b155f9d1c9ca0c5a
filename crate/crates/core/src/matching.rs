//! Kanji distance: the best set of component pairs such that no vein of
//! either kanji is matched twice, scored by `ρ` weighted with `μ` and a flat
//! penalty `a` for all weight left unmatched.

use serde::{Deserialize, Serialize};

use crate::decomposition::{index_and_veins, ComponentKey, IndexSetAndVeins, KanjiDecomposition};
use crate::error::{Error, Result};
use crate::lp::maximize;
use crate::metric::RhoParams;

pub const MAX_VARIABLES: usize = 10_000;
const NODE_LIMIT: usize = 200_000;
const TOL: f64 = 1e-12;

/// `w[l][i]` for levels `0..=L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightStructure {
    pub epsilon: f64,
    pub weights: Vec<Vec<f64>>,
}

impl WeightStructure {
    pub fn get(&self, key: ComponentKey) -> f64 {
        self.weights[key.level][key.index]
    }
}

/// Ink share of each component, decayed by `(1 − ε)` per level below 1.
///
/// A stroke shared by several components of one level has its length split
/// evenly between them, so every level sums to exactly `(1 − ε)^{max(0, l−1)}`.
pub fn component_weights(d: &KanjiDecomposition, epsilon: f64) -> Result<WeightStructure> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!("trickle epsilon = {epsilon}")));
    }
    let lengths = d.stroke_lengths();
    let total: f64 = lengths.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidParameter(format!("{} has no ink", d.codepoint)));
    }
    let mut weights = Vec::new();
    for (l, level) in d.levels.iter().enumerate().take(d.max_level() + 1) {
        let mut share = vec![0usize; lengths.len()];
        for c in level {
            for s in &c.strokes {
                share[s - 1] += 1;
            }
        }
        let decay = (1.0 - epsilon).powi(l.saturating_sub(1) as i32);
        weights.push(
            level
                .iter()
                .map(|c| c.strokes.iter().map(|s| lengths[s - 1] / share[s - 1] as f64).sum::<f64>() / total * decay)
                .collect(),
        );
    }
    Ok(WeightStructure { epsilon, weights })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MuKind {
    #[default]
    Min,
    Geometric,
    Harmonic,
    Arithmetic,
}

impl std::str::FromStr for MuKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(Self::Min),
            "geometric" => Ok(Self::Geometric),
            "harmonic" => Ok(Self::Harmonic),
            "arithmetic" => Ok(Self::Arithmetic),
            other => Err(Error::InvalidParameter(format!("unknown mu kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for MuKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Min => "min",
            Self::Geometric => "geometric",
            Self::Harmonic => "harmonic",
            Self::Arithmetic => "arithmetic",
        })
    }
}

pub fn mu(kind: MuKind, w: f64, w2: f64) -> f64 {
    match kind {
        MuKind::Min => w.min(w2),
        MuKind::Geometric => (w * w2).sqrt(),
        MuKind::Harmonic => {
            if w + w2 > 0.0 {
                2.0 * w * w2 / (w + w2)
            } else {
                0.0
            }
        }
        MuKind::Arithmetic => (w + w2) / 2.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchParams {
    pub a: f64,
    pub mu: MuKind,
    pub epsilon: f64,
    /// Components with fewer strokes are never matched; 0 disables the filter.
    pub min_strokes: usize,
    /// Whether the whole kanji (level 0) may be matched as a component.
    pub include_root: bool,
    pub rho: RhoParams,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self { a: 0.25, mu: MuKind::Min, epsilon: 0.02, min_strokes: 0, include_root: false, rho: RhoParams::default() }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a <= 1.0) {
            return Err(Error::InvalidParameter(format!("a = {} (need 0 < a <= 1)", self.a)));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::InvalidParameter(format!("epsilon = {}", self.epsilon)));
        }
        self.rho.validate()
    }
}

/// Solves `max Σ profit[i][j]·e[i][j]` over binary `e` such that every vein
/// of either side carries at most one chosen pair. Veins list indices into
/// the rows (`veins1`) or columns (`veins2`) of `profit`. Pairs with
/// nonpositive profit are never chosen. Among optimal solutions the
/// lexicographically smallest in row-major order is returned.
pub fn solve_binary_matching(
    profit: &[Vec<f64>],
    veins1: &[Vec<usize>],
    veins2: &[Vec<usize>],
) -> Result<Vec<(usize, usize)>> {
    let mut vars = Vec::new();
    for (i, row) in profit.iter().enumerate() {
        for (j, p) in row.iter().enumerate() {
            if *p > 0.0 {
                vars.push((i, j, *p));
            }
        }
    }
    if vars.len() > MAX_VARIABLES {
        return Err(Error::TooManyVariables(vars.len()));
    }
    let mut rows: Vec<Vec<usize>> = Vec::new();
    for vein in veins1 {
        rows.push((0..vars.len()).filter(|v| vein.contains(&vars[*v].0)).collect());
    }
    for vein in veins2 {
        rows.push((0..vars.len()).filter(|v| vein.contains(&vars[*v].1)).collect());
    }
    rows.retain(|r| r.len() > 1);
    rows.sort();
    rows.dedup();
    let problem = Packing { profit: vars.iter().map(|v| v.2).collect(), rows };
    let mut fixed = vec![None; vars.len()];
    let (best_value, mut best) = problem.solve(&fixed)?;
    // lexicographic tie-break: earliest variables prefer 0
    for v in 0..vars.len() {
        if best[v] {
            fixed[v] = Some(false);
            let (value, sol) = problem.solve(&fixed)?;
            if value >= best_value - TOL * (1.0 + best_value) {
                best = sol;
            } else {
                fixed[v] = Some(true);
            }
        } else {
            fixed[v] = Some(false);
        }
    }
    Ok((0..vars.len()).filter(|v| best[*v]).map(|v| (vars[v].0, vars[v].1)).collect())
}

struct Packing {
    profit: Vec<f64>,
    rows: Vec<Vec<usize>>,
}

impl Packing {
    fn value(&self, x: &[bool]) -> f64 {
        x.iter().zip(&self.profit).filter(|(x, _)| **x).map(|(_, p)| p).sum()
    }

    /// Fixes every variable that shares a row with a variable fixed to 1.
    fn propagate(&self, fixed: &mut [Option<bool>]) -> bool {
        for row in &self.rows {
            let ones = row.iter().filter(|v| fixed[**v] == Some(true)).count();
            if ones > 1 {
                return false;
            }
            if ones == 1 {
                for v in row {
                    if fixed[*v].is_none() {
                        fixed[*v] = Some(false);
                    }
                }
            }
        }
        true
    }

    fn greedy(&self, fixed: &[Option<bool>]) -> Vec<bool> {
        let mut x: Vec<bool> = fixed.iter().map(|f| *f == Some(true)).collect();
        let mut order: Vec<usize> = (0..x.len()).filter(|v| fixed[*v].is_none()).collect();
        order.sort_by(|a, b| self.profit[*b].total_cmp(&self.profit[*a]).then(a.cmp(b)));
        for v in order {
            x[v] = true;
            if self.rows.iter().any(|r| r.iter().filter(|u| x[**u]).count() > 1) {
                x[v] = false;
            }
        }
        x
    }

    /// Best value and solution under the given fixings (infeasible fixings
    /// give value −∞).
    fn solve(&self, fixed: &[Option<bool>]) -> Result<(f64, Vec<bool>)> {
        let mut root = fixed.to_vec();
        if !self.propagate(&mut root) {
            return Ok((f64::NEG_INFINITY, vec![false; fixed.len()]));
        }
        let mut best = self.greedy(&root);
        let mut best_value = self.value(&best);
        let mut stack = vec![root];
        let mut nodes = 0;
        while let Some(node) = stack.pop() {
            nodes += 1;
            if nodes > NODE_LIMIT {
                return Err(Error::SolverLimit { nodes, best: best_value, bound: f64::NAN });
            }
            let free: Vec<usize> = (0..node.len()).filter(|v| node[*v].is_none()).collect();
            let base: f64 = (0..node.len()).filter(|v| node[*v] == Some(true)).map(|v| self.profit[v]).sum();
            let (bound, x) = self.relaxation(&node, &free)?;
            if base + bound <= best_value + TOL * (1.0 + best_value) {
                continue;
            }
            let frac = free
                .iter()
                .zip(&x)
                .filter(|(_, x)| **x > 1e-9 && **x < 1.0 - 1e-9)
                .max_by(|a, b| (0.5 - (a.1 - 0.5).abs()).total_cmp(&(0.5 - (b.1 - 0.5).abs())).then(b.0.cmp(a.0)))
                .map(|(v, _)| *v);
            match frac {
                None => {
                    let mut sol: Vec<bool> = node.iter().map(|f| *f == Some(true)).collect();
                    for (v, xv) in free.iter().zip(&x) {
                        sol[*v] = *xv > 0.5;
                    }
                    let value = self.value(&sol);
                    if value > best_value {
                        best_value = value;
                        best = sol;
                    }
                }
                Some(v) => {
                    let mut zero = node.clone();
                    zero[v] = Some(false);
                    stack.push(zero);
                    let mut one = node;
                    one[v] = Some(true);
                    if self.propagate(&mut one) {
                        stack.push(one);
                    }
                }
            }
        }
        Ok((best_value, best))
    }

    fn relaxation(&self, node: &[Option<bool>], free: &[usize]) -> Result<(f64, Vec<f64>)> {
        if free.is_empty() {
            return Ok((0.0, Vec::new()));
        }
        let mut col = vec![usize::MAX; node.len()];
        for (k, v) in free.iter().enumerate() {
            col[*v] = k;
        }
        let mut rows = Vec::new();
        let mut covered = vec![false; free.len()];
        for row in &self.rows {
            let r: Vec<usize> = row.iter().filter(|v| col[**v] != usize::MAX).map(|v| col[*v]).collect();
            if r.len() > 1 {
                let mut dense = vec![0.0; free.len()];
                for k in r {
                    dense[k] = 1.0;
                    covered[k] = true;
                }
                rows.push(dense);
            }
        }
        for (k, c) in covered.iter().enumerate() {
            if !c {
                let mut dense = vec![0.0; free.len()];
                dense[k] = 1.0;
                rows.push(dense);
            }
        }
        let c: Vec<f64> = free.iter().map(|v| self.profit[*v]).collect();
        let rhs = vec![1.0; rows.len()];
        let sol = maximize(&c, &rows, &rhs)?;
        Ok((sol.objective, sol.x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub from: ComponentKey,
    pub to: ComponentKey,
    pub mu_weight: f64,
    pub rho: f64,
    pub labels: (Option<String>, Option<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub pairs: Vec<MatchedPair>,
    /// `1 − Σ μ` over chosen pairs.
    pub unmatched_weight: f64,
    pub a: f64,
    pub distance: f64,
}

impl MatchResult {
    pub fn matched_weight(&self) -> f64 {
        self.pairs.iter().map(|p| p.mu_weight).sum()
    }

    /// The objective from the pairs and the unmatched weight.
    pub fn objective(&self) -> f64 {
        let matched: f64 = self.pairs.iter().map(|p| p.mu_weight * p.rho).sum();
        matched + self.a * self.unmatched_weight
    }

    /// JSON with 1-based component indices.
    pub fn to_json_value(&self) -> serde_json::Value {
        let pairs: Vec<_> = self
            .pairs
            .iter()
            .map(|p| {
                serde_json::json!({
                    "from": p.from.one_based(),
                    "to": p.to.one_based(),
                    "mu_weight": p.mu_weight,
                    "rho": p.rho,
                    "labels": [p.labels.0, p.labels.1],
                })
            })
            .collect();
        serde_json::json!({
            "pairs": pairs,
            "unmatched_weight": self.unmatched_weight,
            "unmatched_penalty": self.a * self.unmatched_weight,
            "distance": self.distance,
        })
    }
}

/// Per-kanji data the matching program needs, independent of the partner.
#[derive(Debug, Clone)]
pub struct PreparedKanji {
    pub weights: WeightStructure,
    pub index: IndexSetAndVeins,
    /// Veins as positions into `index.keys`.
    veins: Vec<Vec<usize>>,
}

impl PreparedKanji {
    pub fn new(d: &KanjiDecomposition, params: &MatchParams) -> Result<Self> {
        let weights = component_weights(d, params.epsilon)?;
        let mut index = index_and_veins(d);
        if !params.include_root && d.max_level() > 0 {
            index.keys.retain(|k| k.level > 0);
            for v in &mut index.veins {
                v.remove(0);
            }
        }
        let veins = index
            .veins
            .iter()
            .map(|v| v.iter().map(|k| index.keys.binary_search(k).expect("vein key in index set")).collect())
            .collect();
        Ok(Self { weights, index, veins })
    }
}

/// `d(k1, k2)` with component distances supplied by `rho`. The callback gets
/// the two keys and may return `None` when it can tell that `ρ ≥ a` without
/// computing it exactly.
pub fn match_kanji<F>(d1: &KanjiDecomposition, d2: &KanjiDecomposition, params: &MatchParams, rho: F) -> Result<MatchResult>
where
    F: FnMut(ComponentKey, ComponentKey) -> Result<Option<f64>>,
{
    params.validate()?;
    let p1 = PreparedKanji::new(d1, params)?;
    let p2 = PreparedKanji::new(d2, params)?;
    match_prepared((d1, &p1), (d2, &p2), params, rho)
}

fn level_one_total(w: &WeightStructure) -> f64 {
    w.weights.get(1).or(w.weights.first()).map_or(1.0, |level| level.iter().sum())
}

pub fn match_prepared<F>(
    (d1, p1): (&KanjiDecomposition, &PreparedKanji),
    (d2, p2): (&KanjiDecomposition, &PreparedKanji),
    params: &MatchParams,
    mut rho: F,
) -> Result<MatchResult>
where
    F: FnMut(ComponentKey, ComponentKey) -> Result<Option<f64>>,
{
    let (keys1, keys2) = (&p1.index.keys, &p2.index.keys);
    let eligible = |d: &KanjiDecomposition, k: ComponentKey| d.component(k).strokes.len() >= params.min_strokes;
    let mut rhos = vec![vec![None; keys2.len()]; keys1.len()];
    let mut profit = vec![vec![0.0; keys2.len()]; keys1.len()];
    for (i, k1) in keys1.iter().enumerate() {
        if !eligible(d1, *k1) {
            continue;
        }
        for (j, k2) in keys2.iter().enumerate() {
            if !eligible(d2, *k2) {
                continue;
            }
            let m = mu(params.mu, p1.weights.get(*k1), p2.weights.get(*k2));
            if m <= 0.0 {
                continue;
            }
            if let Some(r) = rho(*k1, *k2)? {
                if r < params.a {
                    rhos[i][j] = Some(r);
                    profit[i][j] = m * (params.a - r);
                }
            }
        }
    }
    let chosen = solve_binary_matching(&profit, &p1.veins, &p2.veins)?;
    let pairs: Vec<MatchedPair> = chosen
        .into_iter()
        .map(|(i, j)| {
            let (k1, k2) = (keys1[i], keys2[j]);
            MatchedPair {
                from: k1,
                to: k2,
                mu_weight: mu(params.mu, p1.weights.get(k1), p2.weights.get(k2)),
                rho: rhos[i][j].expect("chosen pair has rho"),
                labels: (d1.component(k1).label.clone(), d2.component(k2).label.clone()),
            }
        })
        .collect();
    let matched: f64 = pairs.iter().map(|p| p.mu_weight).sum();
    // level 1 sums to 1 only up to rounding; measuring against the actual sum
    // keeps d(k, k) at exactly 0
    let total = level_one_total(&p1.weights).min(level_one_total(&p2.weights));
    let mut result = MatchResult { pairs, unmatched_weight: (total - matched).max(0.0), a: params.a, distance: 0.0 };
    result.distance = result.objective().clamp(0.0, params.a);
    Ok(result)
}

impl MatchResult {
    /// The same matching seen from the other kanji.
    pub fn transposed(&self) -> MatchResult {
        let mut pairs: Vec<MatchedPair> = self
            .pairs
            .iter()
            .map(|p| MatchedPair {
                from: p.to,
                to: p.from,
                mu_weight: p.mu_weight,
                rho: p.rho,
                labels: (p.labels.1.clone(), p.labels.0.clone()),
            })
            .collect();
        pairs.sort_by_key(|p| (p.from, p.to));
        MatchResult { pairs, ..self.clone() }
    }
}
