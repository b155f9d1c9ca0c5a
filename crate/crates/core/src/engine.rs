//! Distance queries over a store of decompositions, with per-kanji data and
//! component distances cached across queries.
//!
//! Most component pairs in a corpus-wide search are far apart. Before solving
//! a transport problem the engine checks cheap lower bounds on `ρ` (the
//! registration penalties plus the ink that must be created or deleted
//! because the two masses differ, then a coarsened transport problem) and
//! skips pairs that cannot beat the unmatched penalty `a`.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::sync::{Arc, Mutex, RwLock};

use rayon::prelude::*;

use crate::decomposition::{ComponentKey, KanjiDecomposition};
use crate::error::{Error, Result};
use crate::matching::{match_prepared, MatchParams, MatchResult, PreparedKanji};
use crate::metric::{registration_penalties, rho_breakdown, ComponentShape, RhoBreakdown};
use crate::ot::ubw_lower_bound;
use crate::raster::DEFAULT_RESOLUTION;
use crate::store::Store;

const COARSE_FACTOR: usize = 4;
/// Coarsenings tried, in order, before a knn candidate gets its exact distance.
const REFINE_FACTORS: [usize; 2] = [8, 4];

#[derive(Debug, Clone, Copy)]
struct Pending {
    value: f64,
    codepoint: char,
    stage: usize,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value.total_cmp(&other.value).then(self.codepoint.cmp(&other.codepoint)).then(self.stage.cmp(&other.stage))
    }
}

/// Everything about one kanji that does not depend on its partner.
#[derive(Debug)]
pub struct KanjiData {
    pub prepared: PreparedKanji,
    /// Shapes in the order of `prepared.index.keys`.
    pub shapes: Vec<ComponentShape>,
}

impl KanjiData {
    pub fn new(d: &KanjiDecomposition, params: &MatchParams, resolution: usize) -> Result<Self> {
        let prepared = PreparedKanji::new(d, params)?;
        let shapes = prepared.index.keys.iter().map(|k| ComponentShape::new(d, *k, resolution)).collect::<Result<_>>()?;
        Ok(Self { prepared, shapes })
    }

    pub fn shape(&self, key: ComponentKey) -> &ComponentShape {
        let i = self.prepared.index.keys.binary_search(&key).expect("key in index set");
        &self.shapes[i]
    }
}

type PairKey = (char, ComponentKey, char, ComponentKey);

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub codepoint: char,
    pub distance: f64,
}

pub struct Engine {
    store: Store,
    params: MatchParams,
    resolution: usize,
    data: RwLock<HashMap<char, Arc<KanjiData>>>,
    rho_cache: Mutex<HashMap<PairKey, Option<f64>>>,
}

impl Engine {
    pub fn new(store: Store, params: MatchParams, resolution: usize) -> Result<Self> {
        params.validate()?;
        if resolution < crate::raster::MIN_RESOLUTION {
            return Err(Error::ResolutionTooCoarse(resolution));
        }
        Ok(Self {
            store,
            params,
            resolution,
            data: RwLock::new(HashMap::new()),
            rho_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn with_defaults(store: Store) -> Result<Self> {
        Self::new(store, MatchParams::default(), DEFAULT_RESOLUTION)
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn params(&self) -> &MatchParams {
        &self.params
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn decomposition(&self, cp: char) -> Result<&KanjiDecomposition> {
        self.store.get(cp)
    }

    pub fn kanji_data(&self, cp: char) -> Result<Arc<KanjiData>> {
        if let Some(d) = self.data.read().expect("lock").get(&cp) {
            return Ok(d.clone());
        }
        let d = Arc::new(KanjiData::new(self.store.get(cp)?, &self.params, self.resolution)?);
        self.data.write().expect("lock").entry(cp).or_insert(d.clone());
        Ok(d)
    }

    /// Lower bound on `ρ` that needs no transport solve.
    fn cheap_bound(&self, s1: &ComponentShape, s2: &ComponentShape) -> f64 {
        let rho = &self.params.rho;
        let pen = registration_penalties(&s1.bbox, &s2.bbox);
        if rho.label_override && s1.labels_match(s2) {
            return rho.combine(0.0, &pen);
        }
        let (m1, m2) = (s1.image.total(), s2.image.total());
        // the mass difference has to be created or deleted at bᵖ/2 per unit
        let ubw = &rho.ubw;
        let gap = ((m1 - m2).abs() * ubw.slack_cost()).powf(1.0 / ubw.p);
        rho.combine(rho.relative(gap, m1.max(m2)), &pen)
    }

    /// Lower bound on `ρ` from the cheap bound and, when that is not
    /// conclusive, a transport problem on a grid coarsened by `factor`.
    fn rho_lower_bound(&self, s1: &ComponentShape, s2: &ComponentShape, factor: usize) -> Result<f64> {
        let a = self.params.a;
        let rho = &self.params.rho;
        let cheap = self.cheap_bound(s1, s2);
        if cheap >= a || rho.ubw.p != 1.0 || (rho.label_override && s1.labels_match(s2)) {
            return Ok(cheap);
        }
        if s1.image.is_empty() || s2.image.is_empty() {
            return Ok(cheap);
        }
        let pen = registration_penalties(&s1.bbox, &s2.bbox);
        let lb = ubw_lower_bound(&s1.image, &s2.image, &rho.ubw, factor)?;
        let x = rho.relative(lb, s1.image.total().max(s2.image.total()));
        Ok(rho.combine(x, &pen).max(cheap))
    }

    /// `ρ`, or `None` once a bound shows `ρ ≥ a`.
    fn rho_pruned(&self, s1: &ComponentShape, s2: &ComponentShape) -> Result<Option<f64>> {
        if self.rho_lower_bound(s1, s2, COARSE_FACTOR)? >= self.params.a {
            return Ok(None);
        }
        Ok(Some(rho_breakdown(s1, s2, &self.params.rho)?.rho))
    }

    fn cached_rho(&self, c1: char, k1: ComponentKey, c2: char, k2: ComponentKey, s1: &ComponentShape, s2: &ComponentShape) -> Result<Option<f64>> {
        // always evaluated in one orientation so that ρ is exactly symmetric
        let (key, swap) = if (c1, k1) <= (c2, k2) { ((c1, k1, c2, k2), false) } else { ((c2, k2, c1, k1), true) };
        if let Some(r) = self.rho_cache.lock().expect("lock").get(&key) {
            return Ok(*r);
        }
        let r = if swap { self.rho_pruned(s2, s1)? } else { self.rho_pruned(s1, s2)? };
        self.rho_cache.lock().expect("lock").insert(key, r);
        Ok(r)
    }

    /// Full breakdown of `ρ` for one component pair (no pruning).
    pub fn rho_detail(&self, c1: char, k1: ComponentKey, c2: char, k2: ComponentKey) -> Result<RhoBreakdown> {
        let (d1, d2) = (self.kanji_data(c1)?, self.kanji_data(c2)?);
        rho_breakdown(d1.shape(k1), d2.shape(k2), &self.params.rho)
    }

    /// `d(c1, c2)` with the optimal matching, pairs listed from `c1`'s side.
    pub fn explain(&self, c1: char, c2: char) -> Result<MatchResult> {
        if c1 > c2 {
            return Ok(self.explain(c2, c1)?.transposed());
        }
        let (d1, d2) = (self.store.get(c1)?, self.store.get(c2)?);
        let (k1, k2) = (self.kanji_data(c1)?, self.kanji_data(c2)?);
        match_prepared((d1, &k1.prepared), (d2, &k2.prepared), &self.params, |a, b| {
            self.cached_rho(c1, a, c2, b, k1.shape(a), k2.shape(b))
        })
    }

    pub fn distance(&self, c1: char, c2: char) -> Result<f64> {
        Ok(self.explain(c1, c2)?.distance)
    }

    /// `d(c1, c2)` solved in the given orientation, bypassing the `ρ` cache.
    /// Only useful for auditing symmetry.
    pub fn distance_uncached(&self, c1: char, c2: char) -> Result<f64> {
        let (d1, d2) = (self.store.get(c1)?, self.store.get(c2)?);
        let (k1, k2) = (self.kanji_data(c1)?, self.kanji_data(c2)?);
        let result = match_prepared((d1, &k1.prepared), (d2, &k2.prepared), &self.params, |a, b| {
            self.rho_pruned(k1.shape(a), k2.shape(b))
        })?;
        Ok(result.distance)
    }

    /// Lower bound on `d(c1, c2)` from the cheap `ρ` bounds.
    pub fn distance_lower_bound(&self, c1: char, c2: char) -> Result<f64> {
        self.bound_at(c1, c2, None)
    }

    /// Lower bound on `d` with each `ρ` bounded by `rho_lower_bound` at the
    /// given coarsening, or by the cheap bound alone.
    fn bound_at(&self, c1: char, c2: char, factor: Option<usize>) -> Result<f64> {
        let (c1, c2) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        let (d1, d2) = (self.store.get(c1)?, self.store.get(c2)?);
        let (k1, k2) = (self.kanji_data(c1)?, self.kanji_data(c2)?);
        let a = self.params.a;
        let result = match_prepared((d1, &k1.prepared), (d2, &k2.prepared), &self.params, |x, y| {
            let (s1, s2) = (k1.shape(x), k2.shape(y));
            let b = match factor {
                Some(f) => self.rho_lower_bound(s1, s2, f)?,
                None => self.cheap_bound(s1, s2),
            };
            Ok((b < a).then_some(b))
        })?;
        Ok(result.distance)
    }

    /// The `k` nearest kanji to `query` among `candidates` (all of the store
    /// when `None`), ascending by distance, ties by codepoint.
    ///
    /// Candidates sit in a heap keyed by their current lower bound. The
    /// smallest is refined through `REFINE_FACTORS` to the exact distance and
    /// is final once it is popped with its exact value.
    pub fn knn(&self, query: char, k: usize, candidates: Option<&[char]>) -> Result<Vec<Neighbor>> {
        self.store.get(query)?;
        let pool: Vec<char> = match candidates {
            Some(c) => c.iter().copied().filter(|c| *c != query).collect(),
            None => self.store.codepoints().into_iter().filter(|c| *c != query).collect(),
        };
        for c in &pool {
            self.store.get(*c)?;
        }
        if k == 0 || pool.is_empty() {
            return Ok(Vec::new());
        }
        let initial: Vec<f64> = pool.par_iter().map(|c| self.bound_at(query, *c, None)).collect::<Result<_>>()?;
        let mut heap: BinaryHeap<Reverse<Pending>> =
            pool.iter().zip(initial).map(|(c, v)| Reverse(Pending { value: v, codepoint: *c, stage: 0 })).collect();
        let batch = rayon::current_num_threads().max(1);
        let exact_stage = REFINE_FACTORS.len() + 1;
        let mut best = Vec::new();
        while best.len() < k {
            let mut work = Vec::new();
            while work.len() < batch {
                let Some(Reverse(top)) = heap.pop() else { break };
                if top.stage == exact_stage {
                    if work.is_empty() {
                        best.push(Neighbor { codepoint: top.codepoint, distance: top.value });
                        if best.len() == k {
                            break;
                        }
                        continue;
                    }
                    heap.push(Reverse(top));
                    break;
                }
                work.push(top);
            }
            if work.is_empty() {
                if heap.is_empty() || best.len() == k {
                    break;
                }
                continue;
            }
            let refined: Vec<Pending> = work
                .par_iter()
                .map(|p| {
                    let value = match REFINE_FACTORS.get(p.stage) {
                        Some(f) => self.bound_at(query, p.codepoint, Some(*f))?.max(p.value),
                        None => self.distance(query, p.codepoint)?,
                    };
                    Ok(Pending { value, codepoint: p.codepoint, stage: p.stage + 1 })
                })
                .collect::<Result<_>>()?;
            heap.extend(refined.into_iter().map(Reverse));
        }
        Ok(best)
    }

    /// Symmetric matrix of distances between the given kanji.
    pub fn distance_matrix(&self, set: &[char]) -> Result<Vec<Vec<f64>>> {
        for c in set {
            self.store.get(*c)?;
        }
        let n = set.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let values: Vec<f64> =
            pairs.par_iter().map(|(i, j)| self.distance(set[*i], set[*j])).collect::<Result<_>>()?;
        let mut m = vec![vec![0.0; n]; n];
        for ((i, j), v) in pairs.into_iter().zip(values) {
            m[i][j] = v;
            m[j][i] = v;
        }
        Ok(m)
    }
}
