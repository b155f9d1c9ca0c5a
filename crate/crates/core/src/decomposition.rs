//! Nested component decompositions built from kanjiVG group trees.
//!
//! Level 0 holds the whole kanji, level `L+1` the single strokes. Levels in
//! between come from expanding kanjiVG groups one layer at a time. Components
//! that were split into parts because of stroke order are re-united first,
//! and groups that merely wrap another group with the same strokes are
//! flattened.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::stroke_length;
use crate::kanjivg::{RawGroup, RawKanjiTree, Stroke};

pub const DEFAULT_MAX_LEVEL: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    /// Sorted 1-based stroke indices.
    pub strokes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Component {
    pub fn is_subset_of(&self, other: &Component) -> bool {
        is_subset(&self.strokes, &other.strokes)
    }
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    // both sorted
    let mut j = 0;
    for x in a {
        while j < b.len() && b[j] < *x {
            j += 1;
        }
        if j == b.len() || b[j] != *x {
            return false;
        }
    }
    true
}

/// Component position: `level` and 0-based index within the level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ComponentKey {
    pub level: usize,
    pub index: usize,
}

impl ComponentKey {
    pub const ROOT: ComponentKey = ComponentKey { level: 0, index: 0 };

    pub const fn new(level: usize, index: usize) -> Self {
        Self { level, index }
    }

    /// `[level, index]` with 1-based index, as used in exported JSON.
    pub fn one_based(self) -> [usize; 2] {
        [self.level, self.index + 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanjiDecomposition {
    pub codepoint: char,
    pub strokes: Vec<Stroke>,
    pub levels: Vec<Vec<Component>>,
}

impl KanjiDecomposition {
    /// Number of intermediate levels `L`.
    pub fn max_level(&self) -> usize {
        self.levels.len() - 2
    }

    pub fn component(&self, key: ComponentKey) -> &Component {
        &self.levels[key.level][key.index]
    }

    pub fn stroke(&self, index: usize) -> &Stroke {
        &self.strokes[index - 1]
    }

    /// Keys of all matchable components: the root and levels `1..=L`.
    pub fn essential_keys(&self) -> Vec<ComponentKey> {
        (0..=self.max_level())
            .flat_map(|l| (0..self.levels[l].len()).map(move |i| ComponentKey::new(l, i)))
            .collect()
    }

    /// Arc lengths of all strokes on the unit canvas.
    pub fn stroke_lengths(&self) -> Vec<f64> {
        self.strokes.iter().map(|s| stroke_length(&s.unit_path())).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: KanjiDecomposition = serde_json::from_str(text)?;
        validate_decomposition(&d)?;
        Ok(d)
    }
}

#[derive(Debug, Clone)]
struct Node {
    label: Option<String>,
    strokes: Vec<usize>,
    children: Vec<usize>,
}

type PartKey = (Option<String>, Option<String>, Option<u32>);

fn part_key(g: &RawGroup) -> PartKey {
    (g.element.clone(), g.original.clone(), g.number)
}

/// Groups whose part numbers form exactly `1..=k` for `k >= 2`.
fn mergeable_parts(root: &RawGroup) -> HashMap<PartKey, Vec<&RawGroup>> {
    fn walk<'a>(g: &'a RawGroup, acc: &mut HashMap<PartKey, Vec<&'a RawGroup>>) {
        if g.part.is_some() && g.element.is_some() {
            acc.entry(part_key(g)).or_default().push(g);
        }
        for c in g.groups() {
            walk(c, acc);
        }
    }
    let mut acc = HashMap::new();
    walk(root, &mut acc);
    acc.retain(|_, groups| {
        groups.sort_by_key(|g| g.part);
        groups.len() >= 2
            && groups.iter().enumerate().all(|(i, g)| g.part == Some(i as u32 + 1))
    });
    acc
}

struct Arena<'a> {
    nodes: Vec<Node>,
    parts: HashMap<PartKey, Vec<&'a RawGroup>>,
    merged: HashMap<PartKey, Option<usize>>,
}

impl<'a> Arena<'a> {
    fn push(&mut self, node: Node) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn convert(&mut self, g: &'a RawGroup) -> Result<usize> {
        if g.part.is_some() {
            let key = part_key(g);
            if let Some(groups) = self.parts.get(&key).cloned() {
                match self.merged.get(&key) {
                    Some(Some(id)) => return Ok(*id),
                    Some(None) => {
                        return Err(Error::PartCycle(key.0.unwrap_or_default()));
                    }
                    None => {}
                }
                self.merged.insert(key.clone(), None);
                let mut strokes = BTreeSet::new();
                let mut children = Vec::new();
                for part in &groups {
                    strokes.extend(part.strokes());
                    for c in part.groups() {
                        children.push(self.convert(c)?);
                    }
                }
                let id = self.push(Node {
                    label: g.element.clone(),
                    strokes: strokes.into_iter().collect(),
                    children,
                });
                self.merged.insert(key, Some(id));
                return Ok(id);
            }
        }
        let mut children = Vec::new();
        for c in g.groups() {
            children.push(self.convert(c)?);
        }
        let mut strokes = g.strokes();
        strokes.sort_unstable();
        Ok(self.push(Node { label: g.element.clone(), strokes, children }))
    }

    fn loose_strokes(&self, id: usize) -> Vec<usize> {
        let covered: BTreeSet<usize> = self.nodes[id]
            .children
            .iter()
            .flat_map(|c| self.nodes[*c].strokes.iter().copied())
            .collect();
        self.nodes[id].strokes.iter().copied().filter(|s| !covered.contains(s)).collect()
    }

    /// Removes groups that only wrap a single group with the same strokes.
    fn flatten_wrappers(&mut self) {
        for id in 0..self.nodes.len() {
            loop {
                let node = &self.nodes[id];
                if node.children.len() != 1 {
                    break;
                }
                let child = node.children[0];
                if self.nodes[child].strokes != node.strokes {
                    break;
                }
                let inner = self.nodes[child].clone();
                let node = &mut self.nodes[id];
                node.children = inner.children;
                node.label = node.label.take().or(inner.label);
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    component: Component,
    node: Option<usize>,
}

fn build_levels(arena: &Arena, root: usize, max_level: usize, n_strokes: usize) -> Vec<Vec<Component>> {
    let mut levels: Vec<Vec<Entry>> = vec![vec![Entry {
        component: Component { strokes: (1..=n_strokes).collect(), label: arena.nodes[root].label.clone() },
        node: Some(root),
    }]];
    for _ in 1..=max_level {
        let prev = levels.last().unwrap();
        let mut next = Vec::new();
        for e in prev {
            match e.node {
                Some(id) if !arena.nodes[id].children.is_empty() => {
                    for &c in &arena.nodes[id].children {
                        let n = &arena.nodes[c];
                        next.push(Entry {
                            component: Component { strokes: n.strokes.clone(), label: n.label.clone() },
                            node: Some(c),
                        });
                    }
                    let rest = arena.loose_strokes(id);
                    if !rest.is_empty() {
                        next.push(Entry { component: Component { strokes: rest, label: None }, node: None });
                    }
                }
                _ => next.push(e.clone()),
            }
        }
        levels.push(tidy_level(arena, next));
    }
    let mut out: Vec<Vec<Component>> =
        levels.into_iter().map(|l| l.into_iter().map(|e| e.component).collect()).collect();
    out.push((1..=n_strokes).map(|s| Component { strokes: vec![s], label: None }).collect());
    out
}

/// Merges duplicates, drops components strictly inside another one of the
/// same level, and sorts by first stroke (larger first on ties).
fn tidy_level(arena: &Arena, entries: Vec<Entry>) -> Vec<Entry> {
    let expandable = |e: &Entry| e.node.is_some_and(|n| !arena.nodes[n].children.is_empty());
    let mut by_strokes: BTreeMap<Vec<usize>, Entry> = BTreeMap::new();
    for e in entries {
        match by_strokes.get_mut(&e.component.strokes) {
            None => {
                by_strokes.insert(e.component.strokes.clone(), e);
            }
            Some(kept) => {
                if kept.component.label.is_none() {
                    kept.component.label = e.component.label.clone();
                }
                if !expandable(kept) && expandable(&e) {
                    kept.node = e.node;
                }
            }
        }
    }
    let all: Vec<Entry> = by_strokes.into_values().collect();
    let mut kept: Vec<Entry> = all
        .iter()
        .filter(|e| {
            let inside = all.iter().any(|o| {
                o.component.strokes.len() > e.component.strokes.len()
                    && e.component.is_subset_of(&o.component)
            });
            if inside {
                debug!("dropping nested component {:?}", e.component.strokes);
            }
            !inside
        })
        .cloned()
        .collect();
    kept.sort_by(|a, b| {
        let (sa, sb) = (&a.component.strokes, &b.component.strokes);
        sa[0].cmp(&sb[0]).then(sb.len().cmp(&sa.len())).then(sa.cmp(sb))
    });
    kept
}

/// Turns a raw kanjiVG tree into a validated decomposition with `max_level`
/// intermediate levels.
pub fn build_decomposition(tree: &RawKanjiTree, max_level: usize) -> Result<KanjiDecomposition> {
    let codepoint = tree.codepoint.ok_or(Error::MissingCodepoint)?;
    match build_with(tree, codepoint, max_level, true) {
        Ok(d) => Ok(d),
        Err(e @ (Error::Structure { .. } | Error::PartCycle(_))) => {
            debug!("{codepoint}: {e}; retrying without part re-union");
            build_with(tree, codepoint, max_level, false)
        }
        Err(e) => Err(e),
    }
}

fn build_with(
    tree: &RawKanjiTree,
    codepoint: char,
    max_level: usize,
    merge_parts: bool,
) -> Result<KanjiDecomposition> {
    let mut arena = Arena {
        nodes: Vec::new(),
        parts: if merge_parts { mergeable_parts(&tree.root) } else { HashMap::new() },
        merged: HashMap::new(),
    };
    let root = arena.convert(&tree.root)?;
    arena.flatten_wrappers();
    let d = KanjiDecomposition {
        codepoint,
        strokes: tree.strokes.clone(),
        levels: build_levels(&arena, root, max_level, tree.strokes.len()),
    };
    validate_decomposition(&d)?;
    Ok(d)
}

/// Checks the structural properties every decomposition must have.
pub fn validate_decomposition(d: &KanjiDecomposition) -> Result<()> {
    let fail = |message: String| Err(Error::Structure { codepoint: d.codepoint, message });
    let n = d.strokes.len();
    if n == 0 {
        return Err(Error::NoStrokes);
    }
    if d.levels.len() < 2 {
        return fail("fewer than two levels".into());
    }
    for (i, s) in d.strokes.iter().enumerate() {
        if s.index != i + 1 || s.beziers.is_empty() {
            return fail(format!("stroke {} is misnumbered or empty", i + 1));
        }
    }
    let all: Vec<usize> = (1..=n).collect();
    if d.levels[0].len() != 1 || d.levels[0][0].strokes != all {
        return fail("level 0 is not the single all-strokes component".into());
    }
    let last = d.levels.last().unwrap();
    if last.len() != n || last.iter().enumerate().any(|(i, c)| c.strokes != [i + 1]) {
        return fail("last level is not the singletons".into());
    }
    for (l, level) in d.levels.iter().enumerate() {
        let mut covered = BTreeSet::new();
        for c in level {
            if c.strokes.is_empty() || c.strokes.windows(2).any(|w| w[0] >= w[1]) {
                return fail(format!("level {l} has an empty or unsorted component"));
            }
            if c.strokes[c.strokes.len() - 1] > n {
                return fail(format!("level {l} refers to a missing stroke"));
            }
            if c.label.as_deref() == Some("") {
                return fail(format!("level {l} has an empty label"));
            }
            covered.extend(c.strokes.iter().copied());
        }
        if covered.len() != n {
            return fail(format!("level {l} does not cover all strokes"));
        }
        for (i, a) in level.iter().enumerate() {
            for (j, b) in level.iter().enumerate() {
                if i != j && a.is_subset_of(b) {
                    return fail(format!(
                        "components ({l},{}) {:?} and ({l},{}) {:?} are nested",
                        i + 1,
                        a.strokes,
                        j + 1,
                        b.strokes
                    ));
                }
            }
        }
        if l > 0 {
            for (i, c) in level.iter().enumerate() {
                if !d.levels[l - 1].iter().any(|p| c.is_subset_of(p)) {
                    return fail(format!("component ({l},{}) has no parent", i + 1));
                }
            }
        }
        if l + 1 < d.levels.len() {
            for (i, c) in level.iter().enumerate() {
                if !d.levels[l + 1].iter().any(|s| s.is_subset_of(c)) {
                    return fail(format!("component ({l},{}) has no part on the next level", i + 1));
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSetAndVeins {
    pub keys: Vec<ComponentKey>,
    /// Each vein lists one key per level `0..=L`.
    pub veins: Vec<Vec<ComponentKey>>,
}

/// Enumerates the matchable components and all maximal inclusion chains from
/// the root down to level `L`.
pub fn index_and_veins(d: &KanjiDecomposition) -> IndexSetAndVeins {
    let max_level = d.max_level();
    let mut veins = Vec::new();
    let mut chain = vec![ComponentKey::ROOT];
    fn extend(
        d: &KanjiDecomposition,
        max_level: usize,
        chain: &mut Vec<ComponentKey>,
        out: &mut Vec<Vec<ComponentKey>>,
    ) {
        let top = *chain.last().unwrap();
        if top.level == max_level {
            out.push(chain.clone());
            return;
        }
        let parent = d.component(top);
        for (i, c) in d.levels[top.level + 1].iter().enumerate() {
            if c.is_subset_of(parent) {
                chain.push(ComponentKey::new(top.level + 1, i));
                extend(d, max_level, chain, out);
                chain.pop();
            }
        }
    }
    extend(d, max_level, &mut chain, &mut veins);
    IndexSetAndVeins { keys: d.essential_keys(), veins }
}
