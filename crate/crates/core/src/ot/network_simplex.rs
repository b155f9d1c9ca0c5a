//! Primal network simplex for uncapacitated min-cost flow with integer data.
//!
//! The spanning tree starts from artificial arcs to an extra root node and is
//! kept strongly feasible, which rules out cycling. Arcs may be appended
//! between solves; the current basis stays feasible because new arcs enter at
//! zero flow.

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct NetworkSimplex {
    n: usize,
    supply: Vec<i64>,
    src: Vec<usize>,
    dst: Vec<usize>,
    cost: Vec<i64>,
    flow: Vec<i64>,
    in_tree: Vec<bool>,
    // tree over n + 1 nodes, the last one being the artificial root
    parent: Vec<usize>,
    pred: Vec<usize>,
    /// `pred` arc points from the node to its parent.
    up: Vec<bool>,
    depth: Vec<usize>,
    potential: Vec<i64>,
    first_child: Vec<usize>,
    next_sibling: Vec<usize>,
    prev_sibling: Vec<usize>,
    next_arc: usize,
    cost_bound: i64,
    first_artificial: usize,
    artificial_cost: i64,
    initialized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Some demand can only be met through artificial arcs.
    Infeasible,
}

impl NetworkSimplex {
    /// `supply[v] > 0` for sources, `< 0` for sinks; the total must be zero.
    /// `cost_bound` must dominate the absolute cost of every arc that will
    /// ever be added.
    pub fn new(supply: Vec<i64>, cost_bound: i64) -> Self {
        debug_assert_eq!(supply.iter().sum::<i64>(), 0);
        let n = supply.len();
        Self {
            n,
            cost_bound: cost_bound.max(1),
            first_artificial: 0,
            supply,
            src: Vec::new(),
            dst: Vec::new(),
            cost: Vec::new(),
            flow: Vec::new(),
            in_tree: Vec::new(),
            parent: Vec::new(),
            pred: Vec::new(),
            up: Vec::new(),
            depth: Vec::new(),
            potential: Vec::new(),
            first_child: Vec::new(),
            next_sibling: Vec::new(),
            prev_sibling: Vec::new(),
            next_arc: 0,
            artificial_cost: 0,
            initialized: false,
        }
    }

    pub fn add_arc(&mut self, from: usize, to: usize, cost: i64) -> usize {
        assert!(from < self.n && to < self.n);
        assert!(cost.abs() <= self.cost_bound);
        self.src.push(from);
        self.dst.push(to);
        self.cost.push(cost);
        self.flow.push(0);
        self.in_tree.push(false);
        self.src.len() - 1
    }

    pub fn arc_count(&self) -> usize {
        self.src.len()
    }

    pub fn flow(&self, arc: usize) -> i64 {
        self.flow[arc]
    }

    pub fn arc(&self, arc: usize) -> (usize, usize) {
        (self.src[arc], self.dst[arc])
    }

    /// Node potentials with `cost + π(from) − π(to) ≥ 0` on every arc at optimum.
    pub fn potential(&self, node: usize) -> i64 {
        self.potential[node]
    }

    pub fn reduced_cost(&self, from: usize, to: usize, cost: i64) -> i64 {
        cost + self.potential[from] - self.potential[to]
    }

    fn init(&mut self) {
        let n = self.n;
        let root = n;
        // larger than the cost of any simple path
        self.artificial_cost = self.cost_bound.saturating_mul(n as i64 + 2);
        self.first_artificial = self.src.len();
        self.parent = vec![root; n + 1];
        self.pred = vec![NONE; n + 1];
        self.up = vec![false; n + 1];
        self.depth = vec![1; n + 1];
        self.potential = vec![0; n + 1];
        self.first_child = vec![NONE; n + 1];
        self.next_sibling = vec![NONE; n + 1];
        self.prev_sibling = vec![NONE; n + 1];
        self.parent[root] = NONE;
        self.depth[root] = 0;
        for v in 0..n {
            let s = self.supply[v];
            let a = self.src.len();
            let big = self.artificial_cost;
            if s >= 0 {
                self.src.push(v);
                self.dst.push(root);
                self.flow.push(s);
                self.up[v] = true;
                self.potential[v] = -big;
            } else {
                self.src.push(root);
                self.dst.push(v);
                self.flow.push(-s);
                self.up[v] = false;
                self.potential[v] = big;
            }
            self.cost.push(big);
            self.in_tree.push(true);
            self.pred[v] = a;
            self.link_child(root, v);
        }
        self.initialized = true;
    }

    fn link_child(&mut self, parent: usize, child: usize) {
        let old = self.first_child[parent];
        self.next_sibling[child] = old;
        self.prev_sibling[child] = NONE;
        if old != NONE {
            self.prev_sibling[old] = child;
        }
        self.first_child[parent] = child;
        self.parent[child] = parent;
    }

    fn unlink_child(&mut self, child: usize) {
        let p = self.parent[child];
        let (prev, next) = (self.prev_sibling[child], self.next_sibling[child]);
        if prev != NONE {
            self.next_sibling[prev] = next;
        } else {
            self.first_child[p] = next;
        }
        if next != NONE {
            self.prev_sibling[next] = prev;
        }
        self.prev_sibling[child] = NONE;
        self.next_sibling[child] = NONE;
    }

    fn reduced(&self, a: usize) -> i64 {
        self.cost[a] + self.potential[self.src[a]] - self.potential[self.dst[a]]
    }

    /// Block search for an arc with negative reduced cost.
    fn find_entering(&mut self, real_arcs: usize, block: usize) -> Option<usize> {
        if real_arcs == 0 {
            return None;
        }
        let mut best = NONE;
        let mut best_rc = 0;
        let mut scanned_in_block = 0;
        let mut a = self.next_arc % real_arcs;
        for _ in 0..real_arcs {
            if !self.in_tree[a] {
                let rc = self.reduced(a);
                if rc < best_rc {
                    best_rc = rc;
                    best = a;
                }
            }
            a += 1;
            if a == real_arcs {
                a = 0;
            }
            scanned_in_block += 1;
            if scanned_in_block == block {
                if best != NONE {
                    self.next_arc = a;
                    return Some(best);
                }
                scanned_in_block = 0;
            }
        }
        if best != NONE {
            self.next_arc = a;
            Some(best)
        } else {
            None
        }
    }

    fn join(&self, mut u: usize, mut v: usize) -> usize {
        while u != v {
            if self.depth[u] >= self.depth[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        u
    }

    /// Flow that can be pushed before the tree arc above `x` blocks, when the
    /// cycle traverses it towards the root (`towards_root`) or away from it.
    fn blocking(&self, x: usize, towards_root: bool) -> Option<i64> {
        // flow increases when traversal direction matches arc direction
        if self.up[x] == towards_root {
            None
        } else {
            Some(self.flow[self.pred[x]])
        }
    }

    fn pivot(&mut self, entering: usize) {
        let (u, v) = (self.src[entering], self.dst[entering]);
        let w = self.join(u, v);
        // cycle: w down to u, u -> v, v up to w
        let mut delta = i64::MAX;
        let mut leave_node = NONE;
        let mut leave_on_v_side = false;
        let mut x = u;
        while x != w {
            if let Some(f) = self.blocking(x, false) {
                if f < delta {
                    delta = f;
                    leave_node = x;
                }
            }
            x = self.parent[x];
        }
        let mut x = v;
        while x != w {
            if let Some(f) = self.blocking(x, true) {
                if f <= delta {
                    delta = f;
                    leave_node = x;
                    leave_on_v_side = true;
                }
            }
            x = self.parent[x];
        }
        if leave_node == NONE {
            // unbounded decrease cannot happen with nonnegative cycle costs
            unreachable!("negative cycle in uncapacitated network");
        }
        if delta > 0 {
            self.flow[entering] += delta;
            let mut x = u;
            while x != w {
                let a = self.pred[x];
                if self.up[x] {
                    self.flow[a] -= delta;
                } else {
                    self.flow[a] += delta;
                }
                x = self.parent[x];
            }
            let mut x = v;
            while x != w {
                let a = self.pred[x];
                if self.up[x] {
                    self.flow[a] += delta;
                } else {
                    self.flow[a] -= delta;
                }
                x = self.parent[x];
            }
        }
        let leaving = self.pred[leave_node];
        self.in_tree[leaving] = false;
        self.in_tree[entering] = true;
        // re-hang the subtree below leave_node from the entering arc
        let (new_parent, mut x, entering_up) =
            if leave_on_v_side { (u, v, false) } else { (v, u, true) };
        let mut incoming_arc = entering;
        let mut incoming_up = entering_up;
        let mut new_par = new_parent;
        loop {
            let old_parent = self.parent[x];
            let old_pred = self.pred[x];
            let old_up = self.up[x];
            self.unlink_child(x);
            self.link_child(new_par, x);
            self.pred[x] = incoming_arc;
            self.up[x] = incoming_up;
            if x == leave_node {
                break;
            }
            incoming_arc = old_pred;
            // the old pred arc joined x and old_parent; seen from old_parent
            // its direction flips
            incoming_up = !old_up;
            new_par = x;
            x = old_parent;
        }
        // refresh potentials and depths in the moved subtree
        let top = if leave_on_v_side { v } else { u };
        let mut stack = vec![top];
        while let Some(y) = stack.pop() {
            let p = self.parent[y];
            let a = self.pred[y];
            self.depth[y] = self.depth[p] + 1;
            // tree arcs have zero reduced cost
            self.potential[y] = if self.src[a] == y {
                self.potential[p] - self.cost[a]
            } else {
                self.potential[p] + self.cost[a]
            };
            let mut c = self.first_child[y];
            while c != NONE {
                stack.push(c);
                c = self.next_sibling[c];
            }
        }
    }

    /// Runs primal simplex pivots until no arc has negative reduced cost.
    pub fn solve(&mut self) -> SolveStatus {
        if !self.initialized {
            self.init();
        }
        let arcs = self.src.len();
        let block = ((arcs as f64).sqrt() as usize).max(10);
        while let Some(e) = self.find_entering(arcs, block) {
            self.pivot(e);
        }
        let art = self.first_artificial;
        if (art..art + self.n).any(|a| self.flow[a] > 0) {
            SolveStatus::Infeasible
        } else {
            SolveStatus::Optimal
        }
    }
}
