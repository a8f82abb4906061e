//! Exact s-t max-flow with the Boykov-Kolmogorov dual search-tree algorithm.
//!
//! Terminal links are stored per node as a single signed residual
//! (`tr_cap > 0`: residual from the source, `< 0`: residual to the sink), the
//! layout vision graphs favour. Arcs come in sister pairs `a`, `a ^ 1`.

use std::collections::VecDeque;

type NodeId = u32;
type ArcId = u32;

const NONE: u32 = u32::MAX;
const TERMINAL: u32 = u32::MAX - 1;
const ORPHAN: u32 = u32::MAX - 2;

#[derive(Debug, Clone)]
struct Node {
    first: ArcId,
    parent: ArcId,
    active: bool,
    is_sink: bool,
    ts: u64,
    dist: u32,
    tr_cap: f64,
}

#[derive(Debug, Clone)]
struct Arc {
    head: NodeId,
    next: ArcId,
    r_cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutSide {
    Source,
    Sink,
}

#[derive(Debug, Clone)]
pub struct FlowGraph {
    nodes: Vec<Node>,
    arcs: Vec<Arc>,
    flow: f64,
    active: VecDeque<NodeId>,
    orphans: VecDeque<NodeId>,
    time: u64,
}

fn sister(a: ArcId) -> ArcId {
    a ^ 1
}

impl FlowGraph {
    pub fn new(node_count: usize) -> Self {
        Self::with_capacity(node_count, 0)
    }

    pub fn with_capacity(node_count: usize, edge_hint: usize) -> Self {
        assert!(node_count < ORPHAN as usize, "too many nodes");
        Self {
            nodes: vec![
                Node {
                    first: NONE,
                    parent: NONE,
                    active: false,
                    is_sink: false,
                    ts: 0,
                    dist: 0,
                    tr_cap: 0.0,
                };
                node_count
            ],
            arcs: Vec::with_capacity(2 * edge_hint),
            flow: 0.0,
            active: VecDeque::new(),
            orphans: VecDeque::new(),
            time: 0,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Adds `i -> j` with capacity `cap` and `j -> i` with `rev_cap`.
    pub fn add_edge(&mut self, i: usize, j: usize, cap: f64, rev_cap: f64) {
        debug_assert!(cap >= 0.0 && rev_cap >= 0.0 && cap.is_finite() && rev_cap.is_finite());
        assert!(i != j, "self loops are not allowed");
        let a = self.arcs.len() as ArcId;
        self.arcs.push(Arc {
            head: j as NodeId,
            next: self.nodes[i].first,
            r_cap: cap,
        });
        self.nodes[i].first = a;
        self.arcs.push(Arc {
            head: i as NodeId,
            next: self.nodes[j].first,
            r_cap: rev_cap,
        });
        self.nodes[j].first = a + 1;
    }

    /// Adds capacity from the source to `i` and from `i` to the sink.
    pub fn add_tweights(&mut self, i: usize, mut cap_source: f64, mut cap_sink: f64) {
        debug_assert!(cap_source >= 0.0 && cap_sink >= 0.0);
        let delta = self.nodes[i].tr_cap;
        if delta > 0.0 {
            cap_source += delta;
        } else {
            cap_sink -= delta;
        }
        self.flow += cap_source.min(cap_sink);
        self.nodes[i].tr_cap = cap_source - cap_sink;
    }

    fn set_active(&mut self, i: NodeId) {
        let n = &mut self.nodes[i as usize];
        if !n.active {
            n.active = true;
            self.active.push_back(i);
        }
    }

    fn next_active(&mut self) -> Option<NodeId> {
        while let Some(i) = self.active.pop_front() {
            let n = &mut self.nodes[i as usize];
            n.active = false;
            if n.parent != NONE {
                return Some(i);
            }
        }
        None
    }

    fn orphan_front(&mut self, i: NodeId) {
        self.nodes[i as usize].parent = ORPHAN;
        self.orphans.push_front(i);
    }

    fn orphan_rear(&mut self, i: NodeId) {
        self.nodes[i as usize].parent = ORPHAN;
        self.orphans.push_back(i);
    }

    /// Runs to completion and returns the maximum flow value.
    pub fn max_flow(&mut self) -> f64 {
        self.active.clear();
        self.orphans.clear();
        self.time = 0;
        for i in 0..self.nodes.len() {
            let n = &mut self.nodes[i];
            n.active = false;
            n.ts = 0;
            if n.tr_cap != 0.0 {
                n.is_sink = n.tr_cap < 0.0;
                n.parent = TERMINAL;
                n.dist = 1;
                self.set_active(i as NodeId);
            } else {
                n.parent = NONE;
            }
        }

        let mut current: Option<NodeId> = None;
        loop {
            let mut i = current.take().and_then(|c| {
                let n = &mut self.nodes[c as usize];
                n.active = false;
                (n.parent != NONE).then_some(c)
            });
            if i.is_none() {
                i = self.next_active();
            }
            let Some(i) = i else { break };

            let middle = self.grow(i);
            self.time += 1;

            if let Some(a) = middle {
                // Keep growing from `i` next round; it may reach the other tree again.
                self.nodes[i as usize].active = true;
                current = Some(i);
                self.augment(a);
                while let Some(o) = self.orphans.pop_front() {
                    if self.nodes[o as usize].is_sink {
                        self.adopt_sink_orphan(o);
                    } else {
                        self.adopt_source_orphan(o);
                    }
                }
            }
        }
        self.flow
    }

    /// Expands the tree containing `i`; returns a source-to-sink arc when the trees touch.
    fn grow(&mut self, i: NodeId) -> Option<ArcId> {
        let (i_sink, i_ts, i_dist) = {
            let n = &self.nodes[i as usize];
            (n.is_sink, n.ts, n.dist)
        };
        let mut a = self.nodes[i as usize].first;
        while a != NONE {
            let residual = if i_sink {
                self.arcs[sister(a) as usize].r_cap
            } else {
                self.arcs[a as usize].r_cap
            };
            if residual > 0.0 {
                let j = self.arcs[a as usize].head;
                let nj = &self.nodes[j as usize];
                if nj.parent == NONE {
                    let nj = &mut self.nodes[j as usize];
                    nj.is_sink = i_sink;
                    nj.parent = sister(a);
                    nj.ts = i_ts;
                    nj.dist = i_dist + 1;
                    self.set_active(j);
                } else if nj.is_sink != i_sink {
                    return Some(if i_sink { sister(a) } else { a });
                } else if nj.ts <= i_ts && nj.dist > i_dist {
                    let nj = &mut self.nodes[j as usize];
                    nj.parent = sister(a);
                    nj.ts = i_ts;
                    nj.dist = i_dist + 1;
                }
            }
            a = self.arcs[a as usize].next;
        }
        None
    }

    fn augment(&mut self, middle: ArcId) {
        let mut bottleneck = self.arcs[middle as usize].r_cap;

        let mut i = self.arcs[sister(middle) as usize].head;
        loop {
            let a = self.nodes[i as usize].parent;
            if a == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.arcs[sister(a) as usize].r_cap);
            i = self.arcs[a as usize].head;
        }
        bottleneck = bottleneck.min(self.nodes[i as usize].tr_cap);

        let mut i = self.arcs[middle as usize].head;
        loop {
            let a = self.nodes[i as usize].parent;
            if a == TERMINAL {
                break;
            }
            bottleneck = bottleneck.min(self.arcs[a as usize].r_cap);
            i = self.arcs[a as usize].head;
        }
        bottleneck = bottleneck.min(-self.nodes[i as usize].tr_cap);

        self.arcs[sister(middle) as usize].r_cap += bottleneck;
        self.arcs[middle as usize].r_cap -= bottleneck;

        let mut i = self.arcs[sister(middle) as usize].head;
        loop {
            let a = self.nodes[i as usize].parent;
            if a == TERMINAL {
                break;
            }
            self.arcs[a as usize].r_cap += bottleneck;
            self.arcs[sister(a) as usize].r_cap -= bottleneck;
            if self.arcs[sister(a) as usize].r_cap == 0.0 {
                self.orphan_front(i);
            }
            i = self.arcs[a as usize].head;
        }
        self.nodes[i as usize].tr_cap -= bottleneck;
        if self.nodes[i as usize].tr_cap == 0.0 {
            self.orphan_front(i);
        }

        let mut i = self.arcs[middle as usize].head;
        loop {
            let a = self.nodes[i as usize].parent;
            if a == TERMINAL {
                break;
            }
            self.arcs[sister(a) as usize].r_cap += bottleneck;
            self.arcs[a as usize].r_cap -= bottleneck;
            if self.arcs[a as usize].r_cap == 0.0 {
                self.orphan_front(i);
            }
            i = self.arcs[a as usize].head;
        }
        self.nodes[i as usize].tr_cap += bottleneck;
        if self.nodes[i as usize].tr_cap == 0.0 {
            self.orphan_front(i);
        }

        self.flow += bottleneck;
    }

    /// Distance from `j` to its terminal through valid parents, or `None`
    /// when the chain ends in an orphan. Stamps the walked path.
    fn origin_distance(&mut self, start: NodeId) -> Option<u32> {
        let mut j = start;
        let mut d: u32 = 0;
        loop {
            let n = &self.nodes[j as usize];
            if n.ts == self.time {
                d += n.dist;
                break;
            }
            let a = n.parent;
            d += 1;
            if a == TERMINAL {
                let n = &mut self.nodes[j as usize];
                n.ts = self.time;
                n.dist = 1;
                break;
            }
            if a == ORPHAN {
                return None;
            }
            j = self.arcs[a as usize].head;
        }
        let total = d;
        let mut j = start;
        while self.nodes[j as usize].ts != self.time {
            let n = &mut self.nodes[j as usize];
            n.ts = self.time;
            n.dist = d;
            d -= 1;
            j = self.arcs[n.parent as usize].head;
        }
        Some(total)
    }

    fn adopt_source_orphan(&mut self, i: NodeId) {
        self.adopt_orphan(i, false);
    }

    fn adopt_sink_orphan(&mut self, i: NodeId) {
        self.adopt_orphan(i, true);
    }

    fn adopt_orphan(&mut self, i: NodeId, sink_tree: bool) {
        let mut best: Option<(ArcId, u32)> = None;
        let mut a0 = self.nodes[i as usize].first;
        while a0 != NONE {
            // Residual from the candidate parent into `i` (source tree) or
            // from `i` into the candidate parent (sink tree).
            let residual = if sink_tree {
                self.arcs[a0 as usize].r_cap
            } else {
                self.arcs[sister(a0) as usize].r_cap
            };
            if residual > 0.0 {
                let j = self.arcs[a0 as usize].head;
                let nj = &self.nodes[j as usize];
                if nj.is_sink == sink_tree && nj.parent != NONE {
                    if let Some(d) = self.origin_distance(j) {
                        if best.is_none_or(|(_, bd)| d < bd) {
                            best = Some((a0, d));
                        }
                    }
                }
            }
            a0 = self.arcs[a0 as usize].next;
        }

        if let Some((a0, d)) = best {
            let n = &mut self.nodes[i as usize];
            n.parent = a0;
            n.ts = self.time;
            n.dist = d + 1;
            return;
        }

        self.nodes[i as usize].parent = NONE;
        let mut a0 = self.nodes[i as usize].first;
        while a0 != NONE {
            let j = self.arcs[a0 as usize].head;
            let (j_sink, j_parent) = {
                let nj = &self.nodes[j as usize];
                (nj.is_sink, nj.parent)
            };
            if j_sink == sink_tree && j_parent != NONE {
                let residual = if sink_tree {
                    self.arcs[a0 as usize].r_cap
                } else {
                    self.arcs[sister(a0) as usize].r_cap
                };
                if residual > 0.0 {
                    self.set_active(j);
                }
                if j_parent != TERMINAL
                    && j_parent != ORPHAN
                    && self.arcs[j_parent as usize].head == i
                {
                    self.orphan_rear(j);
                }
            }
            a0 = self.arcs[a0 as usize].next;
        }
    }

    /// Nodes reachable from the source in the final residual graph; the
    /// source side of the minimum cut. Call after [`FlowGraph::max_flow`].
    pub fn source_side(&self) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.tr_cap > 0.0 {
                seen[i] = true;
                queue.push_back(i as NodeId);
            }
        }
        while let Some(i) = queue.pop_front() {
            let mut a = self.nodes[i as usize].first;
            while a != NONE {
                let arc = &self.arcs[a as usize];
                if arc.r_cap > 0.0 && !seen[arc.head as usize] {
                    seen[arc.head as usize] = true;
                    queue.push_back(arc.head);
                }
                a = arc.next;
            }
        }
        seen
    }

    pub fn cut_sides(&self) -> Vec<CutSide> {
        self.source_side()
            .into_iter()
            .map(|s| if s { CutSide::Source } else { CutSide::Sink })
            .collect()
    }
}

/// Max-flow on an explicit network with distinguished `source` and `sink`
/// nodes. Returns the flow value and, per node, whether it lies on the
/// source side of the minimum cut.
pub fn max_flow_st(
    node_count: usize,
    source: usize,
    sink: usize,
    edges: &[(usize, usize, f64)],
) -> (f64, Vec<bool>) {
    assert!(source != sink && source < node_count && sink < node_count);
    let inner: Vec<usize> = (0..node_count)
        .filter(|&v| v != source && v != sink)
        .collect();
    let mut index = vec![usize::MAX; node_count];
    for (k, &v) in inner.iter().enumerate() {
        index[v] = k;
    }
    let mut g = FlowGraph::new(inner.len());
    let mut direct = 0.0;
    for &(u, v, c) in edges {
        if u == v || u == sink || v == source {
            continue;
        }
        match (u == source, v == sink) {
            (true, true) => direct += c,
            (true, false) => g.add_tweights(index[v], c, 0.0),
            (false, true) => g.add_tweights(index[u], 0.0, c),
            (false, false) => g.add_edge(index[u], index[v], c, 0.0),
        }
    }
    let flow = g.max_flow() + direct;
    let side = g.source_side();
    let mut out = vec![false; node_count];
    out[source] = true;
    for (k, &v) in inner.iter().enumerate() {
        out[v] = side[k];
    }
    (flow, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Minimum over every s-t cut, by subset enumeration.
    fn min_cut_by_enumeration(n: usize, s: usize, t: usize, edges: &[(usize, usize, f64)]) -> f64 {
        let free: Vec<usize> = (0..n).filter(|&v| v != s && v != t).collect();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << free.len()) {
            let mut in_s = vec![false; n];
            in_s[s] = true;
            for (b, &v) in free.iter().enumerate() {
                in_s[v] = (mask >> b) & 1 == 1;
            }
            let cut: f64 = edges
                .iter()
                .filter(|&&(u, v, _)| in_s[u] && !in_s[v])
                .map(|&(_, _, c)| c)
                .sum();
            best = best.min(cut);
        }
        best
    }

    #[test]
    fn four_node_example() {
        // s=0, a=1, b=2, t=3
        let edges = [
            (0, 1, 3.0),
            (0, 2, 2.0),
            (1, 3, 2.0),
            (2, 3, 3.0),
            (1, 2, 1.0),
        ];
        let (flow, side) = max_flow_st(4, 0, 3, &edges);
        assert_eq!(flow, 5.0);
        assert_eq!(min_cut_by_enumeration(4, 0, 3, &edges), 5.0);
        assert!(side[0] && !side[3]);
    }

    #[test]
    fn source_only_links_carry_no_flow() {
        let mut g = FlowGraph::new(4);
        for i in 0..4 {
            g.add_tweights(i, 1e9, 0.0);
        }
        g.add_edge(0, 1, 2.0, 2.0);
        g.add_edge(2, 3, 1.0, 1.0);
        assert_eq!(g.max_flow(), 0.0);
        assert!(g.cut_sides().iter().all(|&s| s == CutSide::Source));
    }

    #[test]
    fn random_networks_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..300 {
            let n = rng.random_range(2..=10);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in 0..n {
                    if u != v && rng.random_bool(0.4) {
                        edges.push((u, v, rng.random_range(0.0..10.0)));
                    }
                }
            }
            let (flow, side) = max_flow_st(n, 0, n - 1, &edges);
            let best = min_cut_by_enumeration(n, 0, n - 1, &edges);
            assert!(
                (flow - best).abs() <= 1e-9 * best.max(1.0),
                "{flow} vs {best}"
            );
            let cut: f64 = edges
                .iter()
                .filter(|&&(u, v, _)| side[u] && !side[v])
                .map(|&(_, _, c)| c)
                .sum();
            assert!((cut - flow).abs() <= 1e-9 * flow.max(1.0));
        }
    }
}
