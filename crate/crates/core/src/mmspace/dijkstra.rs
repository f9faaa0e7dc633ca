//! Label-settling shortest paths over the CSR adjacency of a [`FiniteSpace`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::FiniteSpace;

#[derive(Clone, Copy, Debug)]
struct State {
    dist: f64,
    label: usize,
    node: usize,
}

impl PartialEq for State {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for State {}

impl Ord for State {
    // Min-heap on (dist, label, node).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.label.cmp(&self.label))
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Full single-source distance row.
pub(crate) fn distance_row(space: &FiniteSpace, source: usize) -> Vec<f64> {
    multi_source(space, &[source], f64::INFINITY)
}

/// Distances from the nearest of `sources`; entries farther than `radius` stay infinite.
pub(crate) fn multi_source(space: &FiniteSpace, sources: &[usize], radius: f64) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; space.len()];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s] = 0.0;
        heap.push(State { dist: 0.0, label: 0, node: s });
    }
    while let Some(State { dist: d, node, .. }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for (next, len) in space.neighbors(node) {
            let nd = d + len;
            if nd < dist[next] && nd <= radius {
                dist[next] = nd;
                heap.push(State { dist: nd, label: 0, node: next });
            }
        }
    }
    dist
}

/// Shortest-path tree from `source`: distances and predecessors (`usize::MAX` at the root).
pub(crate) fn with_predecessors(space: &FiniteSpace, source: usize) -> (Vec<f64>, Vec<usize>) {
    let n = space.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(State { dist: 0.0, label: 0, node: source });
    while let Some(State { dist: d, node, .. }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for (next, len) in space.neighbors(node) {
            let nd = d + len;
            if nd < dist[next] {
                dist[next] = nd;
                pred[next] = node;
                heap.push(State { dist: nd, label: 0, node: next });
            }
        }
    }
    (dist, pred)
}

/// Voronoi labelling: for every point the lexicographically smallest
/// `(distance, source position)` over all sources. Returns (distance, source position).
pub(crate) fn nearest_source(space: &FiniteSpace, sources: &[usize]) -> (Vec<f64>, Vec<usize>) {
    let n = space.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut label = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    for (pos, &s) in sources.iter().enumerate() {
        if (0.0, pos) < (dist[s], label[s]) {
            dist[s] = 0.0;
            label[s] = pos;
            heap.push(State { dist: 0.0, label: pos, node: s });
        }
    }
    while let Some(State { dist: d, label: l, node }) = heap.pop() {
        if (d, l) != (dist[node], label[node]) {
            continue;
        }
        for (next, len) in space.neighbors(node) {
            let nd = d + len;
            let better = nd < dist[next] || (nd == dist[next] && l < label[next]);
            if better {
                dist[next] = nd;
                label[next] = l;
                heap.push(State { dist: nd, label: l, node: next });
            }
        }
    }
    (dist, label)
}

/// Reusable scratch space for many bounded searches on one space.
///
/// Only the entries touched by the previous search are reset, so a bounded
/// search costs time proportional to the size of the ball it explores.
pub struct BallSearch {
    dist: Vec<f64>,
    settled: Vec<bool>,
    touched: Vec<usize>,
    heap: BinaryHeap<State>,
}

impl BallSearch {
    pub fn new(n: usize) -> Self {
        Self { dist: vec![f64::INFINITY; n], settled: vec![false; n], touched: Vec::new(), heap: BinaryHeap::new() }
    }

    /// Points within `radius` (closed, see [`super::within`]) of the nearest source,
    /// paired with that distance, in settling order.
    pub fn run(&mut self, space: &FiniteSpace, sources: &[usize], radius: f64) -> Vec<(usize, f64)> {
        for &t in &self.touched {
            self.dist[t] = f64::INFINITY;
            self.settled[t] = false;
        }
        self.touched.clear();
        self.heap.clear();
        let mut out = Vec::new();
        for &s in sources {
            if self.dist[s] > 0.0 {
                self.dist[s] = 0.0;
                self.touched.push(s);
                self.heap.push(State { dist: 0.0, label: 0, node: s });
            }
        }
        while let Some(State { dist: d, node, .. }) = self.heap.pop() {
            if self.settled[node] {
                continue;
            }
            self.settled[node] = true;
            out.push((node, d));
            for (next, len) in space.neighbors(node) {
                let nd = d + len;
                if nd < self.dist[next] && super::within(nd, radius) {
                    if self.dist[next].is_infinite() {
                        self.touched.push(next);
                    }
                    self.dist[next] = nd;
                    self.heap.push(State { dist: nd, label: 0, node: next });
                }
            }
        }
        out
    }
}
