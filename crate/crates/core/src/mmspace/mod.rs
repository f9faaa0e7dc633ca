//! Finite metric measure spaces: weighted graphs with shortest-path metrics.

mod curve;
pub(crate) mod dijkstra;
mod field;
pub mod io;

use std::collections::VecDeque;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use curve::Curve;
pub use dijkstra::BallSearch;
pub use field::ScalarField;

/// Spaces with at most this many points cache full distance rows.
pub const DEFAULT_ROW_CACHE_CAP: usize = 5000;

/// Closed-ball membership with a relative rounding allowance.
#[inline]
pub fn within(d: f64, r: f64) -> bool {
    d <= r * (1.0 + 1e-12)
}

/// Where a space came from, when it discretizes a known continuum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Continuum {
    Interval { length: f64 },
    Circle { length: f64 },
    File,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum MeasurePolicy {
    Positive,
    NonNegative,
}

/// Connected weighted graph with point masses and its shortest-path metric.
#[derive(Clone, Debug)]
pub struct FiniteSpace {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    lengths: Vec<f64>,
    measure: Vec<f64>,
    h: f64,
    continuum: Continuum,
    rows: Vec<OnceLock<Arc<[f64]>>>,
}

impl FiniteSpace {
    /// Build from point masses and undirected edges. Duplicate edges keep the shortest length.
    pub fn from_edges(measure: Vec<f64>, edges: &[(usize, usize, f64)]) -> Result<Self> {
        Self::build(measure, edges, MeasurePolicy::Positive, DEFAULT_ROW_CACHE_CAP)
    }

    pub(crate) fn build(
        measure: Vec<f64>,
        edges: &[(usize, usize, f64)],
        policy: MeasurePolicy,
        cache_cap: usize,
    ) -> Result<Self> {
        let n = measure.len();
        if n < 2 {
            return Err(Error::TooFewPoints(n));
        }
        for (i, &m) in measure.iter().enumerate() {
            let ok = match policy {
                MeasurePolicy::Positive => m.is_finite() && m > 0.0,
                MeasurePolicy::NonNegative => m.is_finite() && m >= 0.0,
            };
            if !ok {
                return Err(Error::BadMeasure(i, m));
            }
        }
        let mut list: Vec<(usize, usize, f64)> = Vec::with_capacity(edges.len());
        for &(a, b, len) in edges {
            for idx in [a, b] {
                if idx >= n {
                    return Err(Error::IndexOutOfRange { index: idx, len: n });
                }
            }
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::BadEdgeLength(a, b, len));
            }
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop at point {a}")));
            }
            list.push((a.min(b), a.max(b), len));
        }
        list.sort_by(|p, q| (p.0, p.1).cmp(&(q.0, q.1)).then(p.2.total_cmp(&q.2)));
        list.dedup_by(|later, kept| later.0 == kept.0 && later.1 == kept.1);

        let mut degree = vec![0usize; n];
        for &(a, b, _) in &list {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0usize; offsets[n]];
        let mut lengths = vec![0.0; offsets[n]];
        for &(a, b, len) in &list {
            targets[fill[a]] = b;
            lengths[fill[a]] = len;
            fill[a] += 1;
            targets[fill[b]] = a;
            lengths[fill[b]] = len;
            fill[b] += 1;
        }
        let h = list.iter().map(|e| e.2).fold(0.0, f64::max);
        let rows = if n <= cache_cap { (0..n).map(|_| OnceLock::new()).collect() } else { Vec::new() };
        let space = Self { offsets, targets, lengths, measure, h, continuum: Continuum::File, rows };
        space.check_connected()?;
        Ok(space)
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for (j, _) in self.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(i) => Err(Error::Disconnected(i)),
            None => Ok(()),
        }
    }

    /// Path graph on `n` equally spaced points of `[0, length]`, each of mass `length / n`.
    pub fn interval(length: f64, n: usize) -> Result<Self> {
        check_generator(length, n)?;
        let step = length / (n - 1) as f64;
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, step)).collect();
        let space = Self::from_edges(vec![length / n as f64; n], &edges)?;
        Ok(space.with_continuum(Continuum::Interval { length }))
    }

    /// Cycle graph on `n` equally spaced points of a circle of circumference `length`.
    pub fn circle(length: f64, n: usize) -> Result<Self> {
        check_generator(length, n)?;
        let step = length / n as f64;
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, step)).collect();
        let space = Self::from_edges(vec![step; n], &edges)?;
        Ok(space.with_continuum(Continuum::Circle { length }))
    }

    pub fn with_continuum(mut self, continuum: Continuum) -> Self {
        self.continuum = continuum;
        self
    }

    /// Drop or enable the distance-row cache.
    pub fn with_row_cache_cap(mut self, cap: usize) -> Self {
        let n = self.len();
        self.rows = if n <= cap { (0..n).map(|_| OnceLock::new()).collect() } else { Vec::new() };
        self
    }

    /// Same graph with every edge length divided by `l` and every mass multiplied by `c`.
    pub fn rescale(&self, l: f64, c: f64) -> Result<Self> {
        for v in [l, c] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("rescale factor {v} must be positive")));
            }
        }
        let measure = self.measure.iter().map(|m| m * c).collect();
        let policy =
            if self.measure.iter().all(|&m| m > 0.0) { MeasurePolicy::Positive } else { MeasurePolicy::NonNegative };
        let edges: Vec<_> = self.edges().map(|(a, b, len)| (a, b, len / l)).collect();
        let cap = if self.rows.is_empty() { 0 } else { self.len() };
        let continuum = match self.continuum {
            Continuum::Interval { length } => Continuum::Interval { length: length / l },
            Continuum::Circle { length } => Continuum::Circle { length: length / l },
            Continuum::File => Continuum::File,
        };
        Ok(Self::build(measure, &edges, policy, cap)?.with_continuum(continuum))
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    /// Neighbors of `i` with edge lengths.
    #[inline]
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        self.targets[range.clone()].iter().copied().zip(self.lengths[range].iter().copied())
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Each undirected edge once, as `(i, j, length)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.len())
            .flat_map(move |i| self.neighbors(i).filter(move |&(j, _)| i < j).map(move |(j, len)| (i, j, len)))
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn edge_length(&self, i: usize, j: usize) -> Option<f64> {
        self.neighbors(i).find(|&(k, _)| k == j).map(|(_, len)| len)
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    /// Resolution: the longest edge.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn min_edge_length(&self) -> f64 {
        self.lengths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn continuum(&self) -> Continuum {
        self.continuum
    }

    pub fn total_mass(&self) -> f64 {
        self.measure.iter().sum()
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: i, len: self.len() })
        }
    }

    /// Shortest-path distances from `i` to every point.
    pub fn distance_row(&self, i: usize) -> Arc<[f64]> {
        match self.rows.get(i) {
            Some(cell) => cell.get_or_init(|| dijkstra::distance_row(self, i).into()).clone(),
            None => dijkstra::distance_row(self, i).into(),
        }
    }

    /// Shortest-path distance. Panics on out-of-range indices.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        assert!(j < self.len(), "index {j} out of range for {} points", self.len());
        self.distance_row(i)[j]
    }

    pub fn checked_distance(&self, i: usize, j: usize) -> Result<f64> {
        self.check_index(i)?;
        self.check_index(j)?;
        Ok(self.distance(i, j))
    }

    /// Closed ball `{j : d(center, j) <= r}` in increasing index order.
    pub fn ball(&self, center: usize, r: f64) -> Vec<usize> {
        if !self.rows.is_empty() {
            let row = self.distance_row(center);
            return (0..self.len()).filter(|&j| within(row[j], r)).collect();
        }
        let mut pts: Vec<usize> =
            BallSearch::new(self.len()).run(self, &[center], r).into_iter().map(|(j, _)| j).collect();
        pts.sort_unstable();
        pts
    }

    pub fn ball_measure(&self, center: usize, r: f64) -> f64 {
        self.ball(center, r).iter().map(|&j| self.measure[j]).sum()
    }

    /// Multi-source distance to a set of points; infinite beyond `radius`.
    pub fn distance_to_set(&self, set: &[usize], radius: f64) -> Vec<f64> {
        if set.is_empty() {
            return vec![f64::INFINITY; self.len()];
        }
        dijkstra::multi_source(self, set, radius)
    }

    /// Largest pairwise distance (all-sources sweep).
    pub fn diameter(&self) -> f64 {
        (0..self.len())
            .into_par_iter()
            .map(|i| self.distance_row(i).iter().copied().fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max)
    }

    /// Continuum coordinate of a point: arclength for generated spaces,
    /// distance from point 0 otherwise.
    pub fn coordinate(&self, i: usize) -> f64 {
        let n = self.len() as f64;
        match self.continuum {
            Continuum::Interval { length } => i as f64 * length / (n - 1.0),
            Continuum::Circle { length } => i as f64 * length / n,
            Continuum::File => self.distance(0, i),
        }
    }

    pub fn coordinates(&self) -> Vec<f64> {
        match self.continuum {
            Continuum::File => self.distance_row(0).to_vec(),
            _ => (0..self.len()).map(|i| self.coordinate(i)).collect(),
        }
    }

    /// Distance in the continuum the space discretizes, if known.
    pub fn continuum_distance(&self, i: usize, j: usize) -> Option<f64> {
        let d = (self.coordinate(i) - self.coordinate(j)).abs();
        match self.continuum {
            Continuum::Interval { .. } => Some(d),
            Continuum::Circle { length } => Some(d.min(length - d)),
            Continuum::File => None,
        }
    }
}

fn check_generator(length: f64, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::InvalidArgument(format!("length {length} must be positive")));
    }
    Ok(())
}
