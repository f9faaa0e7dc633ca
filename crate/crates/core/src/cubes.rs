//! Scale-`k` nets, Voronoi cubes, the neighbor relation and a subordinate
//! Lipschitz partition of unity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mmspace::{dijkstra, within, BallSearch, FiniteSpace};

/// Greedy maximal `sep`-separated set, scanning points in index order.
pub fn build_net(space: &FiniteSpace, sep: f64) -> Result<Vec<usize>> {
    if !(sep.is_finite() && sep > 0.0) {
        return Err(Error::InvalidArgument(format!("net separation {sep} must be positive")));
    }
    let mut covered = vec![false; space.len()];
    let mut search = BallSearch::new(space.len());
    let mut centers = Vec::new();
    for i in 0..space.len() {
        if covered[i] {
            continue;
        }
        centers.push(i);
        for (j, _) in search.run(space, &[i], sep) {
            covered[j] = true;
        }
    }
    Ok(centers)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubePartition {
    pub k: f64,
    /// Center point of each cube, increasing.
    pub centers: Vec<usize>,
    /// Cube id of each point.
    pub assignment: Vec<usize>,
    /// Distance from each point to its cube's center.
    pub center_distance: Vec<f64>,
    /// Sorted neighbor cube ids of each cube.
    pub neighbors: Vec<Vec<usize>>,
}

/// Voronoi cells of the greedy `1/k`-net; ties go to the smaller center index.
pub fn build_cubes(space: &FiniteSpace, k: f64) -> Result<CubePartition> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::InvalidArgument(format!("scale {k} must be positive")));
    }
    let sep = 1.0 / k;
    if sep <= 4.0 * space.h() {
        return Err(Error::ScaleUnresolvable { k, sep, limit: 4.0 * space.h() });
    }
    let centers = build_net(space, sep)?;
    let (center_distance, assignment) = dijkstra::nearest_source(space, &centers);
    let mut members = vec![Vec::new(); centers.len()];
    for (p, &c) in assignment.iter().enumerate() {
        members[c].push(p);
    }
    let neighbors = members
        .par_iter()
        .enumerate()
        .map_init(
            || BallSearch::new(space.len()),
            |search, (i, pts)| {
                let mut near: Vec<usize> = search
                    .run(space, pts, sep)
                    .into_iter()
                    .filter(|&(_, d)| d < sep)
                    .map(|(p, _)| assignment[p])
                    .filter(|&c| c != i)
                    .collect();
                near.sort_unstable();
                near.dedup();
                near
            },
        )
        .collect();
    Ok(CubePartition { k, centers, assignment, center_distance, neighbors })
}

impl CubePartition {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.len()];
        for (p, &c) in self.assignment.iter().enumerate() {
            members[c].push(p);
        }
        members
    }

    pub fn max_neighbors(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionCheck {
    pub total: bool,
    pub separated: bool,
    pub inner_contained: bool,
    pub outer_contained: bool,
    pub max_neighbors: usize,
    pub neighbor_bound: f64,
    pub neighbor_count_ok: bool,
    pub max_neighbor_center_distance: f64,
    pub neighbor_centers_ok: bool,
}

impl PartitionCheck {
    pub fn all(&self) -> bool {
        self.total
            && self.separated
            && self.inner_contained
            && self.outer_contained
            && self.neighbor_count_ok
            && self.neighbor_centers_ok
    }
}

/// Checks the partition invariants; `c_metric` is a metric-doubling estimate
/// whose cube bounds the neighbor count.
pub fn check_partition(space: &FiniteSpace, p: &CubePartition, c_metric: f64) -> PartitionCheck {
    let k = p.k;
    let total = p.assignment.len() == space.len() && p.assignment.iter().all(|&c| c < p.len());
    let separated = p.centers.iter().enumerate().all(|(a, &ca)| {
        let row = space.distance_row(ca);
        p.centers[a + 1..].iter().all(|&cb| row[cb] > 1.0 / k)
    });
    let mut inner_contained = true;
    let mut outer_contained = true;
    for (i, &c) in p.centers.iter().enumerate() {
        let row = space.distance_row(c);
        for q in 0..space.len() {
            if within(row[q], 1.0 / (3.0 * k)) && p.assignment[q] != i {
                inner_contained = false;
            }
            if p.assignment[q] == i && !within(row[q], 5.0 / (4.0 * k) + space.h()) {
                outer_contained = false;
            }
        }
    }
    let mut max_dist: f64 = 0.0;
    for (i, nb) in p.neighbors.iter().enumerate() {
        let row = space.distance_row(p.centers[i]);
        for &j in nb {
            max_dist = max_dist.max(row[p.centers[j]]);
        }
    }
    let neighbor_bound = c_metric.powi(3);
    PartitionCheck {
        total,
        separated,
        inner_contained,
        outer_contained,
        max_neighbors: p.max_neighbors(),
        neighbor_bound,
        neighbor_count_ok: p.max_neighbors() as f64 <= neighbor_bound,
        max_neighbor_center_distance: max_dist,
        neighbor_centers_ok: within(max_dist, 4.0 / k),
    }
}

/// Normalized bumps `χ_i = φ_i / Σ_j φ_j`, stored sparsely per point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionOfUnity {
    pub k: f64,
    /// `(cube, χ_cube(p))` pairs with positive value, by cube id.
    pub weights: Vec<Vec<(usize, f64)>>,
    /// `max_i Lip(χ_i) / k`.
    pub c1: f64,
    /// `max_i sup_{B(t_i, 1/(3k))} |χ_i - 1|`.
    pub inner_ball_deviation: f64,
    /// Lipschitz constant of each `χ_i`.
    pub lipschitz: Vec<f64>,
}

/// Plateau bump: 1 within `1/(3k)`, 0 beyond `5/(4k)`, linear between.
pub fn bump(k: f64, d: f64) -> f64 {
    let outer = 5.0 / (4.0 * k);
    let inner = 1.0 / (3.0 * k);
    ((outer - d) / (outer - inner)).clamp(0.0, 1.0)
}

pub fn partition_of_unity(space: &FiniteSpace, p: &CubePartition) -> Result<PartitionOfUnity> {
    let k = p.k;
    let reach = 5.0 / (4.0 * k);
    let mut phi: Vec<Vec<(usize, f64)>> = vec![Vec::new(); space.len()];
    let mut inner_sets = Vec::with_capacity(p.len());
    let mut search = BallSearch::new(space.len());
    for (i, &c) in p.centers.iter().enumerate() {
        let mut inner = Vec::new();
        for (q, d) in search.run(space, &[c], reach) {
            let v = bump(k, d);
            if v > 0.0 {
                phi[q].push((i, v));
            }
            if within(d, 1.0 / (3.0 * k)) {
                inner.push(q);
            }
        }
        inner_sets.push(inner);
    }
    for (q, list) in phi.iter_mut().enumerate() {
        let total: f64 = list.iter().map(|e| e.1).sum();
        if !(total > 0.0) {
            return Err(Error::CoverGap(q));
        }
        list.iter_mut().for_each(|e| e.1 /= total);
        list.sort_by_key(|e| e.0);
    }
    let mut lipschitz = vec![0.0f64; p.len()];
    for (a, b, len) in space.edges() {
        let (la, lb) = (&phi[a], &phi[b]);
        let (mut i, mut j) = (0, 0);
        while i < la.len() || j < lb.len() {
            let ca = la.get(i).map_or(usize::MAX, |e| e.0);
            let cb = lb.get(j).map_or(usize::MAX, |e| e.0);
            let cube = ca.min(cb);
            let va = if ca == cube {
                i += 1;
                la[i - 1].1
            } else {
                0.0
            };
            let vb = if cb == cube {
                j += 1;
                lb[j - 1].1
            } else {
                0.0
            };
            let q = (va - vb).abs() / len;
            if q > lipschitz[cube] {
                lipschitz[cube] = q;
            }
        }
    }
    let c1 = lipschitz.iter().copied().fold(0.0, f64::max) / k;
    let mut inner_ball_deviation: f64 = 0.0;
    for (i, inner) in inner_sets.iter().enumerate() {
        for &q in inner {
            let v = phi[q].iter().find(|e| e.0 == i).map_or(0.0, |e| e.1);
            inner_ball_deviation = inner_ball_deviation.max((v - 1.0).abs());
        }
    }
    Ok(PartitionOfUnity { k, weights: phi, c1, inner_ball_deviation, lipschitz })
}

impl PartitionOfUnity {
    /// Dense `χ_i`.
    pub fn chi(&self, i: usize) -> Vec<f64> {
        self.weights.iter().map(|list| list.iter().find(|e| e.0 == i).map_or(0.0, |e| e.1)).collect()
    }

    pub fn max_terms(&self) -> usize {
        self.weights.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// JSON dump of a partition and its partition of unity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionDump {
    pub k: f64,
    pub centers: Vec<usize>,
    pub assignment: Vec<usize>,
    pub neighbors: Vec<Vec<usize>>,
    pub c1_measured: f64,
    pub inner_ball_deviation: f64,
}

impl PartitionDump {
    pub fn new(p: &CubePartition, pou: &PartitionOfUnity) -> Self {
        Self {
            k: p.k,
            centers: p.centers.clone(),
            assignment: p.assignment.clone(),
            neighbors: p.neighbors.clone(),
            c1_measured: pou.c1,
            inner_ball_deviation: pou.inner_ball_deviation,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::global_lip;

    #[test]
    fn net_extremes() {
        let s = FiniteSpace::circle(1.0, 50).unwrap();
        assert_eq!(build_net(&s, 0.6).unwrap(), vec![0]);
        assert_eq!(build_net(&s, 0.01).unwrap().len(), 50);
        let c = FiniteSpace::circle(1.0, 1000).unwrap();
        let n = build_net(&c, 0.1).unwrap().len();
        assert!((5..=10).contains(&n), "{n}");
    }

    #[test]
    fn net_is_maximal_and_separated() {
        let s = FiniteSpace::interval(3.0, 301).unwrap();
        let centers = build_net(&s, 0.2).unwrap();
        for (a, &x) in centers.iter().enumerate() {
            for &y in &centers[a + 1..] {
                assert!(s.distance(x, y) > 0.2);
            }
        }
        for q in 0..s.len() {
            assert!(centers.iter().any(|&c| within(s.distance(c, q), 0.2)));
        }
    }

    #[test]
    fn unresolvable_scale() {
        let s = FiniteSpace::interval(1.0, 11).unwrap();
        assert!(matches!(build_cubes(&s, 5.0), Err(Error::ScaleUnresolvable { .. })));
    }

    #[test]
    fn single_cube() {
        let s = FiniteSpace::circle(1.0, 40).unwrap();
        let p = build_cubes(&s, 1.5).unwrap();
        assert_eq!(p.len(), 1);
        assert!(p.assignment.iter().all(|&c| c == 0));
        let pou = partition_of_unity(&s, &p).unwrap();
        assert!(pou.chi(0).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn circle_scale_ten() {
        let s = FiniteSpace::circle(1.0, 1000).unwrap();
        let p = build_cubes(&s, 10.0).unwrap();
        let members = p.members();
        for (i, &c) in p.centers.iter().enumerate() {
            for q in s.ball(c, 1.0 / 20.0) {
                assert_eq!(p.assignment[q], i);
            }
            for &q in &members[i] {
                assert!(within(s.distance(c, q), 0.1 + s.h()));
            }
        }
        let chk = check_partition(&s, &p, 3.0);
        assert!(chk.all(), "{chk:?}");
        let pou = partition_of_unity(&s, &p).unwrap();
        assert!(pou.c1 <= 6.0, "c1 = {}", pou.c1);
        for i in 0..p.len() {
            let chi = pou.chi(i);
            assert!((global_lip(&s, &chi) - pou.lipschitz[i]).abs() < 1e-9);
        }
        for q in 0..s.len() {
            let sum: f64 = pou.weights[q].iter().map(|e| e.1).sum();
            assert!((sum - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn interval_neighbors() {
        let s = FiniteSpace::interval(1.0, 1000).unwrap();
        let p = build_cubes(&s, 8.0).unwrap();
        assert!(p.max_neighbors() <= 2);
    }

    #[test]
    fn dump_fields() {
        let s = FiniteSpace::circle(1.0, 100).unwrap();
        let p = build_cubes(&s, 4.0).unwrap();
        let pou = partition_of_unity(&s, &p).unwrap();
        let json = serde_json::to_value(PartitionDump::new(&p, &pou)).unwrap();
        for key in ["k", "centers", "assignment", "neighbors", "c1_measured", "inner_ball_deviation"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }
}
