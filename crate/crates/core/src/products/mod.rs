//! Cartesian and warped products of two finite spaces.

mod warp;

use std::collections::VecDeque;

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mmspace::{FiniteSpace, MeasurePolicy, DEFAULT_ROW_CACHE_CAP};

pub use warp::{admissible_delta, localize_warp, LocalizedWarp, WarpSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductKind {
    Cartesian,
    Warped,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductOptions {
    /// Base stencil radius `R`; hop radii are scaled by the cell aspect ratio.
    pub stencil_radius: usize,
    /// Explicit `(X hops, Y hops)`, overriding the aspect rule.
    pub stencil: Option<(usize, usize)>,
    /// Largest allowed `|X|·|Y|`.
    pub size_cap: usize,
}

impl Default for ProductOptions {
    fn default() -> Self {
        Self { stencil_radius: 2, stencil: None, size_cap: 2_000_000 }
    }
}

/// Product of `X` (fiber) and `Y` (base). Pairs are indexed `x·|Y| + t`.
#[derive(Clone, Debug)]
pub struct ProductSpace {
    x: FiniteSpace,
    y: FiniteSpace,
    kind: ProductKind,
    warp: Option<WarpSpec>,
    graph: FiniteSpace,
    class_of: Vec<usize>,
    classes: Vec<Vec<usize>>,
    stencil: (usize, usize),
    endpoint_rule_deviation: f64,
}

/// Points within `hops` graph steps, with their hop counts.
fn hop_balls(space: &FiniteSpace, hops: usize) -> Vec<Vec<(usize, usize)>> {
    let n = space.len();
    let mut seen = vec![usize::MAX; n];
    (0..n)
        .map(|s| {
            let mut out = vec![(s, 0)];
            seen[s] = s;
            let mut queue = VecDeque::from([(s, 0usize)]);
            while let Some((v, h)) = queue.pop_front() {
                if h == hops {
                    continue;
                }
                for (w, _) in space.neighbors(v) {
                    if seen[w] != s {
                        seen[w] = s;
                        out.push((w, h + 1));
                        queue.push_back((w, h + 1));
                    }
                }
            }
            out
        })
        .collect()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Hop radii balancing the warped cell aspect `max(w_d)·h_X / h_Y`.
pub fn stencil_radii(x: &FiniteSpace, y: &FiniteSpace, max_warp: f64, opts: &ProductOptions) -> (usize, usize) {
    if let Some(s) = opts.stencil {
        return s;
    }
    let r = opts.stencil_radius.max(1);
    let a = max_warp * x.h() / y.h();
    let ry = r * (a.round() as usize).max(1);
    let rx = if a > 0.0 { r * ((1.0 / a).round() as usize).max(1) } else { r };
    (rx, ry)
}

impl ProductSpace {
    pub fn cartesian(x: &FiniteSpace, y: &FiniteSpace, opts: &ProductOptions) -> Result<Self> {
        Self::build(x, y, None, opts)
    }

    pub fn warped(x: &FiniteSpace, y: &FiniteSpace, warp: WarpSpec, opts: &ProductOptions) -> Result<Self> {
        if warp.w_d.len() != y.len() {
            return Err(Error::LengthMismatch { expected: y.len(), got: warp.w_d.len() });
        }
        Self::build(x, y, Some(warp), opts)
    }

    fn build(x: &FiniteSpace, y: &FiniteSpace, warp: Option<WarpSpec>, opts: &ProductOptions) -> Result<Self> {
        let (nx, ny) = (x.len(), y.len());
        if nx.checked_mul(ny).is_none_or(|n| n > opts.size_cap) {
            return Err(Error::TooLarge { nx, ny, cap: opts.size_cap });
        }
        let n = nx * ny;
        let wd: Vec<f64> = match &warp {
            Some(w) => w.w_d.clone(),
            None => vec![1.0; ny],
        };
        let max_warp = wd.iter().copied().fold(0.0, f64::max);
        let stencil = stencil_radii(x, y, max_warp, opts);
        let xb = hop_balls(x, stencil.0);
        let yb = hop_balls(y, stencil.1);

        let mut edges = Vec::new();
        let mut zero = Vec::new();
        let mut endpoint_rule_deviation: f64 = 0.0;
        for (xi, ball) in xb.iter().enumerate() {
            let xrow = x.distance_row(xi);
            for &(xj, hx) in ball {
                for t in 0..ny {
                    let a = xi * ny + t;
                    let yrow = y.distance_row(t);
                    for &(s, hy) in &yb[t] {
                        let b = xj * ny + s;
                        if b <= a || gcd(hx, hy) != 1 {
                            continue;
                        }
                        let (dx, dy) = (xrow[xj], yrow[s]);
                        let len = match warp {
                            None => dx.hypot(dy),
                            Some(_) => {
                                let wbar = 0.5 * (wd[t] + wd[s]);
                                let left = dy.hypot(wd[t] * dx);
                                let right = dy.hypot(wd[s] * dx);
                                let avg = dy.hypot(wbar * dx);
                                endpoint_rule_deviation =
                                    endpoint_rule_deviation.max((avg - left).abs()).max((avg - right).abs());
                                avg
                            }
                        };
                        if len == 0.0 {
                            zero.push((a, b));
                        } else {
                            edges.push((a, b, len));
                        }
                    }
                }
            }
        }

        let mut uf = UnionFind::<usize>::new(n);
        for &(a, b) in &zero {
            uf.union(a, b);
        }
        let labels = uf.into_labeling();
        let mut class_id = vec![usize::MAX; n];
        let mut class_of = vec![0; n];
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for p in 0..n {
            let root = labels[p];
            if class_id[root] == usize::MAX {
                class_id[root] = classes.len();
                classes.push(Vec::new());
            }
            class_of[p] = class_id[root];
            classes[class_id[root]].push(p);
        }

        let wm: Vec<f64> = match &warp {
            Some(w) => w.w_m.clone(),
            None => vec![1.0; ny],
        };
        let mut measure = vec![0.0; classes.len()];
        for p in 0..n {
            let (xi, t) = (p / ny, p % ny);
            measure[class_of[p]] += x.measure()[xi] * y.measure()[t] * wm[t];
        }
        let quotient_edges: Vec<_> = edges
            .into_iter()
            .filter_map(|(a, b, len)| {
                let (ca, cb) = (class_of[a], class_of[b]);
                (ca != cb).then_some((ca, cb, len))
            })
            .collect();
        let policy = match warp {
            None => MeasurePolicy::Positive,
            Some(_) => MeasurePolicy::NonNegative,
        };
        let graph = FiniteSpace::build(measure, &quotient_edges, policy, DEFAULT_ROW_CACHE_CAP)?;
        Ok(Self {
            x: x.clone(),
            y: y.clone(),
            kind: if warp.is_some() { ProductKind::Warped } else { ProductKind::Cartesian },
            warp,
            graph,
            class_of,
            classes,
            stencil,
            endpoint_rule_deviation,
        })
    }

    pub fn x(&self) -> &FiniteSpace {
        &self.x
    }

    pub fn y(&self) -> &FiniteSpace {
        &self.y
    }

    pub fn kind(&self) -> ProductKind {
        self.kind
    }

    pub fn warp(&self) -> Option<&WarpSpec> {
        self.warp.as_ref()
    }

    /// Graph on the quotient points; carries the product measure.
    pub fn graph(&self) -> &FiniteSpace {
        &self.graph
    }

    pub fn stencil(&self) -> (usize, usize) {
        self.stencil
    }

    /// Largest change of an edge length if the left or right endpoint warp
    /// were used instead of the endpoint average.
    pub fn endpoint_rule_deviation(&self) -> f64 {
        self.endpoint_rule_deviation
    }

    pub fn pair_count(&self) -> usize {
        self.x.len() * self.y.len()
    }

    pub fn pair(&self, x: usize, t: usize) -> usize {
        x * self.y.len() + t
    }

    pub fn split(&self, p: usize) -> (usize, usize) {
        (p / self.y.len(), p % self.y.len())
    }

    /// Quotient point of each pair.
    pub fn class_of(&self) -> &[usize] {
        &self.class_of
    }

    /// Pairs in each quotient point, increasing.
    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn collapsed(&self) -> bool {
        self.classes.len() < self.pair_count()
    }

    /// Measure of each pair before collapse.
    pub fn pair_measure(&self) -> Vec<f64> {
        let ny = self.y.len();
        (0..self.pair_count())
            .map(|p| {
                let (xi, t) = (p / ny, p % ny);
                let wm = self.warp.as_ref().map_or(1.0, |w| w.w_m[t]);
                self.x.measure()[xi] * self.y.measure()[t] * wm
            })
            .collect()
    }

    /// Distance between pairs: closed form for Cartesian, graph metric for warped.
    pub fn distance(&self, (x1, t1): (usize, usize), (x2, t2): (usize, usize)) -> f64 {
        match self.kind {
            ProductKind::Cartesian => self.x.distance(x1, x2).hypot(self.y.distance(t1, t2)),
            ProductKind::Warped => {
                let (a, b) = (self.class_of[self.pair(x1, t1)], self.class_of[self.pair(x2, t2)]);
                self.graph.distance(a, b)
            }
        }
    }

    /// Distances from a pair to every quotient point through the product graph.
    pub fn graph_distances_from(&self, (x, t): (usize, usize)) -> std::sync::Arc<[f64]> {
        self.graph.distance_row(self.class_of[self.pair(x, t)])
    }

    /// Pair field to quotient field; values must agree within each class.
    pub fn to_quotient(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.pair_count() {
            return Err(Error::LengthMismatch { expected: self.pair_count(), got: f.len() });
        }
        self.classes
            .iter()
            .enumerate()
            .map(|(c, members)| {
                let v = f[members[0]];
                let tol = 1e-12 * (1.0 + v.abs());
                if members.iter().any(|&p| (f[p] - v).abs() > tol) {
                    Err(Error::InconsistentQuotientField { class: c })
                } else {
                    Ok(v)
                }
            })
            .collect()
    }

    pub fn from_quotient(&self, g: &[f64]) -> Vec<f64> {
        self.class_of.iter().map(|&c| g[c]).collect()
    }

    /// Pair field from a function of the two continuum coordinates.
    pub fn field(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let (cx, cy) = (self.x.coordinates(), self.y.coordinates());
        (0..self.pair_count())
            .map(|p| {
                let (xi, t) = self.split(p);
                f(cx[xi], cy[t])
            })
            .collect()
    }
}

/// Multiply edge lengths by `1/l` and masses by `c`.
pub fn rescale_space(space: &FiniteSpace, l: f64, c: f64) -> Result<FiniteSpace> {
    space.rescale(l, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn cartesian_small() {
        let i3 = FiniteSpace::interval(1.0, 3).unwrap();
        let p = ProductSpace::cartesian(&i3, &i3, &ProductOptions::default()).unwrap();
        assert_relative_eq!(p.distance((0, 0), (2, 2)), 2f64.sqrt());
        assert_eq!(p.distance((0, 1), (2, 1)), 1.0);
        assert_relative_eq!(p.graph().total_mass(), i3.total_mass() * i3.total_mass());
        assert!(!p.collapsed());
        assert_eq!(p.stencil(), (2, 2));
    }

    #[test]
    fn too_large() {
        let a = FiniteSpace::interval(1.0, 100).unwrap();
        let opts = ProductOptions { size_cap: 5000, ..Default::default() };
        assert!(matches!(ProductSpace::cartesian(&a, &a, &opts), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn unit_warp_tracks_cartesian() {
        let a = FiniteSpace::interval(1.0, 50).unwrap();
        let opts = ProductOptions::default();
        let c = ProductSpace::cartesian(&a, &a, &opts).unwrap();
        let w = ProductSpace::warped(&a, &a, WarpSpec::constant(&a, 1.0).unwrap(), &opts).unwrap();
        let row = w.graph_distances_from((0, 0));
        let mut worst: f64 = 0.0;
        for p in 0..w.pair_count() {
            let (x, t) = w.split(p);
            worst = worst.max((row[w.class_of()[p]] - c.distance((0, 0), (x, t))).abs());
        }
        assert!(worst <= 0.05 * 2f64.sqrt(), "{worst}");
        assert_relative_eq!(w.graph().total_mass(), c.graph().total_mass(), max_relative = 1e-12);
    }

    #[test]
    fn zero_fiber_collapses() {
        let x = FiniteSpace::circle(1.0, 8).unwrap();
        let y = FiniteSpace::interval(1.0, 5).unwrap();
        let w = WarpSpec::from_fn(&y, |t| t).unwrap();
        let p = ProductSpace::warped(&x, &y, w, &ProductOptions::default()).unwrap();
        assert_eq!(p.graph().len(), 8 * 4 + 1);
        let apex = p.class_of()[p.pair(0, 0)];
        assert!((0..8).all(|xi| p.class_of()[p.pair(xi, 0)] == apex));
        assert_eq!(p.graph().measure()[apex], 0.0);
        assert!(p.graph().edges().all(|e| e.2 > 0.0));
        let f = p.field(|_, t| t);
        let q = p.to_quotient(&f).unwrap();
        assert_eq!(p.from_quotient(&q), f);
        let g = p.field(|x, _| x);
        assert!(matches!(p.to_quotient(&g), Err(Error::InconsistentQuotientField { .. })));
    }

    #[test]
    fn warped_mass() {
        let x = FiniteSpace::circle(1.0, 10).unwrap();
        let y = FiniteSpace::interval(1.0, 7).unwrap();
        let w = WarpSpec::from_fn(&y, |t| 1.0 + t * t).unwrap();
        let expected: f64 = (0..7).map(|t| w.w_m[t] * y.measure()[t]).sum::<f64>() * x.total_mass();
        let p = ProductSpace::warped(&x, &y, w, &ProductOptions::default()).unwrap();
        assert_relative_eq!(p.graph().total_mass(), expected, max_relative = 1e-12);
    }

    #[test]
    fn rescale_doubles_lip() {
        let s = FiniteSpace::circle(1.0, 30).unwrap();
        assert_eq!(rescale_space(&s, 1.0, 1.0).unwrap().edges().collect::<Vec<_>>(), s.edges().collect::<Vec<_>>());
        let r = rescale_space(&s, 2.0, 1.0).unwrap();
        let f: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let a = crate::calculus::local_lip(&s, &f);
        let b = crate::calculus::local_lip(&r, &f);
        for i in 0..30 {
            assert_relative_eq!(b[i], 2.0 * a[i], max_relative = 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn warp_monotone(base in prop::collection::vec(0.1f64..2.0, 6), bump in prop::collection::vec(0.0f64..1.0, 6)) {
            let x = FiniteSpace::circle(1.0, 7).unwrap();
            let y = FiniteSpace::interval(1.0, 6).unwrap();
            let hi: Vec<f64> = base.iter().zip(&bump).map(|(a, b)| a + b).collect();
            let opts = ProductOptions { stencil: Some((2, 2)), ..Default::default() };
            let p = ProductSpace::warped(&x, &y, WarpSpec::new(&y, base.clone(), base).unwrap(), &opts).unwrap();
            let q = ProductSpace::warped(&x, &y, WarpSpec::new(&y, hi.clone(), hi).unwrap(), &opts).unwrap();
            for src in [(0, 0), (3, 2), (5, 5)] {
                let (dp, dq) = (p.graph_distances_from(src), q.graph_distances_from(src));
                for c in 0..p.graph().len() {
                    prop_assert!(dp[c] <= dq[c] + 1e-12);
                }
            }
        }
    }
}
