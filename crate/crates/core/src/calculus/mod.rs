//! Discrete Lipschitz constants, upper gradients along curves and Sobolev norms.

mod bl;
pub mod identities;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mmspace::{dijkstra, Curve, FiniteSpace, ScalarField};

pub use bl::{bl_gradient, partial_lips, PartialLips};

/// `lip f(x) = max_{y ~ x} |f(x) - f(y)| / d(x, y)` over graph neighbors.
pub fn local_lip(space: &FiniteSpace, f: &[f64]) -> ScalarField {
    assert_eq!(f.len(), space.len(), "field length");
    let values = (0..space.len()).into_par_iter().map(|x| lip_at(space, f, x)).collect();
    ScalarField::with_len(space.len(), values).expect("finite field")
}

#[inline]
pub fn lip_at(space: &FiniteSpace, f: &[f64], x: usize) -> f64 {
    space.neighbors(x).map(|(y, len)| (f[x] - f[y]).abs() / len).fold(0.0, f64::max)
}

/// [`local_lip`] on the subgraph induced by `mask`; zero off the mask.
pub fn local_lip_masked(space: &FiniteSpace, f: &[f64], mask: &[bool]) -> Vec<f64> {
    (0..space.len())
        .map(|x| {
            if !mask[x] {
                return 0.0;
            }
            space.neighbors(x).filter(|&(y, _)| mask[y]).map(|(y, len)| (f[x] - f[y]).abs() / len).fold(0.0, f64::max)
        })
        .collect()
}

/// Global Lipschitz constant. On a path metric every pair is joined by a
/// geodesic edge path, so the pairwise supremum equals `max lip`.
pub fn global_lip(space: &FiniteSpace, f: &[f64]) -> f64 {
    local_lip(space, f).iter().copied().fold(0.0, f64::max)
}

/// Pairwise `max |f(x) - f(y)| / d(x, y)`; quadratic cost.
pub fn global_lip_pairwise(space: &FiniteSpace, f: &[f64]) -> f64 {
    (0..space.len())
        .into_par_iter()
        .map(|x| {
            let row = space.distance_row(x);
            (0..space.len()).filter(|&y| y != x).map(|y| (f[x] - f[y]).abs() / row[y]).fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// `sqrt(‖f‖² + ‖g‖²)` in `L²(μ)`.
pub fn sobolev_norm(space: &FiniteSpace, f: &[f64], g: &[f64]) -> f64 {
    let mu = space.measure();
    let sq = |v: &[f64]| v.iter().zip(mu).map(|(a, m)| a * a * m).sum::<f64>();
    (sq(f) + sq(g)).sqrt()
}

/// Equally weighted finite family of curves.
#[derive(Clone, Debug)]
pub struct CurveFamily {
    curves: Vec<Curve>,
}

impl CurveFamily {
    pub fn new(curves: Vec<Curve>) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::InvalidArgument("curve family is empty".into()));
        }
        Ok(Self { curves })
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.curves.len() as f64
    }

    /// Shortest-path curves between the given pairs.
    pub fn geodesics(space: &FiniteSpace, pairs: &[(usize, usize)]) -> Result<Self> {
        let curves = pairs
            .iter()
            .map(|&(a, b)| {
                let (_, pred) = dijkstra::with_predecessors(space, a);
                let mut pts = vec![b];
                while *pts.last().unwrap() != a {
                    pts.push(pred[*pts.last().unwrap()]);
                }
                pts.reverse();
                Curve::uniform(space, pts)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(curves)
    }

    /// Every walk with `1..=max_edges` edges.
    pub fn all_walks(space: &FiniteSpace, max_edges: usize) -> Result<Self> {
        let mut walks: Vec<Vec<usize>> = (0..space.len()).map(|i| vec![i]).collect();
        let mut out = Vec::new();
        for _ in 0..max_edges {
            let mut next = Vec::new();
            for w in &walks {
                for (y, _) in space.neighbors(*w.last().unwrap()) {
                    let mut v = w.clone();
                    v.push(y);
                    next.push(v);
                }
            }
            out.extend(next.iter().cloned());
            walks = next;
        }
        let curves = out.into_iter().map(|pts| Curve::uniform(space, pts)).collect::<Result<Vec<_>>>()?;
        Self::new(curves)
    }

    /// Random walks with `steps` steps from random starts.
    pub fn random_walks<R: Rng>(space: &FiniteSpace, count: usize, steps: usize, rng: &mut R) -> Result<Self> {
        let curves = (0..count)
            .map(|_| {
                let mut pts = vec![rng.random_range(0..space.len())];
                for _ in 0..steps {
                    let x = *pts.last().unwrap();
                    let k = rng.random_range(0..space.degree(x));
                    pts.push(space.neighbors(x).nth(k).unwrap().0);
                }
                Curve::uniform(space, pts)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(curves)
    }

    /// `max_x (Σ visits(x) · weight) / μ(x)`.
    pub fn compression(&self, space: &FiniteSpace) -> f64 {
        let mut visits = vec![0.0; space.len()];
        for c in &self.curves {
            for &p in c.points() {
                visits[p] += self.weight();
            }
        }
        visits.iter().zip(space.measure()).map(|(v, m)| v / m).fold(0.0, f64::max)
    }
}

/// `∫_γ g`, trapezoid rule on each edge.
pub fn curve_integral(space: &FiniteSpace, c: &Curve, g: &[f64]) -> f64 {
    let pts = c.points();
    (0..c.segments()).map(|i| 0.5 * (g[pts[i]] + g[pts[i + 1]]) * c.segment_length(space, i)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveViolation {
    pub curve: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperGradientReport {
    /// Family average of `|f(γ_1) - f(γ_0)|`.
    pub lhs: f64,
    /// Family average of `∫_γ g`.
    pub rhs: f64,
    pub holds: bool,
    pub violations: Vec<CurveViolation>,
    pub compression: f64,
}

/// Checks `|f(γ_1) - f(γ_0)| <= ∫_γ g` per curve and on average.
pub fn upper_gradient_violations(
    space: &FiniteSpace,
    f: &[f64],
    g: &[f64],
    family: &CurveFamily,
) -> Result<UpperGradientReport> {
    if let Some(i) = g.iter().position(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("gradient is negative at point {i}")));
    }
    let w = family.weight();
    let (mut lhs, mut rhs) = (0.0, 0.0);
    let mut violations = Vec::new();
    for (idx, c) in family.curves().iter().enumerate() {
        let l = (f[c.end()] - f[c.start()]).abs();
        let r = curve_integral(space, c, g);
        lhs += w * l;
        rhs += w * r;
        if l > r + 1e-12 * (1.0 + r) {
            violations.push(CurveViolation { curve: idx, lhs: l, rhs: r, slack: r - l });
        }
    }
    Ok(UpperGradientReport {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12 * (1.0 + rhs),
        violations,
        compression: family.compression(space),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_and_linear() {
        let s = FiniteSpace::interval(1.0, 101).unwrap();
        let c = ScalarField::constant(&s, 3.0);
        assert!(local_lip(&s, &c).iter().all(|&v| v == 0.0));
        assert_eq!(global_lip(&s, &c), 0.0);
        let x = ScalarField::new(&s, s.coordinates()).unwrap();
        for v in local_lip(&s, &x).iter() {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-9);
        }
        assert_relative_eq!(global_lip(&s, &x), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn square_finite_difference() {
        let s = FiniteSpace::interval(1.0, 1001).unwrap();
        let f: Vec<f64> = s.coordinates().iter().map(|x| x * x).collect();
        let lip = local_lip(&s, &f);
        for i in 0..s.len() {
            assert!((lip[i] - 2.0 * s.coordinate(i)).abs() <= 2.0 * s.h());
        }
    }

    #[test]
    fn sobolev_examples() {
        let s = FiniteSpace::interval(1.0, 1001).unwrap();
        let zero = vec![0.0; s.len()];
        assert_eq!(sobolev_norm(&s, &zero, &zero), 0.0);
        let one = vec![1.0; s.len()];
        assert_relative_eq!(sobolev_norm(&s, &one, &zero), 1.0, epsilon = 1e-12);
        let x = s.coordinates();
        let g = local_lip(&s, &x);
        assert_relative_eq!(sobolev_norm(&s, &x, &g), (1.0f64 / 3.0 + 1.0).sqrt(), max_relative = 0.01);
    }

    #[test]
    fn pairwise_matches_local_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for space in [
            FiniteSpace::interval(1.0, 60).unwrap(),
            FiniteSpace::circle(2.0, 75).unwrap(),
            FiniteSpace::from_edges(
                vec![1.0; 6],
                &[(0, 1, 1.0), (1, 2, 0.5), (2, 3, 2.0), (3, 0, 0.7), (1, 4, 0.2), (4, 5, 0.9), (5, 3, 0.3)],
            )
            .unwrap(),
        ] {
            for _ in 0..5 {
                let f: Vec<f64> = (0..space.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                assert_relative_eq!(global_lip(&space, &f), global_lip_pairwise(&space, &f), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn lip_is_upper_gradient_on_short_walks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = FiniteSpace::from_edges(
            vec![0.5; 8],
            &[
                (0, 1, 1.0),
                (1, 2, 0.5),
                (2, 3, 2.0),
                (3, 0, 0.7),
                (1, 4, 0.2),
                (4, 5, 0.9),
                (5, 6, 0.3),
                (6, 7, 0.4),
                (7, 2, 1.1),
            ],
        )
        .unwrap();
        let family = CurveFamily::all_walks(&s, 4).unwrap();
        for _ in 0..10 {
            let f: Vec<f64> = (0..s.len()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let g = local_lip(&s, &f);
            let rep = upper_gradient_violations(&s, &f, &g, &family).unwrap();
            assert!(rep.violations.is_empty());
            assert!(rep.holds);
        }
    }

    #[test]
    fn zero_gradient_is_caught() {
        let s = FiniteSpace::interval(1.0, 10).unwrap();
        let f = s.coordinates();
        let zero = vec![0.0; s.len()];
        let family = CurveFamily::geodesics(&s, &[(0, 9), (3, 3)]).unwrap();
        let rep = upper_gradient_violations(&s, &f, &zero, &family).unwrap();
        assert_eq!(rep.violations.len(), 1);
        assert_eq!(rep.violations[0].curve, 0);
        let constant = vec![1.0; s.len()];
        let rep = upper_gradient_violations(&s, &constant, &zero, &family).unwrap();
        assert!(rep.violations.is_empty());
    }

    #[test]
    fn compression_of_uniform_family() {
        let s = FiniteSpace::circle(1.0, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fam = CurveFamily::random_walks(&s, 20, 5, &mut rng).unwrap();
        assert!(fam.compression(&s) > 0.0);
        assert_eq!(fam.curves().len(), 20);
    }
}
