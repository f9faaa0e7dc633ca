//! Pointwise inequality suites for `lip`: product rule, sublinearity,
//! averaged sublinearity, lower semicontinuity, truncation, and the
//! comparison of gradients under a change of metric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mmspace::FiniteSpace;
use crate::products::ProductSpace;

use super::local_lip;

/// Floating-point allowance on an exact inequality.
fn rounding(rhs: f64) -> f64 {
    1e-12 * (1.0 + rhs.abs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub checked: usize,
    pub violations: usize,
    /// `max (lhs - rhs)` over checked points; nonpositive when the suite holds.
    pub max_excess: f64,
    pub holds: bool,
}

impl InequalityReport {
    fn from_pairs(name: &str, pairs: impl Iterator<Item = (f64, f64)>) -> Self {
        let (mut checked, mut violations) = (0, 0);
        let mut max_excess = f64::NEG_INFINITY;
        for (lhs, rhs) in pairs {
            checked += 1;
            max_excess = max_excess.max(lhs - rhs);
            if lhs > rhs + rounding(rhs) {
                violations += 1;
            }
        }
        Self { name: name.into(), checked, violations, max_excess, holds: violations == 0 }
    }

    pub fn merge(name: &str, reports: &[InequalityReport]) -> Self {
        let checked = reports.iter().map(|r| r.checked).sum();
        let violations = reports.iter().map(|r| r.violations).sum();
        let max_excess = reports.iter().map(|r| r.max_excess).fold(f64::NEG_INFINITY, f64::max);
        Self { name: name.into(), checked, violations, max_excess, holds: violations == 0 }
    }
}

/// `lip(fg) <= |f| lip g + |g| lip f + lip f · lip g · h`.
pub fn product_rule(space: &FiniteSpace, f: &[f64], g: &[f64]) -> InequalityReport {
    let fg: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
    let (lf, lg, lfg) = (local_lip(space, f), local_lip(space, g), local_lip(space, &fg));
    let h = space.h();
    InequalityReport::from_pairs(
        "product_rule",
        (0..space.len()).map(|x| (lfg[x], f[x].abs() * lg[x] + g[x].abs() * lf[x] + lf[x] * lg[x] * h)),
    )
}

/// `lip(αf + βg) <= |α| lip f + |β| lip g`.
pub fn sublinearity(space: &FiniteSpace, f: &[f64], g: &[f64], alpha: f64, beta: f64) -> InequalityReport {
    let comb: Vec<f64> = f.iter().zip(g).map(|(a, b)| alpha * a + beta * b).collect();
    let (lf, lg, lc) = (local_lip(space, f), local_lip(space, g), local_lip(space, &comb));
    InequalityReport::from_pairs(
        "sublinearity",
        (0..space.len()).map(|x| (lc[x], alpha.abs() * lf[x] + beta.abs() * lg[x])),
    )
}

/// For a set `F` of base points: `lip_X(⨍_F f(·, t)) <= ⨍_F lip_X f(·, t)`.
pub fn averaged_sublinearity(product: &ProductSpace, f: &[f64], subset: &[usize]) -> Result<InequalityReport> {
    if subset.is_empty() {
        return Err(Error::InvalidArgument("averaging set is empty".into()));
    }
    let (xs, ys) = (product.x(), product.y());
    let ny = ys.len();
    let mu = ys.measure();
    let mass: f64 = subset.iter().map(|&t| mu[t]).sum();
    let mut avg = vec![0.0; xs.len()];
    let mut avg_lip = vec![0.0; xs.len()];
    for &t in subset {
        let slice: Vec<f64> = (0..xs.len()).map(|x| f[x * ny + t]).collect();
        let lip = local_lip(xs, &slice);
        for x in 0..xs.len() {
            avg[x] += mu[t] * slice[x] / mass;
            avg_lip[x] += mu[t] * lip[x] / mass;
        }
    }
    let lhs = local_lip(xs, &avg);
    Ok(InequalityReport::from_pairs("averaged_sublinearity", (0..xs.len()).map(|x| (lhs[x], avg_lip[x]))))
}

/// For approximants `f_n → f`: `lip f <= lip f_n + lip(f - f_n)` at every stage,
/// and the gap `lip f - lip f_n` is bounded by `lip(f - f_n)`, which vanishes in the limit.
pub fn lower_semicontinuity(space: &FiniteSpace, f: &[f64], approximants: &[Vec<f64>]) -> InequalityReport {
    let lf = local_lip(space, f);
    let reports: Vec<_> = approximants
        .iter()
        .map(|fn_| {
            let diff: Vec<f64> = f.iter().zip(fn_).map(|(a, b)| a - b).collect();
            let (ln, ld) = (local_lip(space, fn_), local_lip(space, &diff));
            InequalityReport::from_pairs("lsc", (0..space.len()).map(|x| (lf[x], ln[x] + ld[x])))
        })
        .collect();
    InequalityReport::merge("lower_semicontinuity", &reports)
}

/// `lip(clamp(f, -λ, λ)) <= lip f`.
pub fn truncation(space: &FiniteSpace, f: &[f64], lambda: f64) -> InequalityReport {
    let t: Vec<f64> = f.iter().map(|v| v.clamp(-lambda, lambda)).collect();
    let (lf, lt) = (local_lip(space, f), local_lip(space, &t));
    InequalityReport::from_pairs("truncation", (0..space.len()).map(|x| (lt[x], lf[x])))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    /// `d₁ <= L d₂` on every edge.
    pub metric_hypothesis: bool,
    /// `m₂ <= C m₁` at every point.
    pub measure_hypothesis: bool,
    /// `lip₂ f <= L lip₁ f` pointwise.
    pub conclusion: InequalityReport,
}

/// Two metrics on the same graph: if `d₁ <= L d₂` edgewise then `lip₂ <= L lip₁`.
pub fn metric_comparison(s1: &FiniteSpace, s2: &FiniteSpace, f: &[f64], l: f64, c: f64) -> Result<MetricComparison> {
    let e1: Vec<_> = s1.edges().collect();
    let e2: Vec<_> = s2.edges().collect();
    if e1.len() != e2.len() || e1.iter().zip(&e2).any(|(a, b)| (a.0, a.1) != (b.0, b.1)) {
        return Err(Error::InvalidArgument("spaces must share points and edges".into()));
    }
    let metric_hypothesis = e1.iter().zip(&e2).all(|(a, b)| a.2 <= l * b.2 * (1.0 + 1e-12));
    let measure_hypothesis = s1.measure().iter().zip(s2.measure()).all(|(m1, m2)| *m2 <= c * m1 * (1.0 + 1e-12));
    let (l1, l2) = (local_lip(s1, f), local_lip(s2, f));
    let conclusion = InequalityReport::from_pairs("metric_comparison", (0..s1.len()).map(|x| (l2[x], l * l1[x])));
    Ok(MetricComparison { metric_hypothesis, measure_hypothesis, conclusion })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::products::ProductOptions;
    use proptest::prelude::*;

    fn field(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0f64..3.0, n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn product_rule_holds(f in field(40), g in field(40)) {
            let s = FiniteSpace::circle(1.0, 40).unwrap();
            prop_assert!(product_rule(&s, &f, &g).holds);
        }

        #[test]
        fn sublinear_holds(f in field(30), g in field(30), a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let s = FiniteSpace::interval(2.0, 30).unwrap();
            prop_assert!(sublinearity(&s, &f, &g, a, b).holds);
        }

        #[test]
        fn truncation_holds(f in field(30), lambda in 0.0f64..3.0) {
            let s = FiniteSpace::interval(1.0, 30).unwrap();
            prop_assert!(truncation(&s, &f, lambda).holds);
        }

        #[test]
        fn lsc_holds(f in field(25), noise in field(25)) {
            let s = FiniteSpace::circle(1.0, 25).unwrap();
            let approx: Vec<Vec<f64>> = (1..6)
                .map(|n| f.iter().zip(&noise).map(|(a, e)| a + e / (n * n) as f64).collect())
                .collect();
            prop_assert!(lower_semicontinuity(&s, &f, &approx).holds);
        }

        #[test]
        fn contsublin_holds(f in field(8 * 6), mask in prop::collection::vec(any::<bool>(), 6)) {
            let x = FiniteSpace::circle(1.0, 8).unwrap();
            let y = FiniteSpace::interval(1.0, 6).unwrap();
            let p = ProductSpace::cartesian(&x, &y, &ProductOptions::default()).unwrap();
            let subset: Vec<usize> = (0..6).filter(|&t| mask[t]).collect();
            prop_assume!(!subset.is_empty());
            prop_assert!(averaged_sublinearity(&p, &f, &subset).unwrap().holds);
        }

        #[test]
        fn comparison_holds(f in field(20), scale in prop::collection::vec(0.5f64..2.0, 19)) {
            let s1 = FiniteSpace::interval(1.0, 20).unwrap();
            let edges: Vec<_> = s1.edges().zip(&scale).map(|((a, b, l), k)| (a, b, l * k)).collect();
            let s2 = FiniteSpace::from_edges(s1.measure().to_vec(), &edges).unwrap();
            let l = s1.edges().zip(s2.edges()).map(|(a, b)| a.2 / b.2).fold(0.0, f64::max);
            let r = metric_comparison(&s1, &s2, &f, l, 1.0).unwrap();
            prop_assert!(r.metric_hypothesis && r.measure_hypothesis);
            prop_assert!(r.conclusion.holds);
        }
    }

    #[test]
    fn product_rule_needs_second_order_slack() {
        let s = FiniteSpace::interval(1.0, 2).unwrap();
        let f = vec![0.0, 1.0];
        let r = product_rule(&s, &f, &f);
        assert!(r.holds);
        // At point 0 the first-order terms vanish and the slack is tight.
        assert_eq!(r.max_excess, 0.0);
    }
}
