use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mmspace::{within, FiniteSpace};

/// A center and radius attaining a supremum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: usize,
    pub r: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingEstimate {
    pub value: f64,
    pub witness: Witness,
    pub radii: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witnesses {
    pub measure: Witness,
    pub metric: Witness,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    #[serde(rename = "D")]
    pub d: f64,
    /// Greedy covering count; an upper bound on the metric-doubling constant.
    #[serde(rename = "C")]
    pub c: f64,
    pub c_is_upper_bound: bool,
    pub radii: Vec<f64>,
    pub witnesses: Witnesses,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemarkCheck {
    pub holds: bool,
    /// `D^4 - C`.
    pub slack: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

/// Geometric sequence of `count` radii from `4h` to half the diameter.
pub fn default_radii(space: &FiniteSpace, count: usize) -> Vec<f64> {
    let lo = 4.0 * space.h();
    let hi = (space.diameter() / 2.0).max(lo);
    if count <= 1 || hi <= lo {
        return vec![lo];
    }
    let ratio = (hi / lo).powf(1.0 / (count - 1) as f64);
    (0..count).map(|i| lo * ratio.powi(i as i32)).collect()
}

fn check_radii(space: &FiniteSpace, radii: &[f64]) -> Result<Vec<String>> {
    if radii.is_empty() {
        return Err(Error::InvalidArgument("radius list is empty".into()));
    }
    let mut warnings = Vec::new();
    for &r in radii {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidArgument(format!("radius {r} must be positive")));
        }
        if r <= space.h() {
            warnings.push(format!("radius {r} does not exceed the resolution h = {}", space.h()));
        }
    }
    Ok(warnings)
}

/// Maximum of `eval` over all centers and radii. Ties go to the smallest
/// center, then the earliest radius.
fn scan<F>(space: &FiniteSpace, radii: &[f64], eval: F) -> Witness
where
    F: Fn(usize, f64, &[f64]) -> f64 + Sync,
{
    let per_center: Vec<Witness> = (0..space.len())
        .into_par_iter()
        .map(|x| {
            let row = space.distance_row(x);
            radii
                .iter()
                .map(|&r| Witness { x, r, value: eval(x, r, &row) })
                .reduce(|a, b| if b.value > a.value { b } else { a })
                .expect("radii nonempty")
        })
        .collect();
    per_center.into_iter().reduce(|a, b| if b.value > a.value { b } else { a }).expect("space nonempty")
}

/// `μ(B(x, 2r)) / μ(B(x, r))` from the distance row of `x`.
pub fn measure_ratio(mu: &[f64], row: &[f64], r: f64) -> f64 {
    let (mut inner, mut outer) = (0.0, 0.0);
    for (j, &d) in row.iter().enumerate() {
        if within(d, 2.0 * r) {
            outer += mu[j];
            if within(d, r) {
                inner += mu[j];
            }
        }
    }
    if inner > 0.0 {
        outer / inner
    } else {
        1.0
    }
}

/// `D = max_{x, r} μ(B(x, 2r)) / μ(B(x, r))`.
pub fn measure_doubling(space: &FiniteSpace, radii: &[f64]) -> Result<DoublingEstimate> {
    let warnings = check_radii(space, radii)?;
    let mu = space.measure();
    let witness = scan(space, radii, |_, r, row| measure_ratio(mu, row, r));
    Ok(DoublingEstimate { value: witness.value.max(1.0), witness, radii: radii.to_vec(), warnings })
}

/// Size of a greedy cover of `B(x, r)` by balls of radius `r/2` centered in the ball.
///
/// Each step picks the uncovered point whose `r/2`-ball contains the most
/// uncovered points (ties to the smallest index).
pub fn greedy_cover(space: &FiniteSpace, x: usize, r: f64) -> Vec<usize> {
    let row = space.distance_row(x);
    let ball: Vec<usize> = (0..space.len()).filter(|&j| within(row[j], r)).collect();
    let half = r / 2.0;
    let near: Vec<Vec<usize>> = ball
        .iter()
        .map(|&p| {
            let rp = space.distance_row(p);
            (0..ball.len()).filter(|&q| within(rp[ball[q]], half)).collect()
        })
        .collect();
    let mut count: Vec<usize> = near.iter().map(Vec::len).collect();
    let mut covered = vec![false; ball.len()];
    let mut left = ball.len();
    let mut centers = Vec::new();
    while left > 0 {
        let mut pick = usize::MAX;
        for p in 0..ball.len() {
            if !covered[p] && (pick == usize::MAX || count[p] > count[pick]) {
                pick = p;
            }
        }
        centers.push(ball[pick]);
        for &q in &near[pick] {
            if !covered[q] {
                covered[q] = true;
                left -= 1;
                // Balls are symmetric: the candidates that counted q are q's own neighbors.
                for &p in &near[q] {
                    count[p] -= 1;
                }
            }
        }
    }
    centers
}

/// Greedy metric-doubling estimate `C = max_{x, r}` of [`greedy_cover`] sizes.
pub fn metric_doubling(space: &FiniteSpace, radii: &[f64]) -> Result<DoublingEstimate> {
    let warnings = check_radii(space, radii)?;
    let witness = scan(space, radii, |x, r, _| greedy_cover(space, x, r).len() as f64);
    Ok(DoublingEstimate { value: witness.value.max(1.0), witness, radii: radii.to_vec(), warnings })
}

pub fn doubling_report(space: &FiniteSpace, radii: &[f64]) -> Result<DoublingReport> {
    let measure = measure_doubling(space, radii)?;
    let metric = metric_doubling(space, radii)?;
    Ok(DoublingReport {
        d: measure.value,
        c: metric.value,
        c_is_upper_bound: true,
        radii: radii.to_vec(),
        witnesses: Witnesses { measure: measure.witness, metric: metric.witness },
        warnings: measure.warnings,
    })
}

/// Checks `C <= D^4`.
pub fn verify_doubling_remark(report: &DoublingReport) -> RemarkCheck {
    let bound = report.d.powi(4);
    RemarkCheck { holds: report.c <= bound, slack: bound - report.c, d: report.d, c: report.c }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_point_space() {
        let s = FiniteSpace::from_edges(vec![1.0, 1.0], &[(0, 1, 0.5)]).unwrap();
        let est = measure_doubling(&s, &[0.5]).unwrap();
        assert_eq!(est.value, 1.0);
        let est = measure_doubling(&s, &[0.25]).unwrap();
        assert_eq!(est.value, 2.0);
        assert_eq!(est.witness.x, 0);
    }

    #[test]
    fn large_radius_gives_one() {
        let s = FiniteSpace::circle(1.0, 20).unwrap();
        let est = measure_doubling(&s, &[0.5]).unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(greedy_cover(&s, 0, 0.0).len(), 1);
    }

    #[test]
    fn radius_checks() {
        let s = FiniteSpace::interval(1.0, 11).unwrap();
        assert!(measure_doubling(&s, &[]).is_err());
        assert!(measure_doubling(&s, &[0.0]).is_err());
        assert_eq!(measure_doubling(&s, &[0.05]).unwrap().warnings.len(), 1);
    }

    #[test]
    fn interval_covers() {
        let s = FiniteSpace::interval(1.0, 501).unwrap();
        let est = metric_doubling(&s, &[0.2]).unwrap();
        assert!(est.value <= 3.0, "{est:?}");
        let rep = doubling_report(&s, &[0.1, 0.2]).unwrap();
        assert_relative_eq!(rep.d, 2.0, max_relative = 0.05);
        assert!(verify_doubling_remark(&rep).holds);
    }

    #[test]
    fn witness_reproduces() {
        let s = FiniteSpace::circle(1.0, 60).unwrap();
        let radii = default_radii(&s, 5);
        let est = measure_doubling(&s, &radii).unwrap();
        let w = est.witness;
        let again = s.ball_measure(w.x, 2.0 * w.r) / s.ball_measure(w.x, w.r);
        assert_relative_eq!(again, w.value, max_relative = 1e-12);
        let c = metric_doubling(&s, &radii).unwrap();
        assert_eq!(greedy_cover(&s, c.witness.x, c.witness.r).len() as f64, c.value);
    }

    #[test]
    fn cover_covers() {
        let s = FiniteSpace::circle(1.0, 97).unwrap();
        for &r in &[0.03, 0.1, 0.3] {
            let centers = greedy_cover(&s, 5, r);
            for j in s.ball(5, r) {
                assert!(centers.iter().any(|&c| within(s.distance(c, j), r / 2.0)));
            }
        }
    }
}
