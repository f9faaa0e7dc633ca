use crate::error::{Error, Result};

use super::FiniteSpace;

/// Discrete curve: a walk along edges with parameter values `0 = t_0 < ... < t_N = 1`.
/// Consecutive points are equal or adjacent.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    points: Vec<usize>,
    params: Vec<f64>,
}

impl Curve {
    pub fn new(space: &FiniteSpace, points: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidCurve("no points".into()));
        }
        if params.len() != points.len() {
            return Err(Error::InvalidCurve(format!("{} points but {} parameters", points.len(), params.len())));
        }
        if points.len() > 1 && (params[0] != 0.0 || *params.last().unwrap() != 1.0) {
            return Err(Error::InvalidCurve("parameters must run from 0 to 1".into()));
        }
        if params.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidCurve("parameters must increase strictly".into()));
        }
        for &p in &points {
            if p >= space.len() {
                return Err(Error::IndexOutOfRange { index: p, len: space.len() });
            }
        }
        for w in points.windows(2) {
            if w[0] != w[1] && space.edge_length(w[0], w[1]).is_none() {
                return Err(Error::InvalidCurve(format!("points {} and {} are not adjacent", w[0], w[1])));
            }
        }
        Ok(Self { points, params })
    }

    /// Equally spaced parameters.
    pub fn uniform(space: &FiniteSpace, points: Vec<usize>) -> Result<Self> {
        let n = points.len();
        let params = if n == 1 { vec![0.0] } else { (0..n).map(|i| i as f64 / (n - 1) as f64).collect() };
        Self::new(space, points, params)
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn start(&self) -> usize {
        self.points[0]
    }

    pub fn end(&self) -> usize {
        *self.points.last().unwrap()
    }

    pub fn segments(&self) -> usize {
        self.points.len() - 1
    }

    /// Length of segment `i` (between `points[i]` and `points[i + 1]`).
    pub fn segment_length(&self, space: &FiniteSpace, i: usize) -> f64 {
        let (a, b) = (self.points[i], self.points[i + 1]);
        if a == b {
            0.0
        } else {
            space.edge_length(a, b).expect("validated curve")
        }
    }

    pub fn length(&self, space: &FiniteSpace) -> f64 {
        (0..self.segments()).map(|i| self.segment_length(space, i)).sum()
    }

    /// Metric derivative on segment `i`, constant on `[t_i, t_{i+1}]`.
    pub fn metric_derivative(&self, space: &FiniteSpace, i: usize) -> f64 {
        self.segment_length(space, i) / (self.params[i + 1] - self.params[i])
    }

    pub fn metric_derivatives(&self, space: &FiniteSpace) -> Vec<f64> {
        (0..self.segments()).map(|i| self.metric_derivative(space, i)).collect()
    }

    /// Same walk with new parameter values.
    pub fn reparameterize(&self, space: &FiniteSpace, params: Vec<f64>) -> Result<Self> {
        Self::new(space, self.points.clone(), params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn constant_curve_has_zero_length() {
        let s = FiniteSpace::interval(1.0, 5).unwrap();
        let c = Curve::uniform(&s, vec![2, 2, 2]).unwrap();
        assert_eq!(c.length(&s), 0.0);
    }

    #[test]
    fn full_loop_on_circle() {
        let s = FiniteSpace::circle(1.0, 100).unwrap();
        let pts: Vec<usize> = (0..=100).map(|i| i % 100).collect();
        let c = Curve::uniform(&s, pts).unwrap();
        assert_relative_eq!(c.length(&s), 1.0, epsilon = 1e-12);
        for v in c.metric_derivatives(&s) {
            assert_relative_eq!(v, 1.0, epsilon = 1e-9);
        }
        let integral: f64 =
            (0..c.segments()).map(|i| c.metric_derivative(&s, i) * (c.params()[i + 1] - c.params()[i])).sum();
        assert_relative_eq!(integral, c.length(&s), epsilon = 1e-12);
    }

    #[test]
    fn rejects_jumps_and_bad_params() {
        let s = FiniteSpace::interval(1.0, 5).unwrap();
        assert!(Curve::uniform(&s, vec![0, 2]).is_err());
        assert!(Curve::new(&s, vec![0, 1], vec![0.0, 0.5]).is_err());
        assert!(Curve::new(&s, vec![0, 1, 2], vec![0.0, 0.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn length_dominates_endpoint_distance(steps in prop::collection::vec(0usize..3, 1..60), start in 0usize..40) {
            let s = FiniteSpace::circle(1.0, 40).unwrap();
            let mut pts = vec![start];
            for st in steps {
                let last = *pts.last().unwrap();
                pts.push(match st { 0 => last, 1 => (last + 1) % 40, _ => (last + 39) % 40 });
            }
            let c = Curve::uniform(&s, pts).unwrap();
            prop_assert!(c.length(&s) + 1e-12 >= s.distance(c.start(), c.end()));
        }

        #[test]
        fn reparameterization_keeps_length(gaps in prop::collection::vec(0.01f64..1.0, 6)) {
            let s = FiniteSpace::interval(1.0, 10).unwrap();
            let c = Curve::uniform(&s, vec![0, 1, 2, 2, 3, 4, 3]).unwrap();
            let total: f64 = gaps.iter().sum();
            let mut params = vec![0.0];
            let mut acc = 0.0;
            for g in &gaps[..5] {
                acc += g / total;
                params.push(acc);
            }
            params.push(1.0);
            let r = c.reparameterize(&s, params).unwrap();
            prop_assert!((r.length(&s) - c.length(&s)).abs() < 1e-12);
        }
    }
}
