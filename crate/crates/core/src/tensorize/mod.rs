//! The cube-averaging smoothing operator, its convergence and energy
//! estimates, the Lipschitz splitting and sandwich checks on products, and
//! cutoff families on warped products.

mod cutoffs;
mod sandwich;
mod smoothing;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mmspace::{within, Continuum, FiniteSpace};
use crate::products::ProductSpace;

pub use cutoffs::{
    build_cutoffs, cutoff_convergence, linear_decay_constant, CutoffFamily, CutoffOptions, CutoffRow, CutoffTable,
};
pub use sandwich::{
    lemma_lip_check, sandwich_report, C0Regime, FieldSandwich, Histogram, LemmaLipReport, RatioOptions, SandwichReport,
};
pub use smoothing::{
    convergence_experiment, cube_average, neighbor_difference_check, smooth, telescoping_check, ConvergenceRow,
    ConvergenceTable, CubeAverages, NeighborDifferenceReport, Smoothed, TelescopingReport,
};

/// `f(x, t) = Σ_i h_i(t) g_i(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorSumField {
    /// Factors on the base `Y`.
    pub h: Vec<Vec<f64>>,
    /// Factors on the fiber `X`.
    pub g: Vec<Vec<f64>>,
}

impl TensorSumField {
    pub fn new(h: Vec<Vec<f64>>, g: Vec<Vec<f64>>) -> Result<Self> {
        if h.is_empty() || h.len() != g.len() {
            return Err(Error::InvalidArgument("tensor sum needs N >= 1 matching factor pairs".into()));
        }
        for v in h.iter().chain(&g) {
            if let Some(i) = v.iter().position(|a| !a.is_finite()) {
                return Err(Error::NonFiniteValue(i));
            }
        }
        Ok(Self { h, g })
    }

    pub fn terms(&self) -> usize {
        self.h.len()
    }

    pub fn eval(&self, product: &ProductSpace) -> Vec<f64> {
        let ny = product.y().len();
        (0..product.pair_count())
            .map(|p| {
                let (x, t) = (p / ny, p % ny);
                self.h.iter().zip(&self.g).map(|(h, g)| h[t] * g[x]).sum()
            })
            .collect()
    }
}

/// Points of a factor farther than `margin` from the ends of an interval.
pub fn factor_interior(space: &FiniteSpace, margin: f64) -> Vec<bool> {
    match space.continuum() {
        Continuum::Interval { length } => (0..space.len())
            .map(|i| {
                let c = space.coordinate(i);
                !within(c, margin) && !within(length - c, margin)
            })
            .collect(),
        _ => vec![true; space.len()],
    }
}

/// Pairs whose factors are both interior, with margin `factor · h` per factor.
pub fn interior_mask(product: &ProductSpace, factor: f64) -> Vec<bool> {
    let mx = factor_interior(product.x(), factor * product.x().h());
    let my = factor_interior(product.y(), factor * product.y().h());
    let ny = product.y().len();
    (0..product.pair_count()).map(|p| mx[p / ny] && my[p % ny]).collect()
}

/// Least-squares slope of `ln y` against `ln x`, over positive entries.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `sqrt(Σ v² μ)`.
pub(crate) fn l2(v: &[f64], mu: &[f64]) -> f64 {
    v.iter().zip(mu).map(|(a, m)| a * a * m).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::products::ProductOptions;

    #[test]
    fn tensor_sum_eval() {
        let a = FiniteSpace::interval(1.0, 3).unwrap();
        let p = ProductSpace::cartesian(&a, &a, &ProductOptions::default()).unwrap();
        let tf = TensorSumField::new(vec![vec![1.0; 3]], vec![vec![0.0, 1.0, 2.0]]).unwrap();
        assert_eq!(tf.eval(&p), vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
        assert!(TensorSumField::new(vec![], vec![]).is_err());
    }

    #[test]
    fn interior_excludes_two_cells() {
        let a = FiniteSpace::interval(1.0, 11).unwrap();
        let m = factor_interior(&a, 2.0 * a.h());
        assert_eq!(m.iter().filter(|&&b| b).count(), 5);
        let c = FiniteSpace::circle(1.0, 11).unwrap();
        assert!(factor_interior(&c, 0.2).iter().all(|&b| b));
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [4.0, 8.0, 16.0, 32.0];
        let ys: Vec<f64> = xs.iter().map(|k| 3.0 / k).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&xs, &[0.0; 4]), None);
    }
}
