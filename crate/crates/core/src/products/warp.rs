use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mmspace::FiniteSpace;

/// Distance and measure warps on the base factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpSpec {
    pub w_d: Vec<f64>,
    pub w_m: Vec<f64>,
    /// `max |w_d(t) - w_d(s)|` over base edges.
    pub modulus_d: f64,
    /// `max |w_m(t) - w_m(s)|` over base edges.
    pub modulus_m: f64,
}

fn modulus(y: &FiniteSpace, w: &[f64]) -> f64 {
    y.edges().map(|(a, b, _)| (w[a] - w[b]).abs()).fold(0.0, f64::max)
}

impl WarpSpec {
    /// Validates nonnegativity and `{w_d = 0} ⊆ {w_m = 0}`.
    pub fn new(y: &FiniteSpace, w_d: Vec<f64>, w_m: Vec<f64>) -> Result<Self> {
        for w in [&w_d, &w_m] {
            if w.len() != y.len() {
                return Err(Error::LengthMismatch { expected: y.len(), got: w.len() });
            }
            if let Some(i) = w.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidArgument(format!("warp value {} at point {i} must be nonnegative", w[i])));
            }
        }
        if let Some(t) = (0..y.len()).find(|&t| w_d[t] == 0.0 && w_m[t] > 0.0) {
            return Err(Error::HypothesisViolated(t, w_m[t]));
        }
        let modulus_d = modulus(y, &w_d);
        let modulus_m = modulus(y, &w_m);
        Ok(Self { w_d, w_m, modulus_d, modulus_m })
    }

    pub fn constant(y: &FiniteSpace, c: f64) -> Result<Self> {
        Self::new(y, vec![c; y.len()], vec![c; y.len()])
    }

    /// `w_d = w_m = w(coordinate)`.
    pub fn from_fn(y: &FiniteSpace, w: impl Fn(f64) -> f64) -> Result<Self> {
        let v: Vec<f64> = y.coordinates().into_iter().map(w).collect();
        Self::new(y, v.clone(), v)
    }

    /// Points where `w_m` vanishes.
    pub fn zero_set(&self) -> Vec<usize> {
        (0..self.w_m.len()).filter(|&t| self.w_m[t] == 0.0).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizedWarp {
    pub spec: WarpSpec,
    pub center: usize,
    pub delta: f64,
    /// `max w_d / min w_d` over `B(t₀, 3δ)`.
    pub ratio: f64,
}

/// Largest `δ` with `max w_d / min w_d <= 1 + ε` on `B(t₀, 3δ)`.
///
/// The ball grows through the points in order of distance; `3δ` is the
/// distance of the last point admitted.
pub fn admissible_delta(y: &FiniteSpace, w: &WarpSpec, t0: usize, eps: f64) -> Result<f64> {
    if w.w_d[t0] == 0.0 {
        return Err(Error::ZeroWarpCenter(t0));
    }
    let row = y.distance_row(t0);
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
    let (mut lo, mut hi) = (w.w_d[t0], w.w_d[t0]);
    let mut radius = 0.0;
    let mut k = 0;
    while k < order.len() {
        // Points at equal distance enter together.
        let d = row[order[k]];
        let mut j = k;
        let (mut l2, mut h2) = (lo, hi);
        while j < order.len() && row[order[j]] == d {
            l2 = l2.min(w.w_d[order[j]]);
            h2 = h2.max(w.w_d[order[j]]);
            j += 1;
        }
        if !(l2 > 0.0 && h2 / l2 <= 1.0 + eps) {
            break;
        }
        lo = l2;
        hi = h2;
        radius = d;
        k = j;
    }
    Ok(radius / 3.0)
}

/// Blend `w` to the constant `w(t₀)`: unchanged on `B(t₀, 2δ)`, constant beyond
/// distance `3δ`, linear in distance between.
pub fn localize_warp(y: &FiniteSpace, w: &WarpSpec, t0: usize, delta: f64) -> Result<LocalizedWarp> {
    if t0 >= y.len() {
        return Err(Error::IndexOutOfRange { index: t0, len: y.len() });
    }
    if w.w_d[t0] == 0.0 {
        return Err(Error::ZeroWarpCenter(t0));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta {delta} must be positive")));
    }
    let row = y.distance_row(t0);
    let blend = |v: &[f64]| -> Vec<f64> {
        (0..y.len())
            .map(|t| {
                let s = ((row[t] - 2.0 * delta) / delta).clamp(0.0, 1.0);
                (1.0 - s) * v[t] + s * v[t0]
            })
            .collect()
    };
    let spec = WarpSpec::new(y, blend(&w.w_d), blend(&w.w_m))?;
    let ball = y.ball(t0, 3.0 * delta);
    let (lo, hi) = ball.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &t| (lo.min(spec.w_d[t]), hi.max(spec.w_d[t])));
    Ok(LocalizedWarp { spec, center: t0, delta, ratio: hi / lo })
}
