use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::products::ProductSpace;

/// Slice Lipschitz constants of a pair field: `lip_X f(·, t)(x)` and `lip_Y f(x, ·)(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialLips {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

pub fn partial_lips(product: &ProductSpace, f: &[f64]) -> PartialLips {
    assert_eq!(f.len(), product.pair_count(), "pair field length");
    let (xs, ys) = (product.x(), product.y());
    let ny = ys.len();
    let (x, y) = (0..product.pair_count())
        .into_par_iter()
        .map(|p| {
            let (xi, t) = (p / ny, p % ny);
            let lx = xs.neighbors(xi).map(|(xj, len)| (f[p] - f[xj * ny + t]).abs() / len).fold(0.0, f64::max);
            let ly = ys.neighbors(t).map(|(s, len)| (f[p] - f[xi * ny + s]).abs() / len).fold(0.0, f64::max);
            (lx, ly)
        })
        .unzip();
    PartialLips { x, y }
}

/// `|Df|_BL = sqrt(lip_X² / w_d² + lip_Y²)`, with `w_d ≡ 1` on Cartesian products.
///
/// Where `w_d = 0` the X-term is dropped, which requires `w_m = 0` there.
pub fn bl_gradient(product: &ProductSpace, f: &[f64]) -> Result<Vec<f64>> {
    let PartialLips { x, y } = partial_lips(product, f);
    let ny = product.y().len();
    (0..product.pair_count())
        .map(|p| {
            let t = p % ny;
            let xterm = match product.warp() {
                None => x[p],
                Some(w) if w.w_d[t] > 0.0 => x[p] / w.w_d[t],
                Some(w) if w.w_m[t] == 0.0 => 0.0,
                Some(w) => return Err(Error::HypothesisViolated(t, w.w_m[t])),
            };
            Ok(xterm.hypot(y[p]))
        })
        .collect()
}
