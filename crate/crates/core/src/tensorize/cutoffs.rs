use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{bl_gradient, local_lip};
use crate::cubes::{build_cubes, partition_of_unity};
use crate::error::{Error, Result};
use crate::mmspace::{within, FiniteSpace};
use crate::products::ProductSpace;

use super::l2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffOptions {
    /// Center of `σ_m` on `X`.
    pub x0: usize,
    /// Center of `ψ_{n,k}` on `Y`.
    pub t0: usize,
    /// Minimum distance between zeros of `w_m`; `None` means `1.5 h_Y`.
    pub zero_separation: Option<f64>,
    /// Largest accepted `w_m / D`.
    pub decay_cap: f64,
}

impl Default for CutoffOptions {
    fn default() -> Self {
        Self { x0: 0, t0: 0, zero_separation: None, decay_cap: 100.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffFamily {
    pub n: f64,
    pub m: f64,
    pub k: f64,
    /// `ψ_{n,k}` on `Y`.
    pub psi: Vec<f64>,
    /// `σ_m` on `X`.
    pub sigma: Vec<f64>,
    /// `η_n` on `Y`.
    pub eta: Vec<f64>,
    /// Distance to `{w_m = 0}`; infinite when the set is empty.
    pub zero_distance: Vec<f64>,
}

impl CutoffFamily {
    /// `ψ(t) η(t) σ(x)` on pairs.
    pub fn multiplier(&self) -> Vec<f64> {
        let ny = self.psi.len();
        (0..self.sigma.len() * ny).map(|p| self.psi[p % ny] * self.eta[p % ny] * self.sigma[p / ny]).collect()
    }
}

fn zero_set(product: &ProductSpace) -> Vec<usize> {
    product.warp().map_or_else(Vec::new, |w| (0..w.w_m.len()).filter(|&t| w.w_m[t] == 0.0).collect())
}

fn check_zero_set(y: &FiniteSpace, zeros: &[usize], sep: f64) -> Result<()> {
    for (a, &i) in zeros.iter().enumerate() {
        for &j in &zeros[a + 1..] {
            let d = y.distance(i, j);
            if within(d, sep) {
                return Err(Error::ZeroSetNotDiscrete(i, j, d));
            }
        }
    }
    Ok(())
}

/// `max w_m / D` over points off the zero set, with `D` the distance to `{w_m = 0}`.
/// Returns 0 when `w_m` has no zeros.
pub fn linear_decay_constant(y: &FiniteSpace, w_m: &[f64], cap: f64) -> Result<f64> {
    let zeros: Vec<usize> = (0..y.len()).filter(|&t| w_m[t] == 0.0).collect();
    if zeros.is_empty() {
        return Ok(0.0);
    }
    let d = y.distance_to_set(&zeros, f64::INFINITY);
    let (mut worst, mut at) = (0.0f64, 0);
    for t in (0..y.len()).filter(|&t| d[t] > 0.0) {
        let r = w_m[t] / d[t];
        if r > worst {
            worst = r;
            at = t;
        }
    }
    if worst > cap {
        return Err(Error::DecayHypothesis { point: at, ratio: worst, cap });
    }
    Ok(worst)
}

/// `ψ_{n,k}`, `σ_m` and `η_n` for a product, with `η_n ≡ 1` when `w_m` has no zeros.
pub fn build_cutoffs(product: &ProductSpace, n: f64, m: f64, k: f64, opts: &CutoffOptions) -> Result<CutoffFamily> {
    let (xs, ys) = (product.x(), product.y());
    if !(n > 1.0) || !(m > 0.0) {
        return Err(Error::InvalidArgument(format!("cutoff needs n > 1 and m > 0, got n = {n}, m = {m}")));
    }
    for (i, len) in [(opts.x0, xs.len()), (opts.t0, ys.len())] {
        if i >= len {
            return Err(Error::IndexOutOfRange { index: i, len });
        }
    }
    let partition = build_cubes(ys, k)?;
    let pou = partition_of_unity(ys, &partition)?;
    let from_t0 = ys.distance_row(opts.t0);
    let mut meets = vec![false; partition.len()];
    for (t, w) in pou.weights.iter().enumerate() {
        if from_t0[t] < n {
            for &(j, chi) in w {
                if chi > 0.0 {
                    meets[j] = true;
                }
            }
        }
    }
    let psi: Vec<f64> =
        pou.weights.iter().map(|w| w.iter().filter(|e| meets[e.0]).map(|e| e.1).sum::<f64>().clamp(0.0, 1.0)).collect();
    let from_x0 = xs.distance_row(opts.x0);
    let sigma: Vec<f64> = from_x0.iter().map(|d| (m - d).clamp(0.0, 1.0)).collect();
    let zeros = zero_set(product);
    let zero_distance = ys.distance_to_set(&zeros, f64::INFINITY);
    let eta = zero_distance
        .iter()
        .map(|&d| {
            if zeros.is_empty() {
                1.0
            } else if d == 0.0 {
                0.0
            } else {
                (1.0 - d.ln().abs() / n.ln()).clamp(0.0, 1.0)
            }
        })
        .collect();
    Ok(CutoffFamily { n, m, k, psi, sigma, eta, zero_distance })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffRow {
    pub n: f64,
    pub m: f64,
    pub k: f64,
    /// `‖f - f_{n,m,k}‖` in `L²(m_w)`.
    pub l2_error: f64,
    /// `‖|D(f - f_{n,m,k})|_BL‖` in `L²(m_w)`.
    pub bl_error: f64,
    /// `‖(1 - ψησ) |Df|_BL‖`.
    pub multiplier_term: f64,
    /// `‖f ψ η lip σ / w_d‖`.
    pub sigma_term: f64,
    /// `‖f η σ lip ψ‖`.
    pub psi_term: f64,
    /// `‖f ψ σ lip η‖`.
    pub eta_term: f64,
    /// `N C ‖f‖²_∞ m_X(B(x₀, m)) / ln n`, compared with `eta_term²`.
    pub eta_bound: f64,
}

impl CutoffRow {
    pub fn eta_holds(&self) -> bool {
        self.eta_term.powi(2) <= self.eta_bound * (1.0 + 1e-12)
    }

    /// `bl_error` is at most the sum of the four terms.
    pub fn split_holds(&self) -> bool {
        let sum = self.multiplier_term + self.sigma_term + self.psi_term + self.eta_term;
        self.bl_error <= sum * (1.0 + 1e-9) + 1e-12
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffTable {
    pub rows: Vec<CutoffRow>,
    /// Linear decay constant `C` of `w_m`.
    pub decay_constant: f64,
    /// Number of one-sided approaches to `{w_m = 0}`: the summed degree of its points.
    pub zero_directions: usize,
    /// Least-squares `c` in `eta_term ≈ c / ln n`.
    pub fit_c: Option<f64>,
    /// `max |eta_term - c/ln n| / eta_term`.
    pub fit_residual: Option<f64>,
    pub eta_monotone: bool,
    pub eta_bound_holds: bool,
}

impl CutoffTable {
    pub const CSV_HEADER: &'static str =
        "n,m,k,l2_error,bl_error,multiplier_term,sigma_term,psi_term,eta_term,eta_bound";

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.n,
                r.m,
                r.k,
                r.l2_error,
                r.bl_error,
                r.multiplier_term,
                r.sigma_term,
                r.psi_term,
                r.eta_term,
                r.eta_bound
            )?;
        }
        Ok(())
    }
}

fn cutoff_row(
    product: &ProductSpace,
    f: &[f64],
    df: &[f64],
    mu: &[f64],
    (n, m, k): (f64, f64, f64),
    opts: &CutoffOptions,
    nc: f64,
) -> Result<CutoffRow> {
    let fam = build_cutoffs(product, n, m, k, opts)?;
    let (xs, ys) = (product.x(), product.y());
    let ny = ys.len();
    let mult = fam.multiplier();
    let diff: Vec<f64> = f.iter().zip(&mult).map(|(v, c)| v * (1.0 - c)).collect();
    let bl_diff = bl_gradient(product, &diff)?;
    let (lpsi, leta, lsig) = (local_lip(ys, &fam.psi), local_lip(ys, &fam.eta), local_lip(xs, &fam.sigma));
    let w_d = product.warp().map(|w| &w.w_d);
    let term = |g: &dyn Fn(usize, usize) -> f64| -> f64 {
        let v: Vec<f64> = (0..f.len()).map(|p| f[p].abs() * g(p / ny, p % ny)).collect();
        l2(&v, mu)
    };
    let multiplier_term = {
        let v: Vec<f64> = (0..f.len()).map(|p| (1.0 - mult[p]) * df[p]).collect();
        l2(&v, mu)
    };
    let sigma_term = term(&|x, t| {
        let a = fam.psi[t] * fam.eta[t];
        if a == 0.0 {
            return 0.0;
        }
        let wd = w_d.map_or(1.0, |w| w[t]);
        if wd > 0.0 {
            a * lsig[x] / wd
        } else {
            f64::INFINITY
        }
    });
    let psi_term = term(&|x, t| fam.eta[t] * fam.sigma[x] * lpsi[t]);
    let eta_term = term(&|x, t| fam.psi[t] * fam.sigma[x] * leta[t]);
    let sup = f.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let eta_bound = nc * sup * sup * xs.ball_measure(opts.x0, m) / n.ln();
    Ok(CutoffRow {
        n,
        m,
        k,
        l2_error: l2(&diff, mu),
        bl_error: l2(&bl_diff, mu),
        multiplier_term,
        sigma_term,
        psi_term,
        eta_term,
        eta_bound,
    })
}

/// Errors of `f_{n,m,k} = ψ_{n,k} η_n σ_m f` against `f` along a schedule of `(n, m, k)`.
pub fn cutoff_convergence(
    product: &ProductSpace,
    f: &[f64],
    schedule: &[(f64, f64, f64)],
    opts: &CutoffOptions,
) -> Result<CutoffTable> {
    if f.len() != product.pair_count() {
        return Err(Error::LengthMismatch { expected: product.pair_count(), got: f.len() });
    }
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("cutoff schedule is empty".into()));
    }
    let ys = product.y();
    let zeros = zero_set(product);
    check_zero_set(ys, &zeros, opts.zero_separation.unwrap_or(1.5 * ys.h()))?;
    let decay_constant = match product.warp() {
        Some(w) => linear_decay_constant(ys, &w.w_m, opts.decay_cap)?,
        None => 0.0,
    };
    let zero_directions: usize = zeros.iter().map(|&t| ys.degree(t)).sum();
    let nc = zero_directions as f64 * decay_constant;
    let mu = product.pair_measure();
    let df = bl_gradient(product, f)?;
    let rows =
        schedule.par_iter().map(|&s| cutoff_row(product, f, &df, &mu, s, opts, nc)).collect::<Result<Vec<_>>>()?;
    let inv: Vec<f64> = rows.iter().map(|r| 1.0 / r.n.ln()).collect();
    let eta: Vec<f64> = rows.iter().map(|r| r.eta_term).collect();
    let sxx: f64 = inv.iter().map(|a| a * a).sum();
    let fit_c = (eta.iter().any(|&e| e > 0.0)).then(|| inv.iter().zip(&eta).map(|(a, e)| a * e).sum::<f64>() / sxx);
    let fit_residual = fit_c.map(|c| {
        inv.iter()
            .zip(&eta)
            .map(|(a, e)| if *e > 0.0 { (e - c * a).abs() / e } else { f64::INFINITY })
            .fold(0.0, f64::max)
    });
    Ok(CutoffTable {
        eta_monotone: eta.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)),
        eta_bound_holds: rows.iter().all(CutoffRow::eta_holds),
        rows,
        decay_constant,
        zero_directions,
        fit_c,
        fit_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::products::{ProductOptions, WarpSpec};

    fn cone(nc: usize, ny: usize) -> ProductSpace {
        let x = FiniteSpace::circle(2.0 * std::f64::consts::PI, nc).unwrap();
        let y = FiniteSpace::interval(1.0, ny).unwrap();
        let w = WarpSpec::from_fn(&y, |t| t).unwrap();
        ProductSpace::warped(&x, &y, w, &ProductOptions::default()).unwrap()
    }

    #[test]
    fn eta_on_cone() {
        let p = cone(40, 101);
        let fam = build_cutoffs(&p, 16.0, 10.0, 4.0, &CutoffOptions::default()).unwrap();
        let coords = p.y().coordinates();
        for (t, &e) in fam.eta.iter().enumerate() {
            let s = coords[t];
            assert!((0.0..=1.0).contains(&e));
            if s <= 1.0 / 16.0 {
                assert_eq!(e, 0.0);
            }
            if s > 0.0 {
                let expected = (1.0 - s.ln().abs() / 16f64.ln()).clamp(0.0, 1.0);
                assert!((e - expected).abs() < 1e-9);
            }
        }
        assert!((fam.eta[100] - 1.0).abs() < 1e-9);
        assert!(fam.sigma.iter().all(|&s| s == 1.0));
        assert!(fam.psi.iter().all(|&s| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn cartesian_eta_is_one() {
        let a = FiniteSpace::interval(1.0, 30).unwrap();
        let p = ProductSpace::cartesian(&a, &a, &ProductOptions::default()).unwrap();
        let fam = build_cutoffs(&p, 4.0, 0.5, 4.0, &CutoffOptions::default()).unwrap();
        assert!(fam.eta.iter().all(|&e| e == 1.0));
        let d = p.x().distance_row(0);
        for (x, &s) in fam.sigma.iter().enumerate() {
            if d[x] <= 0.5 - 1.0 + 1e-12 {
                assert_eq!(s, 1.0);
            }
            assert!((0.0..=1.0).contains(&s));
            if d[x] >= 0.5 {
                assert_eq!(s, 0.0);
            }
        }
    }

    #[test]
    fn psi_is_one_near_center() {
        let a = FiniteSpace::interval(10.0, 201).unwrap();
        let p = ProductSpace::cartesian(&a, &a, &ProductOptions::default()).unwrap();
        let opts = CutoffOptions { t0: 100, ..Default::default() };
        let fam = build_cutoffs(&p, 3.0, 5.0, 2.0, &opts).unwrap();
        let d = p.y().distance_row(100);
        for t in 0..201 {
            assert!((0.0..=1.0 + 1e-12).contains(&fam.psi[t]));
            if d[t] <= 2.0 {
                assert!((fam.psi[t] - 1.0).abs() < 1e-12);
            }
        }
        assert!(fam.psi[0] < 1e-12);
    }

    #[test]
    fn decay_constant_and_errors() {
        let y = FiniteSpace::interval(1.0, 101).unwrap();
        let c = linear_decay_constant(&y, &y.coordinates(), 100.0).unwrap();
        assert!((c - 1.0).abs() < 1e-9);
        let sq: Vec<f64> = y.coordinates().iter().map(|t| t.sqrt()).collect();
        assert!(matches!(linear_decay_constant(&y, &sq, 5.0), Err(Error::DecayHypothesis { .. })));
        let w = vec![0.0, 0.0, 1.0];
        let y3 = FiniteSpace::interval(1.0, 3).unwrap();
        assert!(matches!(check_zero_set(&y3, &[0, 1], 1.5 * y3.h()), Err(Error::ZeroSetNotDiscrete(0, 1, _))));
        assert_eq!(linear_decay_constant(&y3, &[1.0; 3], 1.0).unwrap(), 0.0);
        let _ = w;
    }

    #[test]
    fn zero_field_has_zero_errors() {
        let p = cone(20, 41);
        let t = cutoff_convergence(&p, &vec![0.0; p.pair_count()], &[(4.0, 10.0, 4.0)], &Default::default()).unwrap();
        let r = t.rows[0];
        assert_eq!((r.l2_error, r.bl_error, r.eta_term), (0.0, 0.0, 0.0));
    }

    #[test]
    fn field_inside_cutoffs_is_reproduced() {
        let a = FiniteSpace::interval(1.0, 40).unwrap();
        let y = FiniteSpace::interval(1.0, 40).unwrap();
        let w = WarpSpec::constant(&y, 1.0).unwrap();
        let p = ProductSpace::warped(&a, &y, w, &ProductOptions::default()).unwrap();
        let f = p.field(|x, t| x * t + 1.0);
        let t = cutoff_convergence(&p, &f, &[(4.0, 5.0, 8.0)], &Default::default()).unwrap();
        let r = t.rows[0];
        assert!(r.l2_error < 1e-12 && r.bl_error < 1e-12, "{r:?}");
    }

    #[test]
    fn cone_eta_terms_shrink() {
        let p = cone(100, 51);
        let f = p.field(|_, t| t);
        let sched: Vec<_> = [4.0, 16.0, 64.0].iter().map(|&n| (n, 10.0, 4.0)).collect();
        let t = cutoff_convergence(&p, &f, &sched, &Default::default()).unwrap();
        assert!(t.eta_monotone && t.eta_bound_holds, "{t:?}");
        assert!((t.decay_constant - 1.0).abs() < 1e-9);
        assert_eq!(t.zero_directions, 1);
        assert!(t.rows.iter().all(CutoffRow::split_holds));
    }
}
