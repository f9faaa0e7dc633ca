use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::local_lip_masked;
use crate::error::{Error, Result};
use crate::mmspace::{within, FiniteSpace};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareOptions {
    pub max_iterations: usize,
    /// Stop when the quotient changes by at most this relative amount.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for PoincareOptions {
    fn default() -> Self {
        Self { max_iterations: 5000, tolerance: 1e-12, seed: 0x5eed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareReport {
    pub center: usize,
    pub radius: f64,
    pub lambda: f64,
    #[serde(rename = "C_P")]
    pub c_p: f64,
    /// Top eigenvalue of the quadratic edge-energy surrogate; bounds `C_P` from above.
    pub quadratic_bound: f64,
    pub iterations: usize,
    pub gradient_proxy: String,
    /// Points of the dilated ball, increasing.
    pub support: Vec<usize>,
    /// Extremal field on `support`.
    pub extremal: Vec<f64>,
}

/// Ball geometry shared by the estimator and the checker.
struct Balls {
    inner: Vec<bool>,
    outer: Vec<bool>,
    support: Vec<usize>,
    inner_mass: f64,
}

fn balls(space: &FiniteSpace, center: usize, radius: f64, lambda: f64) -> Result<Balls> {
    if center >= space.len() {
        return Err(Error::IndexOutOfRange { index: center, len: space.len() });
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidArgument(format!("ball radius {radius} must be positive")));
    }
    if !(lambda.is_finite() && lambda >= 1.0) {
        return Err(Error::InvalidArgument(format!("dilation {lambda} must be at least 1")));
    }
    let row = space.distance_row(center);
    let inner: Vec<bool> = row.iter().map(|&d| within(d, radius)).collect();
    let outer: Vec<bool> = row.iter().map(|&d| within(d, lambda * radius)).collect();
    let support = (0..space.len()).filter(|&i| outer[i]).collect();
    let mu = space.measure();
    let inner_mass = (0..space.len()).filter(|&i| inner[i]).map(|i| mu[i]).sum();
    Ok(Balls { inner, outer, support, inner_mass })
}

/// `⨍_B |u - u_B|² dμ`.
fn averaged_variance(mu: &[f64], inner: &[bool], u: &[f64], mass: f64) -> f64 {
    let mean = (0..u.len()).filter(|&i| inner[i]).map(|i| u[i] * mu[i]).sum::<f64>() / mass;
    (0..u.len()).filter(|&i| inner[i]).map(|i| (u[i] - mean).powi(2) * mu[i]).sum::<f64>() / mass
}

/// The Poincaré quotient of a full-space field `u`, with `lip` taken on the
/// subgraph induced by the dilated ball.
pub fn poincare_quotient(space: &FiniteSpace, center: usize, radius: f64, lambda: f64, u: &[f64]) -> Result<f64> {
    let b = balls(space, center, radius, lambda)?;
    Ok(quotient_on(space, &b, radius, u))
}

fn quotient_on(space: &FiniteSpace, b: &Balls, radius: f64, u: &[f64]) -> f64 {
    let mu = space.measure();
    let num = averaged_variance(mu, &b.inner, u, b.inner_mass);
    let lip = local_lip_masked(space, u, &b.outer);
    let den: f64 = b.support.iter().map(|&i| lip[i] * lip[i] * mu[i]).sum::<f64>() * radius * radius;
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Weighted edge Laplacian on the dilated ball, in local indices.
///
/// `uᵀKu = Σ_e w_e (u_a - u_b)²` with `w_e = (μ_a/deg a + μ_b/deg b) / ℓ²`,
/// degrees taken in the whole space. Averaging squared edge slopes instead of
/// taking their maximum makes this a lower bound for `∫ lip(u)² dμ`.
struct EdgeEnergy {
    edges: Vec<(usize, usize, f64)>,
    n: usize,
}

impl EdgeEnergy {
    fn new(space: &FiniteSpace, support: &[usize]) -> Self {
        let mut local = vec![usize::MAX; space.len()];
        for (k, &i) in support.iter().enumerate() {
            local[i] = k;
        }
        let mu = space.measure();
        let mut edges = Vec::new();
        for &a in support {
            for (b, len) in space.neighbors(a) {
                if a < b && local[b] != usize::MAX {
                    let w = (mu[a] / space.degree(a) as f64 + mu[b] / space.degree(b) as f64) / (len * len);
                    edges.push((local[a], local[b], w));
                }
            }
        }
        Self { edges, n: support.len() }
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(a, b, w) in &self.edges {
            let d = w * (u[a] - u[b]);
            out[a] += d;
            out[b] -= d;
        }
    }

    fn energy(&self, u: &[f64]) -> f64 {
        self.edges.iter().map(|&(a, b, w)| w * (u[a] - u[b]).powi(2)).sum()
    }

    /// Conjugate gradients for `K y = rhs` on the complement of constants.
    fn solve(&self, rhs: &[f64], y: &mut [f64]) {
        let n = self.n;
        remove_mean(y);
        let mut ky = vec![0.0; n];
        self.apply(y, &mut ky);
        let mut r: Vec<f64> = rhs.iter().zip(&ky).map(|(b, k)| b - k).collect();
        remove_mean(&mut r);
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        let stop = 1e-28 * dot(rhs, rhs).max(f64::MIN_POSITIVE);
        let mut kp = vec![0.0; n];
        for _ in 0..(20 * n).max(100) {
            if rr <= stop {
                break;
            }
            self.apply(&p, &mut kp);
            let pkp = dot(&p, &kp);
            if pkp <= 0.0 {
                break;
            }
            let alpha = rr / pkp;
            for i in 0..n {
                y[i] += alpha * p[i];
                r[i] -= alpha * kp[i];
            }
            remove_mean(&mut r);
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
        }
        remove_mean(y);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Averaged-variance operator on the inner ball, in local indices:
/// `A = (diag μ_B - μ_B μ_Bᵀ / μ(B)) / μ(B)`.
fn apply_variance(mu_local: &[f64], inner_local: &[bool], mass: f64, u: &[f64], out: &mut [f64]) {
    let mean: f64 = (0..u.len()).filter(|&i| inner_local[i]).map(|i| mu_local[i] * u[i]).sum::<f64>() / mass;
    for i in 0..u.len() {
        out[i] = if inner_local[i] { mu_local[i] * (u[i] - mean) / mass } else { 0.0 };
    }
}

/// Estimate the (2,2)-Poincaré constant of `B(center, radius)` with dilation `lambda`.
///
/// Power iteration `v ← K⁺Av` finds the top generalized eigenvector of the
/// quadratic surrogate; the reported constant is the exact `lip`-quotient of that vector.
pub fn poincare_constant(
    space: &FiniteSpace,
    center: usize,
    radius: f64,
    lambda: f64,
    opts: &PoincareOptions,
) -> Result<PoincareReport> {
    let b = balls(space, center, radius, lambda)?;
    if b.support.len() < 2 || b.inner.iter().filter(|&&x| x).count() < 2 {
        return Err(Error::InvalidArgument("ball must contain at least two points".into()));
    }
    let m = b.support.len();
    let mu = space.measure();
    let mu_local: Vec<f64> = b.support.iter().map(|&i| mu[i]).collect();
    let inner_local: Vec<bool> = b.support.iter().map(|&i| b.inner[i]).collect();
    let k = EdgeEnergy::new(space, &b.support);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let row = space.distance_row(b.support[0]);
    let scale = row[*b.support.last().unwrap()].max(radius);
    let mut v: Vec<f64> = b.support.iter().map(|&i| row[i] + 1e-3 * scale * rng.random_range(-1.0..1.0)).collect();
    remove_mean(&mut v);

    let quadratic = |v: &[f64], av: &mut [f64]| {
        apply_variance(&mu_local, &inner_local, b.inner_mass, v, av);
        let num = dot(v, av);
        let den = k.energy(v) * radius * radius;
        num / den
    };

    let mut av = vec![0.0; m];
    let mut q = quadratic(&v, &mut av);
    let mut next = v.clone();
    for it in 1..=opts.max_iterations {
        k.solve(&av, &mut next);
        let norm = dot(&next, &next).sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidArgument("extremal iterate collapsed to a constant".into()));
        }
        next.iter_mut().for_each(|x| *x /= norm);
        v.copy_from_slice(&next);
        let q_new = quadratic(&v, &mut av);
        let done = (q_new - q).abs() <= opts.tolerance * q_new.abs();
        q = q_new;
        if done {
            let mut full = vec![0.0; space.len()];
            for (k_idx, &i) in b.support.iter().enumerate() {
                full[i] = v[k_idx];
            }
            let c_p = quotient_on(space, &b, radius, &full);
            return Ok(PoincareReport {
                center,
                radius,
                lambda,
                c_p,
                quadratic_bound: q,
                iterations: it,
                gradient_proxy: "lip".into(),
                support: b.support,
                extremal: v,
            });
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iterations, last_quotient: q, last_iterate: v })
}

impl PoincareReport {
    /// Extremal field extended by zero to the whole space.
    pub fn extremal_field(&self, n: usize) -> Vec<f64> {
        let mut full = vec![0.0; n];
        for (k, &i) in self.support.iter().enumerate() {
            full[i] = self.extremal[k];
        }
        full
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - C_P · rhs`.
    pub residual: f64,
    pub holds: bool,
}

/// Both sides of `⨍_B |u - u_B|² <= C_P rad² ∫_{λB} g²` for a given pair.
pub fn poincare_check(
    space: &FiniteSpace,
    u: &[f64],
    g: &[f64],
    center: usize,
    radius: f64,
    lambda: f64,
    c_p: f64,
) -> Result<PoincareCheck> {
    if let Some(i) = g.iter().position(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("gradient is negative at point {i}")));
    }
    let b = balls(space, center, radius, lambda)?;
    let mu = space.measure();
    let lhs = averaged_variance(mu, &b.inner, u, b.inner_mass);
    let rhs = radius * radius * b.support.iter().map(|&i| g[i] * g[i] * mu[i]).sum::<f64>();
    let residual = lhs - c_p * rhs;
    Ok(PoincareCheck { lhs, rhs, residual, holds: residual <= 1e-12 * (lhs + c_p * rhs) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::local_lip;
    use approx::assert_relative_eq;

    #[test]
    fn constant_field_has_zero_quotient() {
        let s = FiniteSpace::interval(1.0, 21).unwrap();
        assert_eq!(poincare_quotient(&s, 10, 0.5, 1.0, &[2.0; 21]).unwrap(), 0.0);
    }

    #[test]
    fn interval_constant_near_four_over_pi_squared() {
        let s = FiniteSpace::interval(1.0, 201).unwrap();
        let rep = poincare_constant(&s, 100, 0.5, 1.0, &PoincareOptions::default()).unwrap();
        let target = 4.0 / std::f64::consts::PI.powi(2);
        assert_relative_eq!(rep.c_p, target, max_relative = 0.05);
        assert!(rep.c_p <= rep.quadratic_bound * (1.0 + 1e-9));
        let again = poincare_quotient(&s, 100, 0.5, 1.0, &rep.extremal_field(s.len())).unwrap();
        assert_relative_eq!(again, rep.c_p, max_relative = 1e-9);
    }

    #[test]
    fn dilation_does_not_increase() {
        let s = FiniteSpace::interval(1.0, 301).unwrap();
        let opts = PoincareOptions::default();
        let one = poincare_constant(&s, 150, 0.1, 1.0, &opts).unwrap();
        let two = poincare_constant(&s, 150, 0.1, 2.0, &opts).unwrap();
        assert!(two.quadratic_bound <= one.quadratic_bound * (1.0 + 1e-9));
        assert!(two.c_p <= one.c_p * (1.0 + 1e-6), "{} > {}", two.c_p, one.c_p);
    }

    #[test]
    fn iteration_cap_reports_last_iterate() {
        let s = FiniteSpace::interval(1.0, 51).unwrap();
        let opts = PoincareOptions { max_iterations: 1, tolerance: 0.0, seed: 1 };
        match poincare_constant(&s, 25, 0.5, 1.0, &opts) {
            Err(Error::NoConvergence { last_iterate, .. }) => assert_eq!(last_iterate.len(), 51),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn check_examples() {
        let s = FiniteSpace::interval(1.0, 201).unwrap();
        let rep = poincare_constant(&s, 100, 0.5, 1.0, &PoincareOptions::default()).unwrap();
        let u = s.coordinates();
        let g = local_lip(&s, &u);
        assert!(poincare_check(&s, &u, &g, 100, 0.5, 1.0, rep.c_p).unwrap().holds);
        let c = vec![1.0; s.len()];
        let chk = poincare_check(&s, &c, &g, 100, 0.5, 1.0, rep.c_p).unwrap();
        assert!(chk.holds && chk.residual <= 0.0);
        let zero = vec![0.0; s.len()];
        assert!(!poincare_check(&s, &u, &zero, 100, 0.5, 1.0, rep.c_p).unwrap().holds);
    }
}
