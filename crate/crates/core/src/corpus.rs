//! Seeded test fields: named closed forms and random tensor sums.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mmspace::{within, Continuum, FiniteSpace};
use crate::products::ProductSpace;
use crate::tensorize::TensorSumField;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedField {
    /// `x + t`
    Sum,
    /// `x · t`
    Product,
    /// `sin(2πx) cos(2πt)`
    SinCos,
    /// `|x - t|`
    AbsDiff,
}

impl NamedField {
    pub const ALL: [NamedField; 4] = [Self::Sum, Self::Product, Self::SinCos, Self::AbsDiff];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sum => "x+t",
            Self::Product => "x*t",
            Self::SinCos => "sin(2pi x)cos(2pi t)",
            Self::AbsDiff => "|x-t|",
        }
    }

    pub fn eval(self, x: f64, t: f64) -> f64 {
        match self {
            Self::Sum => x + t,
            Self::Product => x * t,
            Self::SinCos => (2.0 * PI * x).sin() * (2.0 * PI * t).cos(),
            Self::AbsDiff => (x - t).abs(),
        }
    }

    pub fn is_smooth(self) -> bool {
        !matches!(self, Self::AbsDiff)
    }
}

/// One random factor on `[0, len]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Factor {
    Trig {
        amplitude: f64,
        frequency: u32,
        phase: f64,
    },
    /// Linear interpolation of `values` at equally spaced knots; the first and
    /// last knots agree for periodic factors.
    PiecewiseLinear {
        values: Vec<f64>,
    },
}

impl Factor {
    pub fn random(rng: &mut ChaCha8Rng, periodic: bool) -> Self {
        if rng.random_bool(0.5) {
            Self::Trig {
                amplitude: rng.random_range(0.5..1.5),
                frequency: rng.random_range(1..=3),
                phase: rng.random_range(0.0..2.0 * PI),
            }
        } else {
            let knots = rng.random_range(3..=6);
            let mut values: Vec<f64> = (0..=knots).map(|_| rng.random_range(-1.0..1.0)).collect();
            if periodic {
                values[knots] = values[0];
            }
            Self::PiecewiseLinear { values }
        }
    }

    /// Positions in `[0, len)` where the factor is not differentiable.
    pub fn kinks(&self, len: f64, periodic: bool) -> Vec<f64> {
        match self {
            Self::Trig { .. } => Vec::new(),
            Self::PiecewiseLinear { values } => {
                let segs = values.len() - 1;
                let first = if periodic { 0 } else { 1 };
                (first..segs).map(|i| len * i as f64 / segs as f64).collect()
            }
        }
    }

    /// Value at `s ∈ [0, len]`.
    pub fn eval(&self, s: f64, len: f64) -> f64 {
        let u = (s / len).clamp(0.0, 1.0);
        match self {
            Self::Trig { amplitude, frequency, phase } => amplitude * (2.0 * PI * *frequency as f64 * u + phase).sin(),
            Self::PiecewiseLinear { values } => {
                let segs = values.len() - 1;
                let pos = u * segs as f64;
                let i = (pos.floor() as usize).min(segs - 1);
                let frac = pos - i as f64;
                values[i] * (1.0 - frac) + values[i + 1] * frac
            }
        }
    }
}

/// Continuum extent used to scale factor arguments: circle circumference,
/// interval length, or the largest coordinate for file spaces.
fn extent(coords: &[f64], space: &FiniteSpace) -> f64 {
    match space.continuum() {
        Continuum::Interval { length } | Continuum::Circle { length } => length,
        Continuum::File => coords.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE),
    }
}

/// Points of a factor farther than `reach` from every kink.
fn clear_of(coords: &[f64], kinks: &[f64], len: f64, periodic: bool, reach: f64) -> Vec<bool> {
    coords
        .iter()
        .map(|&s| {
            kinks.iter().all(|&k| {
                let d = (s - k).abs();
                let d = if periodic { d.min(len - d) } else { d };
                !within(d, reach)
            })
        })
        .collect()
}

/// Random tensor sum with `terms` factor pairs, and the pairs whose stencil
/// neighborhood avoids every factor kink. Factors on circles are periodic.
pub fn random_tensor_sum(product: &ProductSpace, terms: usize, rng: &mut ChaCha8Rng) -> (TensorSumField, Vec<bool>) {
    let (xs, ys) = (product.x(), product.y());
    let (cx, cy) = (xs.coordinates(), ys.coordinates());
    let (lx, ly) = (extent(&cx, xs), extent(&cy, ys));
    let periodic = |s: &FiniteSpace| matches!(s.continuum(), Continuum::Circle { .. });
    let (px, py) = (periodic(xs), periodic(ys));
    let (rx, ry) = product.stencil();
    let mut h = Vec::with_capacity(terms);
    let mut g = Vec::with_capacity(terms);
    let (mut kx, mut ky) = (Vec::new(), Vec::new());
    for _ in 0..terms {
        let fy = Factor::random(rng, py);
        let fx = Factor::random(rng, px);
        h.push(cy.iter().map(|&t| fy.eval(t, ly)).collect());
        g.push(cx.iter().map(|&x| fx.eval(x, lx)).collect());
        ky.extend(fy.kinks(ly, py));
        kx.extend(fx.kinks(lx, px));
    }
    let okx = clear_of(&cx, &kx, lx, px, rx as f64 * xs.h());
    let oky = clear_of(&cy, &ky, ly, py, ry as f64 * ys.h());
    let ny = ys.len();
    let regular = (0..product.pair_count()).map(|p| okx[p / ny] && oky[p % ny]).collect();
    (TensorSumField::new(h, g).expect("nonempty sum"), regular)
}

/// A named corpus field on the pairs of a product.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusField {
    pub name: String,
    pub smooth: bool,
    pub values: Vec<f64>,
    /// Pairs away from the kinks of piecewise-linear factors.
    pub regular: Vec<bool>,
}

/// The four named fields followed by `random` seeded tensor sums with 1 to 3 terms.
pub fn corpus(product: &ProductSpace, seed: u64, random: usize) -> Vec<CorpusField> {
    let mut out: Vec<CorpusField> = NamedField::ALL
        .iter()
        .map(|&nf| CorpusField {
            name: nf.name().into(),
            smooth: nf.is_smooth(),
            values: product.field(|x, t| nf.eval(x, t)),
            regular: vec![true; product.pair_count()],
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..random {
        let terms = 1 + i % 3;
        let (tf, regular) = random_tensor_sum(product, terms, &mut rng);
        out.push(CorpusField {
            name: format!("tensor_sum_{i}_n{terms}"),
            smooth: false,
            values: tf.eval(product),
            regular,
        });
    }
    out
}

/// Random fields on one space: smooth trigonometric sums plus noise-free piecewise-linear pieces.
pub fn random_fields(space: &FiniteSpace, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let coords = space.coordinates();
    let len = extent(&coords, space);
    let periodic = matches!(space.continuum(), Continuum::Circle { .. });
    (0..count)
        .map(|_| {
            let f = Factor::random(rng, periodic);
            let shift = rng.random_range(-1.0..1.0);
            coords.iter().map(|&s| f.eval(s, len) + shift).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::products::ProductOptions;

    #[test]
    fn seeded_corpus_is_reproducible() {
        let a = FiniteSpace::interval(1.0, 12).unwrap();
        let p = ProductSpace::cartesian(&a, &a, &ProductOptions::default()).unwrap();
        let c1 = corpus(&p, 7, 3);
        let c2 = corpus(&p, 7, 3);
        assert_eq!(c1, c2);
        assert_eq!(c1.len(), 7);
        assert_ne!(corpus(&p, 8, 3)[4].values, c1[4].values);
    }

    #[test]
    fn periodic_factors_close_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let f = Factor::random(&mut rng, true);
            assert!((f.eval(0.0, 2.0) - f.eval(2.0, 2.0)).abs() < 1e-12);
        }
    }
}
