use serde::{Deserialize, Serialize};

use crate::calculus::{bl_gradient, local_lip, partial_lips};
use crate::corpus::CorpusField;
use crate::error::{Error, Result};
use crate::products::ProductSpace;

use super::interior_mask;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioOptions {
    /// Points whose denominator is below `floor_fraction · max` are skipped.
    pub floor_fraction: f64,
    /// Boundary exclusion in multiples of `h` per factor.
    pub interior_margin: f64,
    pub tolerance: f64,
}

impl Default for RatioOptions {
    fn default() -> Self {
        Self { floor_fraction: 0.1, interior_margin: 2.0, tolerance: 0.05 }
    }
}

/// `lip` on the product graph, expanded back to pairs.
fn product_lip(product: &ProductSpace, f: &[f64]) -> Result<Vec<f64>> {
    let q = product.to_quotient(f)?;
    let lip = local_lip(product.graph(), &q);
    Ok(product.class_of().iter().map(|&c| lip[c]).collect())
}

fn selected(product: &ProductSpace, denom: &[f64], regular: Option<&[bool]>, opts: &RatioOptions) -> Vec<bool> {
    let mut mask = interior_mask(product, opts.interior_margin);
    if let Some(r) = regular {
        mask.iter_mut().zip(r).for_each(|(m, r)| *m &= *r);
    }
    let max = denom.iter().zip(&mask).filter(|(_, m)| **m).map(|(d, _)| *d).fold(0.0, f64::max);
    let floor = opts.floor_fraction * max;
    denom.iter().zip(&mask).map(|(d, m)| *m && *d > floor && *d > 0.0).collect()
}

fn check_len<T>(product: &ProductSpace, f: &[T]) -> Result<()> {
    if f.len() != product.pair_count() {
        return Err(Error::LengthMismatch { expected: product.pair_count(), got: f.len() });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaLipReport {
    pub checked: usize,
    /// `max lip² / (lip_X² + lip_Y²)`.
    pub max_ratio: f64,
    pub min_ratio: f64,
    /// Pairs with ratio above `4 + tolerance`.
    pub violations: Vec<usize>,
    pub holds: bool,
}

/// `r = lip_{X×Y}(f)² / (lip_X² + lip_Y²)` against the bound 4, optionally
/// restricted to the pairs flagged in `regular`.
pub fn lemma_lip_check(
    product: &ProductSpace,
    f: &[f64],
    regular: Option<&[bool]>,
    opts: &RatioOptions,
) -> Result<LemmaLipReport> {
    check_len(product, f)?;
    if let Some(r) = regular {
        check_len(product, r)?;
    }
    let lips = partial_lips(product, f);
    let full = product_lip(product, f)?;
    let denom: Vec<f64> = lips.x.iter().zip(&lips.y).map(|(a, b)| a.hypot(*b)).collect();
    let sel = selected(product, &denom, regular, opts);
    let (mut checked, mut max_ratio, mut min_ratio) = (0, 0.0f64, f64::INFINITY);
    let mut violations = Vec::new();
    for p in (0..f.len()).filter(|&p| sel[p]) {
        let r = (full[p] / denom[p]).powi(2);
        checked += 1;
        max_ratio = max_ratio.max(r);
        min_ratio = min_ratio.min(r);
        if r > 4.0 + opts.tolerance {
            violations.push(p);
        }
    }
    if checked == 0 {
        min_ratio = 0.0;
    }
    Ok(LemmaLipReport { checked, max_ratio, min_ratio, holds: violations.is_empty(), violations })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<usize>,
    pub underflow: usize,
    pub overflow: usize,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, width: f64) -> Self {
        let bins = ((hi - lo) / width).round() as usize;
        Self { lo, width, counts: vec![0; bins], underflow: 0, overflow: 0 }
    }

    pub fn add(&mut self, v: f64) {
        if v < self.lo {
            self.underflow += 1;
            return;
        }
        let i = ((v - self.lo) / self.width).floor() as usize;
        match self.counts.get_mut(i) {
            Some(c) => *c += 1,
            None => self.overflow += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum::<usize>() + self.underflow + self.overflow
    }
}

/// Which constant the measured `max ρ` stays within.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum C0Regime {
    /// `max ρ <= 2`, the square root of the splitting factor.
    WithinLemmaFactor,
    /// `2 < max ρ <= 4`.
    WithinProofFactor,
    ExceedsBoth,
}

impl C0Regime {
    pub fn classify(c0: f64, tol: f64) -> Self {
        if c0 <= 2.0 + tol {
            Self::WithinLemmaFactor
        } else if c0 <= 4.0 + tol {
            Self::WithinProofFactor
        } else {
            Self::ExceedsBoth
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSandwich {
    pub name: String,
    pub smooth: bool,
    pub checked: usize,
    pub min_rho: f64,
    pub max_rho: f64,
    /// `max (|Df|_BL - lip)` over checked points.
    pub max_lower_gap: f64,
    pub lower_holds: bool,
    pub upper_holds: bool,
    /// `max ρ <= 1 + tol`; only meaningful for smooth fields.
    pub sharp_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub fields: Vec<FieldSandwich>,
    pub min_rho: f64,
    /// Empirical `C₀`.
    pub max_rho: f64,
    pub regime: C0Regime,
    pub histogram: Histogram,
    pub lower_holds: bool,
    pub upper_holds: bool,
    pub sharp_holds: bool,
}

impl SandwichReport {
    pub fn all(&self) -> bool {
        self.lower_holds && self.upper_holds && self.sharp_holds
    }
}

/// `ρ = lip_{X×Y}(f) / |Df|_BL` at interior points above the denominator floor.
pub fn sandwich_report(product: &ProductSpace, fields: &[CorpusField], opts: &RatioOptions) -> Result<SandwichReport> {
    let mut histogram = Histogram::new(0.5, 2.5, 0.05);
    let mut out = Vec::with_capacity(fields.len());
    for field in fields {
        check_len(product, &field.values)?;
        check_len(product, &field.regular)?;
        let bl = bl_gradient(product, &field.values)?;
        let lip = product_lip(product, &field.values)?;
        let sel = selected(product, &bl, Some(&field.regular), opts);
        let (mut checked, mut lo, mut hi, mut gap) = (0, f64::INFINITY, 0.0f64, f64::NEG_INFINITY);
        for p in (0..bl.len()).filter(|&p| sel[p]) {
            let rho = lip[p] / bl[p];
            histogram.add(rho);
            checked += 1;
            lo = lo.min(rho);
            hi = hi.max(rho);
            gap = gap.max(bl[p] - lip[p]);
        }
        if checked == 0 {
            return Err(Error::InvalidArgument(format!("field {} has no points above the floor", field.name)));
        }
        out.push(FieldSandwich {
            name: field.name.clone(),
            smooth: field.smooth,
            checked,
            min_rho: lo,
            max_rho: hi,
            max_lower_gap: gap,
            lower_holds: lo >= 1.0 - opts.tolerance,
            upper_holds: hi <= 2.0 + opts.tolerance,
            sharp_holds: !field.smooth || hi <= 1.0 + opts.tolerance,
        });
    }
    let min_rho = out.iter().map(|f| f.min_rho).fold(f64::INFINITY, f64::min);
    let max_rho = out.iter().map(|f| f.max_rho).fold(0.0, f64::max);
    Ok(SandwichReport {
        regime: C0Regime::classify(max_rho, opts.tolerance),
        lower_holds: out.iter().all(|f| f.lower_holds),
        upper_holds: out.iter().all(|f| f.upper_holds),
        sharp_holds: out.iter().all(|f| f.sharp_holds),
        fields: out,
        min_rho,
        max_rho,
        histogram,
    })
}
