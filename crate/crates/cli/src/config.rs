use std::fs;
use std::path::{Path, PathBuf};

use mms_core::corpus::NamedField;
use mms_core::mmspace::io::SpaceSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Relative paths resolve against the config file's directory.
    pub output_dir: PathBuf,
    pub x: SpaceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<SpaceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product: Option<ProductConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub analyses: Analyses,
}

fn default_seed() -> u64 {
    0x5eed
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProductConfig {
    Cartesian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stencil: Option<(usize, usize)>,
    },
    Warped {
        warp: WarpConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stencil: Option<(usize, usize)>,
    },
}

impl ProductConfig {
    pub fn stencil(&self) -> Option<(usize, usize)> {
        match self {
            Self::Cartesian { stencil } | Self::Warped { stencil, .. } => *stencil,
        }
    }
}

/// Warp functions of the base coordinate, with `w_d = w_m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WarpConfig {
    Constant {
        value: f64,
    },
    /// `scale · t`
    Linear {
        scale: f64,
    },
    /// `t^exponent`
    Power {
        exponent: f64,
    },
    /// Explicit values per base point.
    Values {
        w_d: Vec<f64>,
        w_m: Vec<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Continuum comparisons.
    pub relative: f64,
    /// Algebraic identities.
    pub algebraic: f64,
    /// Boundary exclusion in multiples of `h`.
    pub boundary: f64,
    /// Ratio denominators below this fraction of their maximum are skipped.
    pub floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { relative: 0.05, algebraic: 1e-9, boundary: 2.0, floor: 0.1 }
    }
}

/// Pair fields selectable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldChoice {
    Sum,
    Product,
    SinCos,
    AbsDiff,
    /// `f(x, t) = t`
    Base,
    /// `f(x, t) = t cos x`
    BaseCos,
    Zero,
}

impl FieldChoice {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sum => NamedField::Sum.name(),
            Self::Product => NamedField::Product.name(),
            Self::SinCos => NamedField::SinCos.name(),
            Self::AbsDiff => NamedField::AbsDiff.name(),
            Self::Base => "t",
            Self::BaseCos => "t*cos(x)",
            Self::Zero => "0",
        }
    }

    pub fn eval(self, x: f64, t: f64) -> f64 {
        match self {
            Self::Sum => NamedField::Sum.eval(x, t),
            Self::Product => NamedField::Product.eval(x, t),
            Self::SinCos => NamedField::SinCos.eval(x, t),
            Self::AbsDiff => NamedField::AbsDiff.eval(x, t),
            Self::Base => t,
            Self::BaseCos => t * x.cos(),
            Self::Zero => 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Analyses {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub doubling: Option<DoublingConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poincare: Option<PoincareConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cubes: Option<CubesConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calculus: Option<CalculusConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sandwich: Option<SandwichConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub splitting: Option<SandwichConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<SmoothingConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient: Option<GradientConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoffs: Option<CutoffsConfig>,
}

impl Analyses {
    pub fn any(&self) -> bool {
        self.doubling.is_some()
            || self.poincare.is_some()
            || self.cubes.is_some()
            || self.calculus.is_some()
            || self.sandwich.is_some()
            || self.splitting.is_some()
            || self.smoothing.is_some()
            || self.gradient.is_some()
            || self.cutoffs.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoublingConfig {
    /// Explicit radii; when empty, `radius_count` geometric radii are used.
    pub radii: Vec<f64>,
    pub radius_count: usize,
}

impl Default for DoublingConfig {
    fn default() -> Self {
        Self { radii: Vec::new(), radius_count: 12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareConfig {
    /// Balls as `(center, radius)` on `x`.
    pub balls: Vec<(usize, f64)>,
    #[serde(default = "one")]
    pub lambda: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubesConfig {
    pub ks: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalculusConfig {
    /// Random field pairs per space.
    pub pairs: usize,
}

impl Default for CalculusConfig {
    fn default() -> Self {
        Self { pairs: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SandwichConfig {
    /// Seeded random tensor sums added to the named fields.
    pub random_fields: usize,
}

impl Default for SandwichConfig {
    fn default() -> Self {
        Self { random_fields: 6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingConfig {
    pub ks: Vec<f64>,
    #[serde(default)]
    pub random_fields: usize,
    /// Largest accepted X-energy ratio for `k >= 8`.
    #[serde(default = "x_energy_factor")]
    pub x_energy_factor: f64,
    /// Accepted interval for the error slope.
    #[serde(default = "slope_window")]
    pub slope_window: (f64, f64),
}

fn x_energy_factor() -> f64 {
    1.2
}

fn slope_window() -> (f64, f64) {
    (-1.3, -0.7)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientConfig {
    pub field: FieldChoice,
    /// Expected value of `|Df|_BL` on the checked points.
    pub expected: f64,
    /// Only base points with `t >= min_base` are checked.
    #[serde(default)]
    pub min_base: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffsConfig {
    pub field: FieldChoice,
    /// Rows `(n, m, k)`.
    pub schedule: Vec<(f64, f64, f64)>,
    #[serde(default)]
    pub x0: usize,
    #[serde(default)]
    pub t0: usize,
    #[serde(default = "decay_cap")]
    pub decay_cap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_separation: Option<f64>,
    /// Largest accepted relative residual of the `c / ln n` fit.
    #[serde(default = "fit_tolerance")]
    pub fit_tolerance: f64,
}

fn decay_cap() -> f64 {
    100.0
}

fn fit_tolerance() -> f64 {
    0.2
}

impl ScenarioConfig {
    /// Read a config and resolve its relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|source| ConfigError::Json { path: path.into(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.x.rebase(base);
        if let Some(y) = cfg.y.as_mut() {
            y.rebase(base);
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    /// Problems that would stop a run; empty when the scenario is valid.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (label, spec) in [("x", Some(&self.x)), ("y", self.y.as_ref())] {
            let Some(spec) = spec else { continue };
            if let Some(f) = spec.file() {
                if !f.exists() {
                    out.push(format!("{label}: file {} does not exist", f.display()));
                }
            }
            match spec {
                SpaceSpec::Interval { length, n, .. } | SpaceSpec::Circle { length, n, .. } => {
                    if !(*length > 0.0) {
                        out.push(format!("{label}: length must be positive"));
                    }
                    if *n < 2 {
                        out.push(format!("{label}: needs at least 2 points"));
                    }
                }
                _ => {}
            }
        }
        let t = &self.tolerances;
        for (name, v) in
            [("relative", t.relative), ("algebraic", t.algebraic), ("boundary", t.boundary), ("floor", t.floor)]
        {
            if !(v >= 0.0 && v.is_finite()) {
                out.push(format!("tolerances.{name} must be finite and nonnegative"));
            }
        }
        let a = &self.analyses;
        let needs_product = |name: &str, out: &mut Vec<String>| {
            if self.y.is_none() || self.product.is_none() {
                out.push(format!("analyses.{name} needs `y` and `product`"));
            }
        };
        if let Some(d) = &a.doubling {
            if d.radii.is_empty() && d.radius_count == 0 {
                out.push("analyses.doubling: radius grid is empty".into());
            }
            if d.radii.iter().any(|r| !(*r > 0.0)) {
                out.push("analyses.doubling: radii must be positive".into());
            }
        }
        if let Some(p) = &a.poincare {
            if p.balls.is_empty() {
                out.push("analyses.poincare: ball list is empty".into());
            }
            if !(p.lambda >= 1.0) {
                out.push("analyses.poincare: lambda must be at least 1".into());
            }
        }
        if let Some(c) = &a.cubes {
            check_ks("cubes", &c.ks, &mut out);
        }
        if let Some(c) = &a.calculus {
            if c.pairs == 0 {
                out.push("analyses.calculus: pairs must be positive".into());
            }
        }
        if a.sandwich.is_some() {
            needs_product("sandwich", &mut out);
        }
        if a.splitting.is_some() {
            needs_product("splitting", &mut out);
            if matches!(self.product, Some(ProductConfig::Warped { .. })) {
                out.push("analyses.splitting needs a cartesian product".into());
            }
        }
        if let Some(s) = &a.smoothing {
            needs_product("smoothing", &mut out);
            check_ks("smoothing", &s.ks, &mut out);
        }
        if a.gradient.is_some() {
            needs_product("gradient", &mut out);
        }
        if let Some(c) = &a.cutoffs {
            needs_product("cutoffs", &mut out);
            if c.schedule.is_empty() {
                out.push("analyses.cutoffs: schedule is empty".into());
            }
            if c.schedule.iter().any(|&(n, m, k)| !(n > 1.0 && m > 0.0 && k > 0.0)) {
                out.push("analyses.cutoffs: rows need n > 1, m > 0, k > 0".into());
            }
        }
        if let Some(ProductConfig::Warped { warp: WarpConfig::Values { w_d, w_m }, .. }) = &self.product {
            if w_d.len() != w_m.len() {
                out.push("product.warp: w_d and w_m differ in length".into());
            }
        }
        out
    }
}

fn check_ks(name: &str, ks: &[f64], out: &mut Vec<String>) {
    if ks.is_empty() {
        out.push(format!("analyses.{name}: k list is empty"));
    }
    if ks.iter().any(|k| !(*k > 0.0)) {
        out.push(format!("analyses.{name}: k values must be positive"));
    }
    if ks.windows(2).any(|w| !(w[1] > w[0])) {
        out.push(format!("analyses.{name}: k values must increase strictly"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> ScenarioConfig {
        serde_json::from_str(r#"{"name":"m","output_dir":"out","x":{"type":"interval","length":1,"n":5}}"#).unwrap()
    }

    #[test]
    fn minimal_config_is_valid() {
        let c = minimal();
        assert!(c.diagnostics().is_empty());
        assert_eq!(c.seed, 0x5eed);
        assert!(!c.analyses.any());
    }

    #[test]
    fn product_analyses_need_a_product() {
        let mut c = minimal();
        c.analyses.sandwich = Some(SandwichConfig::default());
        assert_eq!(c.diagnostics().len(), 1);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let r: Result<ScenarioConfig, _> =
            serde_json::from_str(r#"{"name":"m","output_dir":"o","x":{"type":"interval","length":1,"n":5},"bogus":1}"#);
        assert!(r.is_err());
    }

    #[test]
    fn missing_file_is_diagnosed() {
        let mut c = minimal();
        c.x = SpaceSpec::PathFile { path: "/nonexistent/p.txt".into(), total_mass: None };
        assert!(c.diagnostics()[0].contains("does not exist"));
    }

    #[test]
    fn k_lists_must_increase() {
        let mut out = Vec::new();
        check_ks("t", &[4.0, 4.0], &mut out);
        assert_eq!(out.len(), 1);
    }
}
