use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mms_core::analysis::{default_radii, doubling_report, poincare_constant, verify_doubling_remark, PoincareOptions};
use mms_core::calculus::bl_gradient;
use mms_core::calculus::identities::{
    averaged_sublinearity, lower_semicontinuity, metric_comparison, product_rule, sublinearity, truncation,
    InequalityReport,
};
use mms_core::corpus::{corpus, random_fields, CorpusField, NamedField};
use mms_core::cubes::{build_cubes, check_partition, partition_of_unity};
use mms_core::mmspace::io::build_space;
use mms_core::products::{ProductOptions, ProductSpace, WarpSpec};
use mms_core::tensorize::{
    convergence_experiment, cube_average, cutoff_convergence, interior_mask, lemma_lip_check,
    neighbor_difference_check, sandwich_report, smooth, telescoping_check, CutoffOptions, RatioOptions,
};
use mms_core::{FiniteSpace, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{
    CalculusConfig, CubesConfig, CutoffsConfig, DoublingConfig, GradientConfig, PoincareConfig, ProductConfig,
    SandwichConfig, ScenarioConfig, SmoothingConfig, WarpConfig,
};
use crate::report::{AnalysisOutcome, Check, ExperimentReport, PlotData};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("space `{label}`: {source}")]
    Space { label: String, source: mms_core::Error },
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

type Outcome = Result<(Vec<Check>, Value), String>;

struct Context<'a> {
    cfg: &'a ScenarioConfig,
    spaces: Vec<(&'static str, FiniteSpace)>,
    product: Option<Result<ProductSpace, String>>,
    report: ExperimentReport,
    plots: PlotData,
    tables: Vec<(String, Vec<u8>)>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Output { path: path.into(), source }
}

fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        match c {
            '+' => out.push_str("_plus_"),
            '-' => out.push_str("_minus_"),
            '*' => out.push_str("_times_"),
            '|' => out.push_str("_abs_"),
            c if c.is_ascii_alphanumeric() => out.push(c),
            _ => out.push('_'),
        }
    }
    let mut s = String::new();
    for part in out.split('_').filter(|p| !p.is_empty()) {
        if !s.is_empty() {
            s.push('_');
        }
        s.push_str(part);
    }
    s
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

pub fn build_product(cfg: &ProductConfig, x: &FiniteSpace, y: &FiniteSpace) -> mms_core::Result<ProductSpace> {
    let opts = ProductOptions { stencil: cfg.stencil(), ..Default::default() };
    match cfg {
        ProductConfig::Cartesian { .. } => ProductSpace::cartesian(x, y, &opts),
        ProductConfig::Warped { warp, .. } => {
            let w = match warp {
                WarpConfig::Constant { value } => WarpSpec::constant(y, *value)?,
                WarpConfig::Linear { scale } => WarpSpec::from_fn(y, |t| scale * t)?,
                WarpConfig::Power { exponent } => WarpSpec::from_fn(y, |t| t.powf(*exponent))?,
                WarpConfig::Values { w_d, w_m } => WarpSpec::new(y, w_d.clone(), w_m.clone())?,
            };
            ProductSpace::warped(x, y, w, &opts)
        }
    }
}

/// Execute every enabled analysis and persist the outputs.
pub fn run(cfg: &ScenarioConfig) -> Result<ExperimentReport, RunError> {
    let problems = cfg.diagnostics();
    if !problems.is_empty() {
        return Err(crate::config::ConfigError::Invalid(problems).into());
    }
    let mut spaces = vec![("x", build_space(&cfg.x).map_err(|source| RunError::Space { label: "x".into(), source })?)];
    if let Some(y) = &cfg.y {
        spaces.push(("y", build_space(y).map_err(|source| RunError::Space { label: "y".into(), source })?));
    }
    let mut ctx = Context {
        cfg,
        spaces,
        product: None,
        report: ExperimentReport::new(cfg.clone()),
        plots: PlotData::default(),
        tables: Vec::new(),
    };
    let a = &cfg.analyses;
    if let Some(c) = &a.doubling {
        ctx.per_space("doubling", |ctx, label, s| ctx.doubling(label, s, c));
    }
    if let Some(c) = &a.poincare {
        let x = ctx.spaces[0].1.clone();
        ctx.timed("poincare[x]", |ctx| ctx.poincare(&x, c));
    }
    if let Some(c) = &a.cubes {
        ctx.per_space("cubes", |ctx, label, s| ctx.cubes(label, s, c));
    }
    if let (Some(pc), Some((_, y))) = (&cfg.product, ctx.spaces.get(1)) {
        let t = Instant::now();
        ctx.product = Some(build_product(pc, &ctx.spaces[0].1, y).map_err(|e| e.to_string()));
        ctx.report.timings.insert("product".into(), t.elapsed().as_secs_f64());
    }
    if let Some(c) = &a.calculus {
        ctx.per_space("calculus", |ctx, _, s| ctx.calculus(s, c));
        if ctx.product.is_some() {
            ctx.with_product("calculus[product]", |ctx, p| ctx.averaged(p, c));
        }
    }
    if let Some(c) = &a.sandwich {
        ctx.with_product("sandwich", |ctx, p| ctx.sandwich(p, c));
    }
    if let Some(c) = &a.splitting {
        ctx.with_product("splitting", |ctx, p| ctx.splitting(p, c));
    }
    if let Some(c) = &a.smoothing {
        ctx.with_product("smoothing", |ctx, p| ctx.smoothing(p, c));
    }
    if let Some(c) = &a.gradient {
        ctx.with_product("gradient", |ctx, p| ctx.gradient(p, c));
    }
    if let Some(c) = &a.cutoffs {
        ctx.with_product("cutoffs", |ctx, p| ctx.cutoffs(p, c));
    }
    ctx.persist()?;
    Ok(ctx.report)
}

impl Context<'_> {
    fn timed(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Outcome) {
        let t = Instant::now();
        let outcome = match f(self) {
            Ok((checks, result)) => AnalysisOutcome::Ok { checks, result },
            Err(message) => AnalysisOutcome::Error { message },
        };
        self.report.record(name, outcome, t.elapsed().as_secs_f64());
    }

    fn per_space(&mut self, name: &str, mut f: impl FnMut(&mut Self, &str, &FiniteSpace) -> Outcome) {
        for i in 0..self.spaces.len() {
            let (label, space) = (self.spaces[i].0, self.spaces[i].1.clone());
            self.timed(&format!("{name}[{label}]"), |ctx| f(ctx, label, &space));
        }
    }

    fn with_product(&mut self, name: &str, f: impl FnOnce(&mut Self, &ProductSpace) -> Outcome) {
        let product = self.product.take();
        self.timed(name, |ctx| match &product {
            Some(Ok(p)) => f(ctx, p),
            Some(Err(e)) => Err(format!("product construction failed: {e}")),
            None => Err("scenario has no product".into()),
        });
        self.product = product;
    }

    fn constant(&mut self, key: String, v: f64) {
        self.report.constants.insert(key, v);
    }

    fn doubling(&mut self, label: &str, s: &FiniteSpace, c: &DoublingConfig) -> Outcome {
        let radii = if c.radii.is_empty() { default_radii(s, c.radius_count) } else { c.radii.clone() };
        let rep = doubling_report(s, &radii).map_err(|e| e.to_string())?;
        let remark = verify_doubling_remark(&rep);
        self.constant(format!("D[{label}]"), rep.d);
        self.constant(format!("C[{label}]"), rep.c);
        let checks = vec![Check::new("C <= D^4", remark.holds, remark.slack, "slack >= 0")];
        Ok((checks, json!({ "report": to_value(&rep), "remark": to_value(&remark) })))
    }

    fn poincare(&mut self, x: &FiniteSpace, c: &PoincareConfig) -> Outcome {
        let mut results = Vec::new();
        let mut checks = Vec::new();
        let mut worst: f64 = 0.0;
        for &(center, radius) in &c.balls {
            let rep = poincare_constant(
                x,
                center,
                radius,
                c.lambda,
                &PoincareOptions { seed: self.cfg.seed, ..Default::default() },
            )
            .map_err(|e| e.to_string())?;
            checks.push(Check::new(
                format!("C_P <= quadratic bound at ({center}, {radius})"),
                rep.c_p <= rep.quadratic_bound * (1.0 + 1e-9),
                [rep.c_p, rep.quadratic_bound],
                "first <= second",
            ));
            worst = worst.max(rep.c_p);
            let mut v = to_value(&rep);
            if let Some(o) = v.as_object_mut() {
                o.remove("extremal");
                o.remove("support");
            }
            results.push(v);
        }
        self.constant("C_P[x]".into(), worst);
        Ok((checks, Value::Array(results)))
    }

    fn cubes(&mut self, label: &str, s: &FiniteSpace, c: &CubesConfig) -> Outcome {
        let metric = match self.report.constants.get(&format!("C[{label}]")) {
            Some(&c) => c,
            None => doubling_report(s, &default_radii(s, 12)).map_err(|e| e.to_string())?.c,
        };
        let mut rows = Vec::new();
        let mut checks = Vec::new();
        let mut c1: f64 = 0.0;
        let mut lips = Vec::new();
        for &k in &c.ks {
            let p = build_cubes(s, k).map_err(|e| e.to_string())?;
            let pc = check_partition(s, &p, metric);
            let pou = partition_of_unity(s, &p).map_err(|e| e.to_string())?;
            let sum_dev =
                pou.weights.iter().map(|w| (w.iter().map(|e| e.1).sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
            c1 = c1.max(pou.c1);
            lips.push((k, pou.lipschitz.iter().copied().fold(0.0, f64::max)));
            checks.push(Check::new(format!("partition invariants at k = {k}"), pc.all(), to_value(&pc), "all hold"));
            checks.push(Check::new(format!("sum of chi at k = {k}"), sum_dev <= 1e-12, sum_dev, "<= 1e-12"));
            rows.push(json!({
                "k": k,
                "cubes": p.len(),
                "check": to_value(&pc),
                "sum_deviation": sum_dev,
                "c1": pou.c1,
                "max_terms": pou.max_terms(),
                "inner_ball_deviation": pou.inner_ball_deviation,
            }));
        }
        let worst = lips.iter().map(|(k, l)| l / (c1 * k)).fold(0.0, f64::max);
        checks.push(Check::new("chi Lipschitz <= c1 k", worst <= 1.0 + 1e-12, [c1, worst], "single c1 across k"));
        self.constant(format!("c1[{label}]"), c1);
        Ok((checks, json!({ "metric_doubling": metric, "c1": c1, "scales": rows })))
    }

    fn calculus(&mut self, s: &FiniteSpace, c: &CalculusConfig) -> Outcome {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let fields = random_fields(s, 2 * c.pairs, &mut rng);
        let (mut pr, mut sl, mut tr, mut ls, mut mc) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut hypotheses = true;
        for pair in fields.chunks(2) {
            let (f, g) = (&pair[0], &pair[1]);
            pr.push(product_rule(s, f, g));
            let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            sl.push(sublinearity(s, f, g, a, b));
            let top = f.iter().map(|v| v.abs()).fold(0.0, f64::max);
            tr.push(truncation(s, f, rng.random_range(0.0..=top)));
            let approx: Vec<Vec<f64>> =
                (1..=5).map(|n| f.iter().zip(g).map(|(a, e)| a + e / (n * n) as f64).collect()).collect();
            ls.push(lower_semicontinuity(s, f, &approx));
            let edges: Vec<_> = s.edges().map(|(a, b, l)| (a, b, l * rng.random_range(0.5..2.0))).collect();
            let s2 = FiniteSpace::from_edges(s.measure().to_vec(), &edges).map_err(|e| e.to_string())?;
            let l = s.edges().zip(s2.edges()).map(|(a, b)| a.2 / b.2).fold(0.0, f64::max);
            let cmp = metric_comparison(s, &s2, f, l, 1.0).map_err(|e| e.to_string())?;
            hypotheses &= cmp.metric_hypothesis && cmp.measure_hypothesis;
            mc.push(cmp.conclusion);
        }
        let suites = [
            InequalityReport::merge("product_rule", &pr),
            InequalityReport::merge("sublinearity", &sl),
            InequalityReport::merge("truncation", &tr),
            InequalityReport::merge("lower_semicontinuity", &ls),
            InequalityReport::merge("metric_comparison", &mc),
        ];
        let mut checks: Vec<Check> =
            suites.iter().map(|r| Check::new(&r.name, r.holds, r.violations, "0 violations")).collect();
        checks.push(Check::new("metric comparison hypotheses", hypotheses, hypotheses, "true"));
        Ok((checks, json!({ "pairs": c.pairs, "suites": to_value(&suites) })))
    }

    fn averaged(&mut self, p: &ProductSpace, c: &CalculusConfig) -> Outcome {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ 0xa5a5);
        let fields = corpus(p, self.cfg.seed, c.pairs);
        let ny = p.y().len();
        let mut reports = Vec::new();
        for f in &fields {
            let subset: Vec<usize> = (0..ny).filter(|_| rng.random_bool(0.3)).collect();
            let subset = if subset.is_empty() { vec![rng.random_range(0..ny)] } else { subset };
            reports.push(averaged_sublinearity(p, &f.values, &subset).map_err(|e| e.to_string())?);
        }
        let merged = InequalityReport::merge("averaged_sublinearity", &reports);
        let checks = vec![Check::new(&merged.name, merged.holds, merged.violations, "0 violations")];
        Ok((checks, to_value(&merged)))
    }

    fn ratio_options(&self) -> RatioOptions {
        let t = &self.cfg.tolerances;
        RatioOptions { floor_fraction: t.floor, interior_margin: t.boundary, tolerance: t.relative }
    }

    fn sandwich(&mut self, p: &ProductSpace, c: &SandwichConfig) -> Outcome {
        let fields = corpus(p, self.cfg.seed, c.random_fields);
        let rep = sandwich_report(p, &fields, &self.ratio_options()).map_err(|e| e.to_string())?;
        let tol = self.cfg.tolerances.relative;
        let mut checks = Vec::new();
        for f in &rep.fields {
            checks.push(Check::new(
                format!("{}: min rho >= 1 - tol", f.name),
                f.lower_holds,
                f.min_rho,
                format!(">= {}", 1.0 - tol),
            ));
            checks.push(Check::new(
                format!("{}: max rho <= 2 + tol", f.name),
                f.upper_holds,
                f.max_rho,
                format!("<= {}", 2.0 + tol),
            ));
            if f.smooth {
                checks.push(Check::new(
                    format!("{}: max rho <= 1 + tol", f.name),
                    f.sharp_holds,
                    f.max_rho,
                    format!("<= {}", 1.0 + tol),
                ));
            }
        }
        self.constant("C0".into(), rep.max_rho);
        let (lo, w) = (rep.histogram.lo, rep.histogram.width);
        for (i, &n) in rep.histogram.counts.iter().enumerate() {
            self.plots.push("rho_histogram", lo + i as f64 * w, n as f64);
        }
        Ok((checks, to_value(&rep)))
    }

    fn splitting(&mut self, p: &ProductSpace, c: &SandwichConfig) -> Outcome {
        let fields = corpus(p, self.cfg.seed, c.random_fields);
        let opts = self.ratio_options();
        let mut checks = Vec::new();
        let mut rows = Vec::new();
        for f in &fields {
            let r = lemma_lip_check(p, &f.values, Some(&f.regular), &opts).map_err(|e| e.to_string())?;
            checks.push(Check::new(
                format!("{}: max r <= 4 + tol", f.name),
                r.holds,
                r.max_ratio,
                format!("<= {}", 4.0 + opts.tolerance),
            ));
            if f.name == NamedField::SinCos.name() {
                checks.push(Check::new(
                    format!("{}: max r <= 1 + tol", f.name),
                    r.max_ratio <= 1.0 + opts.tolerance,
                    r.max_ratio,
                    format!("<= {}", 1.0 + opts.tolerance),
                ));
            }
            rows.push(json!({
                "field": f.name,
                "checked": r.checked,
                "max_ratio": r.max_ratio,
                "min_ratio": r.min_ratio,
                "violations": r.violations.len(),
            }));
        }
        Ok((checks, Value::Array(rows)))
    }

    fn smoothing(&mut self, p: &ProductSpace, c: &SmoothingConfig) -> Outcome {
        let fields = corpus(p, self.cfg.seed, c.random_fields);
        let (lo, hi) = c.slope_window;
        let alg = self.cfg.tolerances.algebraic;
        let mut checks = Vec::new();
        let mut rows = Vec::new();
        let mut k_y: f64 = 0.0;
        for (i, f) in fields.iter().enumerate() {
            let table = convergence_experiment(p, &f.values, &c.ks).map_err(|e| e.to_string())?;
            let slope = table.slope.unwrap_or(f64::NAN);
            checks.push(Check::new(
                format!("{}: error slope", f.name),
                slope >= lo && slope <= hi,
                slope,
                format!("in [{lo}, {hi}]"),
            ));
            let x_worst = table
                .rows
                .iter()
                .zip(&table.x_energy_ratio)
                .filter(|(r, _)| r.k >= 8.0)
                .map(|(_, x)| *x)
                .fold(0.0, f64::max);
            checks.push(Check::new(
                format!("{}: X-energy ratio for k >= 8", f.name),
                x_worst <= c.x_energy_factor,
                x_worst,
                format!("<= {}", c.x_energy_factor),
            ));
            checks.push(Check::new(
                format!("{}: Y-energy bounded uniformly", f.name),
                table.y_energy_uniform,
                [table.y_energy_constant, table.y_growth_exponent],
                "growth exponent <= 0.5",
            ));
            k_y = k_y.max(table.y_energy_constant);
            let mut csv = Vec::new();
            table.write_csv(&mut csv).expect("write to memory");
            self.tables.push((format!("smoothing_{}.csv", slug(&f.name)), csv));
            for r in &table.rows {
                self.plots.push(&format!("l2_error:{}", f.name), r.k, r.l2_error);
            }
            if i == 0 || !f.smooth {
                checks.extend(self.smoothing_identities(p, f, &c.ks, alg)?);
            }
            rows.push(json!({ "field": f.name, "table": to_value(&table) }));
        }
        self.constant("K_y".into(), k_y);
        Ok((checks, Value::Array(rows)))
    }

    fn smoothing_identities(
        &self,
        p: &ProductSpace,
        f: &CorpusField,
        ks: &[f64],
        tol: f64,
    ) -> Result<Vec<Check>, String> {
        let mut checks = Vec::new();
        for &k in ks {
            let part = build_cubes(p.y(), k).map_err(|e| e.to_string())?;
            let pou = partition_of_unity(p.y(), &part).map_err(|e| e.to_string())?;
            let avg = cube_average(p, &f.values, &part).map_err(|e| e.to_string())?;
            let (sm, _) = smooth(p, &f.values, &part, &pou).map_err(|e| e.to_string())?;
            let tel = telescoping_check(p, &sm.values, &pou, &avg, 500, self.cfg.seed, tol);
            let nd = neighbor_difference_check(p, &f.values, &part, &avg).map_err(|e| e.to_string())?;
            checks.push(Check::new(
                format!("{}: Jensen at k = {k}", f.name),
                avg.jensen_holds,
                avg.jensen_ratio,
                "<= 1",
            ));
            checks.push(Check::new(
                format!("{}: telescoping at k = {k}", f.name),
                tel.holds,
                tel.max_residual,
                format!("<= {tol}"),
            ));
            checks.push(Check::new(
                format!("{}: neighbor differences at k = {k}", f.name),
                nd.holds,
                [nd.max_ratio, nd.c],
                "ratio <= 1",
            ));
        }
        Ok(checks)
    }

    fn gradient(&mut self, p: &ProductSpace, c: &GradientConfig) -> Outcome {
        let f = p.field(|x, t| c.field.eval(x, t));
        let g = bl_gradient(p, &f).map_err(|e| e.to_string())?;
        let mask = interior_mask(p, self.cfg.tolerances.boundary);
        let cy = p.y().coordinates();
        let ny = cy.len();
        let tol = self.cfg.tolerances.relative * c.expected.abs().max(f64::MIN_POSITIVE);
        let (mut checked, mut worst) = (0usize, 0.0f64);
        for q in (0..g.len()).filter(|&q| mask[q] && cy[q % ny] >= c.min_base) {
            checked += 1;
            worst = worst.max((g[q] - c.expected).abs());
        }
        let mut csv = Vec::new();
        ScalarField::with_len(g.len(), g).map_err(|e| e.to_string())?.write_csv(&mut csv).map_err(|e| e.to_string())?;
        self.tables.push((format!("gradient_{}.csv", slug(c.field.name())), csv));
        let checks = vec![Check::new(
            format!("|D{}|_BL = {}", c.field.name(), c.expected),
            checked > 0 && worst <= tol,
            worst,
            format!("max deviation <= {tol}"),
        )];
        Ok((checks, json!({ "field": c.field.name(), "checked": checked, "max_deviation": worst })))
    }

    fn cutoffs(&mut self, p: &ProductSpace, c: &CutoffsConfig) -> Outcome {
        let f = p.field(|x, t| c.field.eval(x, t));
        let opts = CutoffOptions { x0: c.x0, t0: c.t0, zero_separation: c.zero_separation, decay_cap: c.decay_cap };
        let table = cutoff_convergence(p, &f, &c.schedule, &opts).map_err(|e| e.to_string())?;
        let residual = table.fit_residual.unwrap_or(0.0);
        let mut checks = vec![
            Check::new("eta term nonincreasing", table.eta_monotone, table.eta_monotone, "true"),
            Check::new(
                "eta term fits c / ln n",
                residual <= c.fit_tolerance,
                [table.fit_c.unwrap_or(0.0), residual],
                format!("residual <= {}", c.fit_tolerance),
            ),
            Check::new(
                "eta term within bound",
                table.eta_bound_holds,
                table.eta_bound_holds,
                "eta_term^2 <= eta_bound",
            ),
        ];
        let split = table.rows.iter().all(|r| r.split_holds());
        checks.push(Check::new("error split into four terms", split, split, "bl_error <= sum of terms"));
        self.constant("C_decay".into(), table.decay_constant);
        let mut csv = Vec::new();
        table.write_csv(&mut csv).expect("write to memory");
        self.tables.push(("cutoffs.csv".into(), csv));
        for r in &table.rows {
            self.plots.push("eta_term", r.n, r.eta_term);
            self.plots.push("bl_error", r.n, r.bl_error);
        }
        Ok((checks, to_value(&table)))
    }

    fn persist(&mut self) -> Result<(), RunError> {
        let dir = &self.cfg.output_dir;
        let tables = dir.join("tables");
        fs::create_dir_all(&tables).map_err(io_err(&tables))?;
        for (name, bytes) in &self.tables {
            let path = tables.join(name);
            fs::write(&path, bytes).map_err(io_err(&path))?;
        }
        if !self.plots.is_empty() {
            let path = dir.join("plot_data.csv");
            self.plots.write(&path).map_err(io_err(&path))?;
        }
        let path = dir.join("report.json");
        let json = self.report.to_json().map_err(|e| RunError::Output { path: path.clone(), source: e.into() })?;
        fs::write(&path, json + "\n").map_err(io_err(&path))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs_are_file_safe() {
        assert_eq!(slug("sin(2pi x)cos(2pi t)"), "sin_2pi_x_cos_2pi_t");
        assert_eq!(slug("|x-t|"), "abs_x_minus_t_abs");
        assert_ne!(slug("x+t"), slug("x*t"));
    }
}
