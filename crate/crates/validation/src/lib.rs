//! The acceptance criteria of the workspace, each evaluated at its pinned tolerance.

use std::f64::consts::PI;
use std::time::Instant;

use mms_cli::{run, ScenarioConfig};
use mms_core::analysis::{
    default_radii, doubling_report, measure_doubling, poincare_constant, verify_doubling_remark, PoincareOptions,
};
use mms_core::calculus::bl_gradient;
use mms_core::calculus::identities::{
    averaged_sublinearity, lower_semicontinuity, metric_comparison, product_rule, sublinearity, truncation,
    InequalityReport,
};
use mms_core::corpus::{corpus, random_fields, NamedField};
use mms_core::cubes::{build_cubes, check_partition, partition_of_unity};
use mms_core::mmspace::io::path_graph;
use mms_core::products::{ProductOptions, ProductSpace, WarpSpec};
use mms_core::tensorize::{
    convergence_experiment, cutoff_convergence, interior_mask, lemma_lip_check, sandwich_report, CutoffOptions,
    RatioOptions,
};
use mms_core::FiniteSpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 24301;
const TOL: f64 = 0.05;
/// Whole-ball Poincaré constant on interval(1, 501), from a dense generalized eigensolve.
pub const PINNED_C_P: f64 = 0.4052909015755978;

pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

pub struct Criterion {
    pub name: &'static str,
    /// Wall-clock budget in seconds, when the criterion has one.
    pub budget: Option<f64>,
    pub check: fn() -> Outcome,
}

pub fn criteria() -> [Criterion; 11] {
    let c = |name, budget, check| Criterion { name, budget, check };
    [
        c("sandwich on the square", Some(60.0), sandwich),
        c("factor-4 splitting on the torus", Some(30.0), splitting),
        c("cube machinery", Some(20.0), cube_machinery),
        c("smoothing convergence", Some(120.0), smoothing),
        c("doubling remark", None, doubling),
        c("Poincare constant", None, poincare),
        c("warped cone geometry", Some(60.0), cone_geometry),
        c("BL gradient on the cone", None, cone_gradient),
        c("cutoff convergence", None, cutoffs),
        c("calculus identities", None, calculus),
        c("determinism", None, determinism),
    ]
}

/// Evaluate one criterion; exceeding its budget fails it.
pub fn run_criterion(c: &Criterion) -> Outcome {
    let t = Instant::now();
    let mut o = (c.check)();
    let secs = t.elapsed().as_secs_f64();
    match c.budget {
        Some(b) => {
            o.passed &= secs < b;
            o.detail.push_str(&format!("; {secs:.2} s (budget {b} s)"));
        }
        None => o.detail.push_str(&format!("; {secs:.2} s")),
    }
    o
}

fn square(n: usize) -> ProductSpace {
    let a = FiniteSpace::interval(1.0, n).unwrap();
    ProductSpace::cartesian(&a, &a, &ProductOptions::default()).unwrap()
}

fn cone() -> ProductSpace {
    let x = FiniteSpace::circle(2.0 * PI, 400).unwrap();
    let y = FiniteSpace::interval(1.0, 200).unwrap();
    let w = WarpSpec::from_fn(&y, |t| t).unwrap();
    ProductSpace::warped(&x, &y, w, &ProductOptions::default()).unwrap()
}

fn sandwich() -> Outcome {
    let p = square(200);
    let fields = corpus(&p, SEED, 6);
    let r = sandwich_report(&p, &fields, &RatioOptions::default()).unwrap();
    let mut detail = format!("min rho {:.4}, max rho {:.4}, regime {:?}", r.min_rho, r.max_rho, r.regime);
    for f in r.fields.iter().filter(|f| !(f.lower_holds && f.upper_holds && f.sharp_holds)) {
        detail.push_str(&format!("; {} rho in [{:.4}, {:.4}]", f.name, f.min_rho, f.max_rho));
    }
    outcome(r.all(), detail)
}

fn splitting() -> Outcome {
    let c = FiniteSpace::circle(1.0, 200).unwrap();
    let p = ProductSpace::cartesian(&c, &c, &ProductOptions::default()).unwrap();
    let opts = RatioOptions::default();
    let (mut worst, mut sincos, mut ok) = (0.0f64, 0.0, true);
    for f in corpus(&p, SEED, 6) {
        let r = lemma_lip_check(&p, &f.values, Some(&f.regular), &opts).unwrap();
        ok &= r.holds;
        worst = worst.max(r.max_ratio);
        if f.name == NamedField::SinCos.name() {
            sincos = r.max_ratio;
        }
    }
    ok &= sincos <= 1.0 + TOL;
    outcome(ok, format!("max r {worst:.4} (<= {}), sin*cos max r {sincos:.4} (<= {})", 4.0 + TOL, 1.0 + TOL))
}

fn cube_machinery() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for s in [FiniteSpace::circle(1.0, 1000).unwrap(), FiniteSpace::interval(1.0, 1000).unwrap()] {
        let c = doubling_report(&s, &default_radii(&s, 12)).unwrap().c;
        let mut lips = Vec::new();
        let mut c1: f64 = 0.0;
        let mut sum_dev: f64 = 0.0;
        for k in [4.0, 8.0, 16.0, 32.0] {
            let p = build_cubes(&s, k).unwrap();
            ok &= check_partition(&s, &p, c).all();
            let pou = partition_of_unity(&s, &p).unwrap();
            for w in &pou.weights {
                sum_dev = sum_dev.max((w.iter().map(|e| e.1).sum::<f64>() - 1.0).abs());
            }
            c1 = c1.max(pou.c1);
            lips.push((k, pou.lipschitz.iter().copied().fold(0.0, f64::max)));
        }
        ok &= sum_dev <= 1e-12 && lips.iter().all(|(k, l)| *l <= c1 * k * (1.0 + 1e-12));
        detail.push(format!("{:?}: C {c}, c1 {c1:.4}, sum dev {sum_dev:.1e}", s.continuum()));
    }
    outcome(ok, detail.join("; "))
}

fn smoothing() -> Outcome {
    let p = square(200);
    let (mut ok, mut k_y) = (true, 0.0f64);
    let mut slopes = Vec::new();
    let mut x_worst: f64 = 0.0;
    for f in corpus(&p, SEED, 6) {
        let t = convergence_experiment(&p, &f.values, &[4.0, 8.0, 16.0, 32.0]).unwrap();
        let slope = t.slope.unwrap_or(f64::NAN);
        ok &= (-1.3..=-0.7).contains(&slope);
        let xr = t.rows.iter().zip(&t.x_energy_ratio).filter(|(r, _)| r.k >= 8.0).map(|(_, x)| *x).fold(0.0, f64::max);
        x_worst = x_worst.max(xr);
        ok &= xr <= 1.2 && t.y_energy_uniform;
        k_y = k_y.max(t.y_energy_constant);
        slopes.push(format!("{} {slope:.2}", f.name));
    }
    outcome(ok, format!("slopes [{}] (window [-1.3, -0.7]); max X ratio {x_worst:.3}; K {k_y:.3}", slopes.join(", ")))
}

/// `max μ(B(x,2r))/μ(B(x,r))` on a uniform path by index arithmetic.
fn brute_force_interval(n: usize, steps: &[usize]) -> f64 {
    let count = |x: usize, s: usize| (x + s).min(n - 1) - x.saturating_sub(s) + 1;
    let mut best: f64 = 1.0;
    for x in 0..n {
        for &s in steps {
            best = best.max(count(x, 2 * s) as f64 / count(x, s) as f64);
        }
    }
    best
}

fn doubling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let lengths: Vec<f64> = (0..300).map(|_| rng.random_range(0.5..2.0)).collect();
    let spaces = [
        FiniteSpace::interval(1.0, 200).unwrap(),
        FiniteSpace::circle(1.0, 200).unwrap(),
        FiniteSpace::interval(1.0, 501).unwrap(),
        FiniteSpace::interval(1.0, 1000).unwrap(),
        FiniteSpace::circle(1.0, 1000).unwrap(),
        FiniteSpace::circle(2.0 * PI, 400).unwrap(),
        path_graph(&lengths).unwrap(),
    ];
    let mut ok = true;
    let mut worst_slack = f64::INFINITY;
    for s in &spaces {
        let rep = doubling_report(s, &default_radii(s, 12)).unwrap();
        let rc = verify_doubling_remark(&rep);
        ok &= rc.holds;
        worst_slack = worst_slack.min(rc.slack);
    }
    let n = 501;
    let s = FiniteSpace::interval(1.0, n).unwrap();
    let steps: Vec<usize> = (4..=250).collect();
    let radii: Vec<f64> = steps.iter().map(|&j| j as f64 * s.h()).collect();
    let d = measure_doubling(&s, &radii).unwrap().value;
    let oracle = brute_force_interval(n, &steps);
    ok &= (d - oracle).abs() <= 1e-12 && (d - 2.0).abs() <= 0.05 * 2.0;
    outcome(
        ok,
        format!(
            "min D^4 - C slack {worst_slack:.3} over {} spaces; interval D {d:.4} (oracle {oracle:.4})",
            spaces.len()
        ),
    )
}

fn poincare() -> Outcome {
    let s = FiniteSpace::interval(1.0, 501).unwrap();
    let r = poincare_constant(&s, 250, 0.5, 1.0, &PoincareOptions::default()).unwrap();
    let target = 4.0 / (PI * PI);
    let ok = (r.c_p - target).abs() <= 0.05 * target && (r.c_p - PINNED_C_P).abs() <= 1e-6 * PINNED_C_P;
    outcome(ok, format!("C_P {:.6} vs 4/pi^2 {target:.6}, pinned {PINNED_C_P:.6}", r.c_p))
}

fn chord(dtheta: f64) -> f64 {
    2.0 * (dtheta / 2.0).sin()
}

fn cone_geometry() -> Outcome {
    let p = cone();
    let rim = p.y().len() - 1;
    let apex = p.distance((0, 0), (0, rim));
    let row = p.graph_distances_from((0, rim));
    let step = 2.0 * PI / p.x().len() as f64;
    let mut worst_gap: f64 = 0.0;
    for j in 1..=16 {
        let g = (12.5 * j as f64).round() as usize;
        let d = row[p.class_of()[p.pair(g, rim)]];
        let oracle = chord(g as f64 * step);
        worst_gap = worst_gap.max((d - oracle).abs() / oracle);
    }
    let mass: f64 = p.pair_measure().iter().sum();
    let (cy, my) = (p.y().coordinates(), p.y().measure().to_vec());
    let oracle_mass: f64 = cy.iter().zip(&my).map(|(t, dt)| t * dt).sum::<f64>() * 2.0 * PI;
    let ok = (apex - 1.0).abs() <= 0.02
        && worst_gap <= 0.02
        && (mass - PI).abs() <= 0.01 * PI
        && (mass - oracle_mass).abs() <= 1e-9 * oracle_mass;
    outcome(ok, format!("apex-rim {apex:.4}, worst chord error {:.2}%, mass {mass:.4} (pi {PI:.4})", 100.0 * worst_gap))
}

fn cone_gradient() -> Outcome {
    let p = cone();
    let f = p.field(|theta, t| t * theta.cos());
    let g = bl_gradient(&p, &f).unwrap();
    let mask = interior_mask(&p, 2.0);
    let y = p.y().coordinates();
    let ny = y.len();
    let (mut lo, mut hi, mut n) = (f64::INFINITY, 0.0f64, 0);
    for q in (0..g.len()).filter(|&q| mask[q] && y[q % ny] >= 0.2) {
        lo = lo.min(g[q]);
        hi = hi.max(g[q]);
        n += 1;
    }
    outcome(
        n > 0 && (lo - 1.0).abs() <= TOL && (hi - 1.0).abs() <= TOL,
        format!("|Df| in [{lo:.4}, {hi:.4}] over {n} points"),
    )
}

fn cutoffs() -> Outcome {
    let p = cone();
    let f = p.field(|_, t| t);
    let schedule: Vec<_> = [4.0, 16.0, 64.0, 256.0].iter().map(|&n| (n, 10.0, 4.0)).collect();
    let t = cutoff_convergence(&p, &f, &schedule, &CutoffOptions::default()).unwrap();
    let residual = t.fit_residual.unwrap_or(f64::INFINITY);
    let etas: Vec<String> = t.rows.iter().map(|r| format!("{:.4}", r.eta_term)).collect();
    let ok = t.eta_monotone && residual <= 0.2 && (t.decay_constant - 1.0).abs() <= 1e-9;
    outcome(
        ok,
        format!(
            "eta [{}], fit c {:.4} residual {:.1}%, decay C {}",
            etas.join(", "),
            t.fit_c.unwrap_or(f64::NAN),
            100.0 * residual,
            t.decay_constant
        ),
    )
}

fn calculus() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let spaces = [FiniteSpace::interval(1.0, 200).unwrap(), FiniteSpace::circle(1.0, 200).unwrap()];
    let mut suites: Vec<Vec<InequalityReport>> = vec![Vec::new(); 6];
    for s in &spaces {
        let fields = random_fields(s, 100, &mut rng);
        for pair in fields.chunks(2) {
            let (f, g) = (&pair[0], &pair[1]);
            suites[0].push(product_rule(s, f, g));
            suites[1].push(sublinearity(s, f, g, rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)));
            let top = f.iter().map(|v| v.abs()).fold(0.0, f64::max);
            suites[2].push(truncation(s, f, rng.random_range(0.0..=top)));
            let approx: Vec<Vec<f64>> =
                (1..=5).map(|n| f.iter().zip(g).map(|(a, e)| a + e / (n * n) as f64).collect()).collect();
            suites[3].push(lower_semicontinuity(s, f, &approx));
            let edges: Vec<_> = s.edges().map(|(a, b, l)| (a, b, l * rng.random_range(0.5..2.0))).collect();
            let s2 = FiniteSpace::from_edges(s.measure().to_vec(), &edges).unwrap();
            let l = s.edges().zip(s2.edges()).map(|(a, b)| a.2 / b.2).fold(0.0, f64::max);
            suites[4].push(metric_comparison(s, &s2, f, l, 1.0).unwrap().conclusion);
        }
    }
    let p = square(60);
    for f in corpus(&p, SEED, 46) {
        let subset: Vec<usize> = (0..60).filter(|_| rng.random_bool(0.3)).collect();
        suites[5].push(averaged_sublinearity(&p, &f.values, &subset).unwrap());
    }
    let names = ["product_rule", "sublinearity", "truncation", "lsc", "metric_comparison", "contsublin"];
    let merged: Vec<InequalityReport> = names.iter().zip(&suites).map(|(n, s)| InequalityReport::merge(n, s)).collect();
    let detail =
        merged.iter().map(|r| format!("{} {}/{}", r.name, r.checked - r.violations, r.checked)).collect::<Vec<_>>();
    outcome(merged.iter().all(|r| r.holds), detail.join(", "))
}

const DETERMINISM_SCENARIO: &str = r#"{
  "name": "determinism",
  "seed": 7,
  "output_dir": "out",
  "x": { "type": "interval", "length": 1.0, "n": 40 },
  "y": { "type": "circle", "length": 1.0, "n": 40 },
  "product": { "kind": "cartesian" },
  "analyses": {
    "doubling": {},
    "poincare": { "balls": [[20, 0.3]] },
    "cubes": { "ks": [2, 4] },
    "calculus": { "pairs": 10 },
    "sandwich": { "random_fields": 3 },
    "splitting": { "random_fields": 3 },
    "smoothing": { "ks": [2, 4], "random_fields": 2 }
  }
}"#;

/// Two runs under different thread counts, compared byte for byte up to the timing section.
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: ScenarioConfig = serde_json::from_str(DETERMINISM_SCENARIO).unwrap();
    cfg.output_dir = dir.path().join("out");
    let once = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let report = pool.install(|| run(&cfg)).unwrap();
        let text = std::fs::read_to_string(cfg.output_dir.join("report.json")).unwrap();
        let cut = text.find("\"timings\"").unwrap_or(text.len());
        (report.passed, text[..cut].to_string())
    };
    let (p1, a) = once(1);
    let (p2, b) = once(4);
    outcome(a == b && p1 == p2, format!("{} bytes before timings, identical {}", a.len(), a == b))
}
