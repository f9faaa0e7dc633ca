use mms_core::analysis::{doubling_report, measure_doubling, metric_doubling, verify_doubling_remark};
use mms_core::FiniteSpace;

/// `max μ(B(x,2r))/μ(B(x,r))` on a uniform path of `n` points by index arithmetic.
fn brute_force_interval(n: usize, radius_steps: &[usize]) -> f64 {
    let count = |x: usize, s: usize| (x + s).min(n - 1) - x.saturating_sub(s) + 1;
    let mut best: f64 = 1.0;
    for x in 0..n {
        for &s in radius_steps {
            best = best.max(count(x, 2 * s) as f64 / count(x, s) as f64);
        }
    }
    best
}

#[test]
fn interval_measure_doubling_matches_brute_force() {
    let n = 501;
    let s = FiniteSpace::interval(1.0, n).unwrap();
    let steps: Vec<usize> = (4..=250).collect();
    let radii: Vec<f64> = steps.iter().map(|&j| j as f64 * s.h()).collect();
    let oracle = brute_force_interval(n, &steps);
    let est = measure_doubling(&s, &radii).unwrap();
    assert!((est.value - oracle).abs() < 1e-12, "{} vs {oracle}", est.value);
    assert!((oracle - 2.0).abs() <= 0.05 * 2.0);
}

#[test]
fn circle_doubling_and_remark() {
    let s = FiniteSpace::circle(1.0, 400).unwrap();
    let steps: Vec<usize> = (4..=97).step_by(3).collect();
    let radii: Vec<f64> = steps.iter().map(|&j| j as f64 * s.h()).collect();
    // On a circle every center sees the same ball sizes while 2r stays below half the length.
    let oracle = steps.iter().map(|&j| (4 * j + 1) as f64 / (2 * j + 1) as f64).fold(0.0, f64::max);
    let est = measure_doubling(&s, &radii).unwrap();
    assert!((est.value - oracle).abs() < 1e-12);
    let c = metric_doubling(&s, &radii).unwrap();
    assert!(c.value >= 2.0 && c.value <= 3.0, "{}", c.value);
    let rep = doubling_report(&s, &radii).unwrap();
    assert!(verify_doubling_remark(&rep).holds);
}
