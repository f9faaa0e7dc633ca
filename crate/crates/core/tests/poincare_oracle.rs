use mms_core::analysis::{poincare_constant, poincare_quotient, PoincareOptions};
use mms_core::FiniteSpace;
use nalgebra::{DMatrix, SymmetricEigen};

const N: usize = 501;
const CENTER: usize = 250;
const RADIUS: f64 = 0.5;

// Dense reference values for interval(1, 501), whole-space ball, λ = 1.
const PINNED_QUADRATIC: f64 = 0.406_908_785_409_832_1;
const PINNED_C_P: f64 = 0.405_290_901_575_597_8;

/// Smallest nonzero `θ` of `K v = θ M v` with `M = diag(μ)/μ(B)`, and its eigenvector.
fn dense_surrogate(space: &FiniteSpace) -> (f64, Vec<f64>) {
    let n = space.len();
    let mu = space.measure();
    let mass: f64 = mu.iter().sum();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for (a, b, len) in space.edges() {
        let w = (mu[a] / space.degree(a) as f64 + mu[b] / space.degree(b) as f64) / (len * len);
        k[(a, a)] += w;
        k[(b, b)] += w;
        k[(a, b)] -= w;
        k[(b, a)] -= w;
    }
    let s: Vec<f64> = mu.iter().map(|m| (mass / m).sqrt()).collect();
    let sym = DMatrix::from_fn(n, n, |i, j| s[i] * k[(i, j)] * s[j]);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let idx = order[1];
    let v = (0..n).map(|i| s[i] * eig.eigenvectors[(i, idx)]).collect();
    (eig.eigenvalues[idx], v)
}

#[test]
fn dense_oracle_matches_pinned_values() {
    let s = FiniteSpace::interval(1.0, N).unwrap();
    let (theta, v) = dense_surrogate(&s);
    let quadratic = 1.0 / (theta * RADIUS * RADIUS);
    let c_p = poincare_quotient(&s, CENTER, RADIUS, 1.0, &v).unwrap();
    println!("dense quadratic bound {quadratic:.16}, lip quotient {c_p:.16}");
    assert!((quadratic - PINNED_QUADRATIC).abs() < 1e-9);
    assert!((c_p - PINNED_C_P).abs() < 1e-9);
}

#[test]
fn power_iteration_reproduces_pinned_values() {
    let s = FiniteSpace::interval(1.0, N).unwrap();
    let rep = poincare_constant(&s, CENTER, RADIUS, 1.0, &PoincareOptions::default()).unwrap();
    assert!((rep.quadratic_bound - PINNED_QUADRATIC).abs() < 1e-6 * PINNED_QUADRATIC);
    assert!((rep.c_p - PINNED_C_P).abs() < 1e-6 * PINNED_C_P);
    let target = 4.0 / std::f64::consts::PI.powi(2);
    assert!((rep.c_p - target).abs() < 0.05 * target);
}
