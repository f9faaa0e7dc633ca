use std::f64::consts::PI;

use mms_core::calculus::bl_gradient;
use mms_core::products::{ProductOptions, ProductSpace, WarpSpec};
use mms_core::FiniteSpace;

fn cone() -> ProductSpace {
    let x = FiniteSpace::circle(2.0 * PI, 400).unwrap();
    let y = FiniteSpace::interval(1.0, 200).unwrap();
    let w = WarpSpec::from_fn(&y, |t| t).unwrap();
    ProductSpace::warped(&x, &y, w, &ProductOptions::default()).unwrap()
}

/// Flat disk chord between two points given in polar coordinates.
fn chord(r1: f64, r2: f64, dtheta: f64) -> f64 {
    let a = dtheta.rem_euclid(2.0 * PI);
    let a = a.min(2.0 * PI - a);
    (r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * a.cos()).max(0.0).sqrt()
}

#[test]
fn cone_is_the_unit_disk() {
    let p = cone();
    let rim = 199;
    assert!((p.distance((0, 0), (0, rim)) - 1.0).abs() <= 0.02);
    let row = p.graph_distances_from((0, rim));
    let step = 2.0 * PI / 400.0;
    for j in 1..=16 {
        let g = (12.5 * j as f64).round() as usize;
        let d = row[p.class_of()[p.pair(g, rim)]];
        let oracle = chord(1.0, 1.0, g as f64 * step);
        assert!((d - oracle).abs() <= 0.02 * oracle, "gap {g}: {d} vs {oracle}");
    }
    let mass: f64 = p.pair_measure().iter().sum();
    let oracle: f64 = {
        let y = p.y();
        let (cy, my) = (y.coordinates(), y.measure());
        cy.iter().zip(my).map(|(t, dt)| t * dt).sum::<f64>() * 2.0 * PI
    };
    assert!((mass - PI).abs() <= 0.01 * PI, "{mass}");
    assert!((mass - oracle).abs() <= 1e-9 * oracle);
}

#[test]
fn interior_distances_follow_chords() {
    let p = cone();
    let y = p.y().coordinates();
    let from = (37, 120);
    let row = p.graph_distances_from(from);
    let step = 2.0 * PI / 400.0;
    for &(x, t) in &[(37, 60), (100, 150), (237, 120), (300, 199), (5, 30)] {
        let d = row[p.class_of()[p.pair(x, t)]];
        let oracle = chord(y[from.1], y[t], (x as f64 - from.0 as f64) * step);
        assert!((d - oracle).abs() <= 0.02 * oracle.max(0.1), "({x},{t}): {d} vs {oracle}");
    }
}

#[test]
fn linear_field_has_unit_gradient() {
    let p = cone();
    let f = p.field(|theta, t| t * theta.cos());
    let g = bl_gradient(&p, &f).unwrap();
    let y = p.y().coordinates();
    let ny = y.len();
    for (q, v) in g.iter().enumerate() {
        let t = q % ny;
        if y[t] >= 0.2 && t < ny - 2 {
            assert!((v - 1.0).abs() <= 0.05, "t = {}: {v}", y[t]);
        }
    }
}
