use std::f64::consts::PI;

use mms_core::corpus::CorpusField;
use mms_core::cubes::{build_cubes, partition_of_unity};
use mms_core::products::{ProductOptions, ProductSpace, WarpSpec};
use mms_core::tensorize::*;
use mms_core::FiniteSpace;
use proptest::prelude::*;

fn square(n: usize) -> ProductSpace {
    let a = FiniteSpace::interval(1.0, n).unwrap();
    ProductSpace::cartesian(&a, &a, &ProductOptions::default()).unwrap()
}

fn mixed(nx: usize, ny: usize) -> ProductSpace {
    let x = FiniteSpace::circle(1.0, nx).unwrap();
    let y = FiniteSpace::interval(2.0, ny).unwrap();
    ProductSpace::cartesian(&x, &y, &ProductOptions::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn smoothing_fixes_t_independent_fields(g in prop::collection::vec(-5.0f64..5.0, 12), k in 1.0f64..7.0) {
        let p = mixed(12, 60);
        let f: Vec<f64> = (0..p.pair_count()).map(|q| g[q / 60]).collect();
        let part = build_cubes(p.y(), k).unwrap();
        let pou = partition_of_unity(p.y(), &part).unwrap();
        let (sm, avg) = smooth(&p, &f, &part, &pou).unwrap();
        prop_assert!(avg.jensen_holds);
        for (a, b) in sm.values.iter().zip(&f) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn telescoping_and_neighbor_bounds(vals in prop::collection::vec(-3.0f64..3.0, 10 * 50), k in 2.0f64..6.0, seed in any::<u64>()) {
        let p = mixed(10, 50);
        let part = build_cubes(p.y(), k).unwrap();
        let pou = partition_of_unity(p.y(), &part).unwrap();
        let (sm, avg) = smooth(&p, &vals, &part, &pou).unwrap();
        prop_assert!(avg.jensen_holds);
        prop_assert!(telescoping_check(&p, &sm.values, &pou, &avg, 200, seed, 1e-9).holds);
        let nd = neighbor_difference_check(&p, &vals, &part, &avg).unwrap();
        prop_assert!(nd.holds, "{:?}", nd);
    }

    #[test]
    fn cutoff_fields_respect_their_supports(n in 1.5f64..40.0, m in 0.2f64..3.0, x0 in 0usize..30, t0 in 0usize..41) {
        let x = FiniteSpace::circle(2.0 * PI, 30).unwrap();
        let y = FiniteSpace::interval(1.0, 41).unwrap();
        let w = WarpSpec::from_fn(&y, |t| t).unwrap();
        let p = ProductSpace::warped(&x, &y, w, &ProductOptions::default()).unwrap();
        let opts = CutoffOptions { x0, t0, ..Default::default() };
        let fam = build_cutoffs(&p, n, m, 4.0, &opts).unwrap();
        let (dx, dt) = (p.x().distance_row(x0), p.y().distance_row(t0));
        for (i, &s) in fam.sigma.iter().enumerate() {
            prop_assert!((0.0..=1.0).contains(&s));
            if dx[i] <= m - 1.0 { prop_assert_eq!(s, 1.0); }
            if dx[i] >= m { prop_assert_eq!(s, 0.0); }
        }
        for t in 0..41 {
            prop_assert!((0.0..=1.0).contains(&fam.eta[t]));
            prop_assert!(fam.psi[t] >= 0.0 && fam.psi[t] <= 1.0);
            if fam.zero_distance[t] <= 1.0 / n { prop_assert_eq!(fam.eta[t], 0.0); }
            if dt[t] <= n - 1.0 { prop_assert!((fam.psi[t] - 1.0).abs() < 1e-12); }
        }
    }
}

#[test]
fn smoothing_error_for_t_at_k10() {
    let p = square(200);
    let f = p.field(|_, t| t);
    let table = convergence_experiment(&p, &f, &[10.0]).unwrap();
    assert!(table.rows[0].l2_error <= 5.0 / 40.0 + p.y().h());
}

#[test]
fn sandwich_lower_gap_shrinks_under_refinement() {
    let gap = |n: usize| {
        let p = square(n);
        let f = CorpusField {
            name: "sincos".into(),
            smooth: true,
            values: p.field(|x, t| (2.0 * PI * x).sin() * (2.0 * PI * t).cos()),
            regular: vec![true; p.pair_count()],
        };
        sandwich_report(&p, &[f], &RatioOptions::default()).unwrap().fields[0].max_lower_gap
    };
    let (g1, g2) = (gap(50), gap(100));
    assert!(g2 < g1, "{g1} {g2}");
}

#[test]
fn splitting_ratio_for_sum_and_x_only_fields() {
    let c = FiniteSpace::circle(1.0, 60).unwrap();
    let p = ProductSpace::cartesian(&c, &c, &ProductOptions::default()).unwrap();
    let tf =
        TensorSumField::new(vec![vec![1.0; 60]], vec![c.coordinates().iter().map(|s| (2.0 * PI * s).sin()).collect()])
            .unwrap();
    let r = lemma_lip_check(&p, &tf.eval(&p), None, &RatioOptions::default()).unwrap();
    assert!(r.holds && r.min_ratio >= 1.0 - 1e-12);
    let a = FiniteSpace::interval(1.0, 60).unwrap();
    let sq = ProductSpace::cartesian(&a, &a, &ProductOptions::default()).unwrap();
    let r = lemma_lip_check(&sq, &sq.field(|x, t| x + t), None, &RatioOptions::default()).unwrap();
    assert!((r.max_ratio - 1.0).abs() < 1e-9 && (r.min_ratio - 1.0).abs() < 1e-9);
}

#[test]
fn cutoff_reports_linear_decay_constant() {
    let x = FiniteSpace::circle(2.0 * PI, 100).unwrap();
    let y = FiniteSpace::interval(1.0, 80).unwrap();
    let w = WarpSpec::from_fn(&y, |t| t).unwrap();
    let p = ProductSpace::warped(&x, &y, w, &ProductOptions::default()).unwrap();
    let f = p.field(|_, t| t);
    let sched: Vec<_> = [4.0, 16.0, 64.0].iter().map(|&n| (n, 10.0, 4.0)).collect();
    let t = cutoff_convergence(&p, &f, &sched, &CutoffOptions::default()).unwrap();
    assert!((t.decay_constant - 1.0).abs() < 1e-9);
    assert!(t.eta_monotone && t.eta_bound_holds);
    let mut csv = Vec::new();
    t.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 4);
}
