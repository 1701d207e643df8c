//! Property checks that cut across modules.

use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;

use sobolev_lab::cutoff::CutoffFamily;
use sobolev_lab::discrete::Mesh;
use sobolev_lab::geometry::{hyperbolic_ball_volume, riemann, ChartSpec, Domain, MetricChart, ModelSpec};
use sobolev_lab::lab::{
    check_regularity_lemma, cone_energy_decay, transition_norm_minimization, BumpField, DecayCurve,
    TransitionOptions,
};
use sobolev_lab::report::Table;

fn whole(model: ModelSpec) -> MetricChart {
    MetricChart::from_spec(ChartSpec {
        model,
        domain: Domain::Whole,
        exclusions: vec![],
        fd_step: None,
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn klein_planes_have_curvature_minus_one(r in 0.0..0.97f64, a in 0.0..(2.0 * PI), t in 0.1..3.0f64) {
        let chart = whole(ModelSpec::KleinBall { dim: 2 });
        let k = riemann(&chart, &[r * a.cos(), r * a.sin()]).unwrap().sectional(&[1.0, 0.0], &[t.cos(), t.sin()]).unwrap();
        prop_assert!((k + 1.0).abs() < 1e-8, "{}", k);
    }

    #[test]
    fn cutoffs_fall_from_one_to_zero(offset in 0.0..200.0f64, k in 1usize..3) {
        let family = CutoffFamily::new(k).unwrap();
        let c = family.build_cutoff(family.lambda.t0 + offset).unwrap();
        prop_assert!(c.outer > c.radius);
        let mut prev = 1.0;
        for i in 0..=200 {
            let r = c.radius + (c.outer - c.radius) * i as f64 / 200.0;
            let v = c.value(r);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
            prop_assert!(v <= prev + 1e-12);
            prev = v;
        }
        prop_assert_eq!(c.value(0.5 * c.radius), 1.0);
        prop_assert_eq!(c.value(c.outer * 1.01), 0.0);
    }

    #[test]
    fn hyperbolic_balls_more_than_quadruple(rho in 0.01..5.0f64) {
        // sinh grows faster than linearly, so V(2 rho) / V(rho) > 4 in the plane
        prop_assert!(hyperbolic_ball_volume(2, 2.0 * rho) / hyperbolic_ball_volume(2, rho) > 4.0);
    }

    #[test]
    fn bumps_are_nonnegative_and_compactly_supported(seed in 0u64..1000, x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let f = BumpField::random(seed, 2, 0.6);
        let v = f.eval(&[x, y]);
        prop_assert!(v >= 0.0);
        if x * x + y * y >= 0.36 {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn csv_round_trips_exactly(values in proptest::collection::vec(-1e300..1e300f64, 1..20)) {
        let mut t = Table::new("t", &["v"]);
        for v in &values {
            t.push(vec![*v]);
        }
        let back: Vec<f64> = t.to_csv().lines().skip(1).map(|l| l.parse().unwrap()).collect();
        prop_assert_eq!(back, values);
    }

    #[test]
    fn decay_trend_is_a_fraction(values in proptest::collection::vec(0.0..10.0f64, 2..30)) {
        let grid: Vec<f64> = (0..values.len()).map(|i| i as f64).collect();
        let c = DecayCurve::new(grid, values).unwrap();
        prop_assert!((0.0..=1.0).contains(&c.trend));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn cone_exponent_tracks_the_angle(theta in 0.6..(2.0 * PI)) {
        let d = cone_energy_decay(theta, 1, &[0.5, 1.0], 512).unwrap();
        let expect = 2.0 * PI / theta - 1.0;
        prop_assert!((d.exponent - expect).abs() <= 0.03 * expect.max(1.0), "{} vs {}", d.exponent, expect);
    }

    #[test]
    fn p2_local_estimate_holds_for_random_bumps(seed in 0u64..10_000) {
        let chart = MetricChart::euclidean_box(vec![-1.0, -1.0], vec![1.0, 1.0]);
        let mesh = Arc::new(Mesh::on_box(chart, &[-1.0, -1.0], &[1.0, 1.0], 1.0 / 32.0).unwrap());
        let f = BumpField::random(seed, 2, 0.9).sample(mesh);
        let c = check_regularity_lemma(&f, 2.0, 0.4, 0.8, 0.0, "prop").unwrap();
        prop_assert!(c.local.ratio <= 1.0 + 1e-9, "{:?}", c.local);
    }
}

#[test]
fn transition_norm_is_homogeneous_in_the_boundary_values() {
    // scaling (a, b) by 3 scales the exact minimizer, up to the surrogate mu
    let chart = whole(ModelSpec::Euclidean { dim: 2 });
    let base = TransitionOptions {
        rho_in: 0.2,
        rho_out: 1.0,
        t_in: 0.4,
        t_out: 0.8,
        step: 1.0 / 20.0,
        ..Default::default()
    };
    let one = transition_norm_minimization(&chart, &base).unwrap();
    let three = transition_norm_minimization(&chart, &TransitionOptions { a: -3.0, b: 3.0, ..base }).unwrap();
    let rel = (three.norm - 3.0 * one.norm).abs() / (3.0 * one.norm);
    assert!(rel < 1e-3, "{} vs 3 x {}", three.norm, one.norm);
}
