use std::sync::Arc;

use chord_core::generators::{
    random_body, random_gl, random_rotation, random_unit, trial_rng, ShapeFamily,
};
use chord_core::star_body::Shape;
use chord_core::{
    chord_integral, lp_chord_add, lp_mixed_chord, orlicz_chord_add, orlicz_chord_combine,
    orlicz_mixed_chord, BodyExpr, LinearMap, OrliczFunction, OrliczGauge, SphereQuadrature,
    StarBody, UnitDirection,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn rule() -> SphereQuadrature {
    SphereQuadrature::gauss_product(12, 24).unwrap()
}

fn family() -> impl Strategy<Value = ShapeFamily> {
    prop::sample::select(ShapeFamily::ALL.to_vec())
}

fn body(seed: u64, fam: ShapeFamily) -> StarBody {
    let expr = random_body(&mut trial_rng(seed, 0), 3, fam);
    StarBody::from_expr(&expr, 3).unwrap()
}

fn gauge() -> impl Strategy<Value = OrliczFunction> {
    prop_oneof![
        (1.0..4.0f64).prop_map(|p| OrliczFunction::power(p).unwrap()),
        (0.0..=1.0f64, 1.0..4.0f64, 1.0..4.0f64)
            .prop_map(|(a, p, q)| OrliczFunction::power_mix(a, p, q).unwrap()),
    ]
}

/// Closed-form image of a centered ellipsoid `R diag(a) B` under `A`:
/// `A R diag(a) = U S V^T` gives semi-axes `S` and rotation `U`.
fn ellipsoid_image(a: &LinearMap, semi_axes: &[f64], rotation: &DMatrix<f64>) -> StarBody {
    let m = a.matrix() * rotation * DMatrix::from_diagonal(&DVector::from_column_slice(semi_axes));
    let svd = m.svd(true, false);
    StarBody::ellipsoid(svd.singular_values.iter().copied().collect(), svd.u).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn homogeneity(seed in any::<u64>(), fam in family(), c in prop::sample::select(vec![0.5, 2.0, 5.0])) {
        let r = rule();
        let k = body(seed, fam);
        let scaled = StarBody::dilate(c, k.clone()).unwrap();
        for i in 0..3 {
            let a = chord_integral(&k, i, &r).unwrap().value;
            let b = chord_integral(&scaled, i, &r).unwrap().value;
            prop_assert!((b / (c.powi(3 - i as i32) * a) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn lp_and_orlicz_mixed_agree(seed in any::<u64>(), f1 in family(), f2 in family(), p in 1.0..5.0f64, i in 0usize..3) {
        let r = rule();
        let (k, l) = (body(seed, f1), body(seed ^ 0x5555, f2));
        let lp = lp_mixed_chord(&k, &l, i, p, &r).unwrap().value;
        let orl = orlicz_mixed_chord(&k, &l, i, &OrliczFunction::power(p).unwrap(), &r).unwrap().value;
        prop_assert!((lp - orl).abs() <= 1e-12 * lp.abs());
    }

    #[test]
    fn lp_sum_closed_form_matches_root_solve(seed in any::<u64>(), f1 in family(), f2 in family(), p in 1.0..5.0f64) {
        let r = rule();
        let (k, l) = (Arc::new(body(seed, f1)), Arc::new(body(seed ^ 0xaaaa, f2)));
        let closed = lp_chord_add(k.clone(), l.clone(), p, 1.0, 1.0).unwrap().half_chords_on(&r).unwrap();
        let solved = orlicz_chord_add(vec![k, l], &OrliczGauge::power_sum(p, 2).unwrap())
            .unwrap()
            .half_chords_on(&r)
            .unwrap();
        for (a, b) in closed.iter().zip(&solved) {
            prop_assert!((a - b).abs() <= 1e-10 * a);
        }
    }

    #[test]
    fn residual_and_envelope(seed in any::<u64>(), f1 in family(), f2 in family(), g1 in gauge(), g2 in gauge()) {
        let r = rule();
        let (k, l) = (Arc::new(body(seed, f1)), Arc::new(body(seed ^ 0x1234, f2)));
        let sum = orlicz_chord_combine(vec![k, l], vec![1.0, 1.0], vec![g1, g2]).unwrap();
        let Shape::OrliczSum(comb) = sum.shape() else { panic!("expected a sum") };
        let parts = comb.term_half_chords(r.nodes()).unwrap();
        let lambda = sum.half_chords_on(&r).unwrap();
        for (node, lam) in lambda.iter().enumerate() {
            let chords: Vec<f64> = parts.iter().map(|p| p[node]).collect();
            prop_assert!(comb.residual(&chords, *lam).abs() < 1e-11);
            let (lo, hi) = comb.envelope(&chords).unwrap().unwrap();
            prop_assert!(lo * (1.0 - 1e-12) <= *lam && *lam <= hi * (1.0 + 1e-12));
        }
    }

    #[test]
    fn addition_is_monotone(seed in any::<u64>(), f1 in family(), f2 in family(), c in 1.0..2.0f64, g in gauge()) {
        let r = rule();
        let k = Arc::new(body(seed, f1));
        let bigger = Arc::new(StarBody::dilate(c, k.clone()).unwrap());
        let l = Arc::new(body(seed ^ 0x77, f2));
        let small = orlicz_chord_combine(vec![k, l.clone()], vec![1.0, 1.0], vec![g, g]).unwrap();
        let large = orlicz_chord_combine(vec![bigger, l], vec![1.0, 1.0], vec![g, g]).unwrap();
        for (a, b) in small.half_chords_on(&r).unwrap().iter().zip(large.half_chords_on(&r).unwrap()) {
            prop_assert!(*a <= b * (1.0 + 1e-11));
        }
    }

    #[test]
    fn sum_commutes_with_dilation(seed in any::<u64>(), f1 in family(), f2 in family(), g1 in gauge(), g2 in gauge(), t in 0.3..3.0f64) {
        let r = rule();
        let (k, l) = (body(seed, f1), body(seed ^ 0x99, f2));
        let sum = orlicz_chord_combine(vec![Arc::new(k.clone()), Arc::new(l.clone())], vec![1.0, 1.0], vec![g1, g2]).unwrap();
        let scaled_sum = orlicz_chord_combine(
            vec![Arc::new(StarBody::dilate(t, k).unwrap()), Arc::new(StarBody::dilate(t, l).unwrap())],
            vec![1.0, 1.0],
            vec![g1, g2],
        )
        .unwrap();
        for (a, b) in sum.half_chords_on(&r).unwrap().iter().zip(scaled_sum.half_chords_on(&r).unwrap()) {
            prop_assert!((t * a - b).abs() <= 1e-11 * b);
        }
    }
}

#[test]
fn gl_covariance_against_closed_form_images() {
    let mut rng = trial_rng(2024, 0);
    let phi1 = OrliczFunction::power(2.0).unwrap();
    let phi2 = OrliczFunction::power_mix(0.4, 1.5, 3.0).unwrap();
    for _ in 0..20 {
        let a = random_gl(&mut rng, 3, 8.0);
        let axes: Vec<f64> = (0..3).map(|k| 0.6 + 0.7 * k as f64).collect();
        let rot = random_rotation(&mut rng, 3);
        let k = StarBody::ellipsoid(axes.clone(), Some(rot.clone())).unwrap();
        let ball_axes = vec![1.3; 3];
        let id = DMatrix::identity(3, 3);
        let l = StarBody::ellipsoid(ball_axes.clone(), None).unwrap();
        for eps in [1.0, 0.1] {
            let sum = orlicz_chord_combine(
                vec![Arc::new(k.clone()), Arc::new(l.clone())],
                vec![1.0, eps],
                vec![phi1, phi2],
            )
            .unwrap();
            let image_of_sum = StarBody::linear_image(a.clone(), sum).unwrap();
            let sum_of_images = orlicz_chord_combine(
                vec![
                    Arc::new(ellipsoid_image(&a, &axes, &rot)),
                    Arc::new(ellipsoid_image(&a, &ball_axes, &id)),
                ],
                vec![1.0, eps],
                vec![phi1, phi2],
            )
            .unwrap();
            let dirs: Vec<UnitDirection> = (0..500)
                .map(|_| UnitDirection::new(random_unit(&mut rng, 3)).unwrap())
                .collect();
            let x = image_of_sum.half_chords(&dirs).unwrap();
            let y = sum_of_images.half_chords(&dirs).unwrap();
            for (p, q) in x.iter().zip(&y) {
                assert!((p - q).abs() <= 1e-9 * q, "{p} vs {q}");
            }
        }
    }
}

#[test]
fn continuity_constant_is_bounded() {
    // perturb one summand by sup-norm delta (a concentric ball of radius 1 + delta)
    let r = rule();
    let k = Arc::new(StarBody::ellipsoid(vec![1.0, 2.0, 3.0], None).unwrap());
    let phi = OrliczFunction::power_mix(0.5, 1.0, 3.0).unwrap();
    let base = orlicz_chord_combine(
        vec![k.clone(), Arc::new(StarBody::unit_ball(3))],
        vec![1.0, 1.0],
        vec![phi, phi],
    )
    .unwrap()
    .half_chords_on(&r)
    .unwrap();
    let constants: Vec<f64> = [1e-3, 1e-4, 1e-5]
        .iter()
        .map(|&delta| {
            let moved = Arc::new(StarBody::centered_ball(3, 1.0 + delta).unwrap());
            let s = orlicz_chord_combine(vec![k.clone(), moved], vec![1.0, 1.0], vec![phi, phi])
                .unwrap()
                .half_chords_on(&r)
                .unwrap();
            base.iter()
                .zip(&s)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                / delta
        })
        .collect();
    assert!(
        constants
            .iter()
            .all(|c| c.is_finite() && *c > 0.0 && *c <= 1.0),
        "{constants:?}"
    );
    assert!((constants[2] / constants[0] - 1.0).abs() < 0.01);
}

#[test]
fn rules_are_deterministic() {
    for id in ["circle:64", "gauss3:16x32", "mc:4:2000:7"] {
        let a = SphereQuadrature::from_id(id).unwrap();
        let b = SphereQuadrature::from_id(id).unwrap();
        assert_eq!(a.weights(), b.weights());
        assert_eq!(a.nodes(), b.nodes());
        let v: Vec<f64> = (0..a.len()).map(|k| (k as f64).sin()).collect();
        assert_eq!(
            a.integrate(&v).unwrap().to_bits(),
            b.integrate(&v).unwrap().to_bits()
        );
    }
}

#[test]
fn expressions_survive_json() {
    let mut rng = trial_rng(5, 1);
    for fam in ShapeFamily::ALL {
        let expr = random_body(&mut rng, 3, fam);
        let back: BodyExpr = serde_json::from_str(&serde_json::to_string(&expr).unwrap()).unwrap();
        assert_eq!(expr, back);
    }
}
