//! Closed-form and independent 1D quadrature oracles.

use std::f64::consts::PI;
use std::sync::Arc;

use chord_core::chord_integrals::{variational_estimate, DEFAULT_EPS_SCHEDULE};
use chord_core::star_body::{radial_distance, RidgeTerm};
use chord_core::{
    chord_integral, eps_combination, lp_mixed_chord, mixed_chord_integral, orlicz_mixed_chord,
    variational_derivative, OrliczFunction, SphereQuadrature, StarBody,
};

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[test]
fn shifted_ball_matches_axial_reduction() {
    let rule = SphereQuadrature::gauss_product(48, 96).unwrap();
    let body = StarBody::ball(vec![0.0, 0.0, 0.3], 1.0).unwrap();
    let d = body.half_chords_on(&rule).unwrap();
    let cubes: Vec<f64> = d.iter().map(|x| x.powi(3)).collect();
    let got = rule.integrate(&cubes).unwrap();
    let oracle =
        2.0 * PI * adaptive_simpson(&|t: f64| (0.91 + 0.09 * t * t).powf(1.5), -1.0, 1.0, 1e-14);
    assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
}

#[test]
fn ellipsoid_volume_two_ways() {
    let rule = SphereQuadrature::gauss_product(48, 96).unwrap();
    let ell = StarBody::ellipsoid(vec![1.0, 2.0, 3.0], None).unwrap();
    let rho = ell.radii_on(&rule).unwrap();
    let vol = rule
        .integrate(&rho.iter().map(|r| r.powi(3) / 3.0).collect::<Vec<_>>())
        .unwrap();
    assert!((vol - 8.0 * PI).abs() < 1e-6);
    let b0 = chord_integral(&ell, 0, &rule).unwrap();
    assert!((b0.value - 8.0 * PI).abs() < 1e-6);
    assert!(b0.error_estimate < 1e-6);
}

#[test]
fn refinement_differences_shrink() {
    let ell = StarBody::ellipsoid(vec![0.7, 1.3, 2.2], None).unwrap();
    let values: Vec<f64> = [8usize, 16, 32, 64]
        .iter()
        .map(|&l| {
            let rule = SphereQuadrature::gauss_product(l, 2 * l).unwrap();
            chord_integral(&ell, 1, &rule).unwrap().value
        })
        .collect();
    let diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(diffs.windows(2).all(|w| w[1] < w[0]), "{diffs:?}");
}

#[test]
fn circle_rule_area_of_ellipse() {
    let rule = SphereQuadrature::circle(256).unwrap();
    let ell = StarBody::ellipsoid(vec![1.0, 2.0], None).unwrap();
    let b0 = chord_integral(&ell, 0, &rule).unwrap().value;
    assert!((b0 - 2.0 * PI).abs() < 1e-12);
    // B_1 = (1/2) int rho = half the perimeter-like integral; compare with 1D Simpson
    let b1 = chord_integral(&ell, 1, &rule).unwrap().value;
    let oracle = 0.5
        * adaptive_simpson(
            &|t: f64| 1.0 / ((t.cos()).powi(2) + (t.sin() / 2.0).powi(2)).sqrt(),
            0.0,
            2.0 * PI,
            1e-13,
        );
    assert!((b1 - oracle).abs() < 1e-10, "{b1} vs {oracle}");
}

#[test]
fn dilate_homogeneity() {
    let rule = SphereQuadrature::gauss_product(24, 48).unwrap();
    let ell = StarBody::ellipsoid(vec![0.9, 1.4, 2.5], None).unwrap();
    for c in [0.5, 2.0, 5.0] {
        let scaled = StarBody::dilate(c, ell.clone()).unwrap();
        for i in 0..3 {
            let a = chord_integral(&ell, i, &rule).unwrap().value;
            let b = chord_integral(&scaled, i, &rule).unwrap().value;
            assert!((b / (c.powi(3 - i as i32) * a) - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn diagonal_collapse() {
    let rule = SphereQuadrature::gauss_product(16, 32).unwrap();
    let k = StarBody::perturbed_sphere(
        3,
        1.2,
        vec![RidgeTerm {
            amplitude: -0.3,
            direction: vec![1.0, 1.0, 0.0],
            degree: 2,
        }],
    )
    .unwrap();
    let b0 = chord_integral(&k, 0, &rule).unwrap().value;
    let mixed = mixed_chord_integral(&[&k, &k, &k], &rule).unwrap().value;
    assert!((mixed - b0).abs() < 1e-12 * b0);
    let phi = OrliczFunction::power_mix(0.5, 1.0, 3.0).unwrap();
    for i in 0..3 {
        let bi = chord_integral(&k, i, &rule).unwrap().value;
        assert!((lp_mixed_chord(&k, &k, i, 2.5, &rule).unwrap().value - bi).abs() < 1e-12 * bi);
        assert!(
            (orlicz_mixed_chord(&k, &k, i, &phi, &rule).unwrap().value - bi).abs() < 1e-12 * bi
        );
    }
}

#[test]
fn variational_diagonal_reproduces_chord_integral() {
    let rule = SphereQuadrature::gauss_product(16, 32).unwrap();
    let k = StarBody::ellipsoid(vec![1.0, 1.5, 0.8], None).unwrap();
    let phi = OrliczFunction::power_mix(0.5, 1.0, 3.0).unwrap();
    for i in 0..3 {
        let v =
            variational_derivative(&k, &k, i, &phi, &phi, &rule, &DEFAULT_EPS_SCHEDULE).unwrap();
        let bi = chord_integral(&k, i, &rule).unwrap().value;
        assert!((v / bi - 1.0).abs() < 1e-6, "i={i}: {v} vs {bi}");
    }
}

#[test]
fn variational_matches_integral_for_perturbed_pair() {
    let rule = SphereQuadrature::gauss_product(24, 48).unwrap();
    let k = StarBody::perturbed_sphere(
        3,
        1.0,
        vec![RidgeTerm {
            amplitude: 0.25,
            direction: vec![0.0, 0.0, 1.0],
            degree: 2,
        }],
    )
    .unwrap();
    let l = StarBody::perturbed_sphere(
        3,
        1.3,
        vec![RidgeTerm {
            amplitude: 0.2,
            direction: vec![1.0, -1.0, 0.5],
            degree: 3,
        }],
    )
    .unwrap();
    let phi1 = OrliczFunction::power(2.0).unwrap();
    let phi2 = OrliczFunction::power_mix(0.5, 1.0, 3.0).unwrap();
    for i in 0..3 {
        let est =
            variational_estimate(&k, &l, i, &phi1, &phi2, &rule, &DEFAULT_EPS_SCHEDULE).unwrap();
        let direct = orlicz_mixed_chord(&k, &l, i, &phi2, &rule).unwrap().value;
        assert!(
            (est.value / direct - 1.0).abs() < 1e-4,
            "i={i}: {} vs {direct}",
            est.value
        );
    }
}

#[test]
fn eps_sum_converges_radially() {
    let rule = SphereQuadrature::gauss_product(16, 32).unwrap();
    let k = Arc::new(StarBody::ellipsoid(vec![1.0, 2.0, 3.0], None).unwrap());
    let l = Arc::new(StarBody::centered_ball(3, 1.5).unwrap());
    let phi = OrliczFunction::power(2.0).unwrap();
    let dist: Vec<f64> = (1..=6)
        .map(|e| {
            let eps = 10f64.powi(-e);
            let s = eps_combination(k.clone(), l.clone(), eps, phi, phi).unwrap();
            radial_distance(&s, &k, &rule).unwrap()
        })
        .collect();
    assert!(dist.windows(2).all(|w| w[1] < w[0]), "{dist:?}");
    assert!(dist[5] < 1e-5);
    let zero = eps_combination(k.clone(), l, 0.0, phi, phi).unwrap();
    assert!(radial_distance(&zero, &k, &rule).unwrap() < 1e-12);
}
