//! Seeded random bodies, maps and gauges.
//!
//! Generators return [`BodyExpr`] descriptions rather than bodies so that
//! every sampled instance can be serialized and replayed exactly.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::orlicz_fn::OrliczFunction;
use crate::star_body::{BodyExpr, LinearMap, RidgeTerm};

/// Default bound on the condition number of random linear maps.
pub const DEFAULT_MAX_CONDITION: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeFamily {
    Ball,
    Ellipsoid,
    PerturbedSphere,
    SlImage,
}

impl ShapeFamily {
    pub const ALL: [ShapeFamily; 4] = [
        ShapeFamily::Ball,
        ShapeFamily::Ellipsoid,
        ShapeFamily::PerturbedSphere,
        ShapeFamily::SlImage,
    ];
}

/// Independent stream `trial` of the generator seeded by `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn gaussian_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn random_unit<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, n);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Orthogonal matrix from the QR factorization of a Gaussian matrix, with the
/// sign fix that makes the distribution Haar.
pub fn random_rotation<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_vec(n, n, gaussian_vec(rng, n * n));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `U diag(s) V^T` with log-uniform singular values spanning at most
/// `max_condition`, and a random overall scale in `[0.5, 2]`.
pub fn random_gl<R: Rng>(rng: &mut R, n: usize, max_condition: f64) -> LinearMap {
    let u = random_rotation(rng, n);
    let v = random_rotation(rng, n);
    let half = 0.5 * max_condition.max(1.0).ln();
    let scale = 2f64.powf(rng.random_range(-1.0..=1.0));
    let s: Vec<f64> = (0..n)
        .map(|_| scale * rng.random_range(-half..=half).exp())
        .collect();
    let m = &u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(s)) * v.transpose();
    LinearMap::new(m).expect("bounded condition number")
}

/// A random map with determinant 1 and bounded condition number.
pub fn random_sl<R: Rng>(rng: &mut R, n: usize, max_condition: f64) -> LinearMap {
    let a = random_gl(rng, n, max_condition);
    let mut m = a.matrix().clone();
    if a.det() < 0.0 {
        m.row_mut(0).neg_mut();
    }
    let det = m.determinant();
    m /= det.powf(1.0 / n as f64);
    LinearMap::new(m).expect("unimodular")
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Ball of radius in `[0.5, 2]` with center uniform in the concentric ball of
/// radius `0.5 R`.
pub fn random_ball<R: Rng>(rng: &mut R, n: usize) -> BodyExpr {
    let radius = rng.random_range(0.5..=2.0);
    let offset = 0.5 * radius * rng.random::<f64>().powf(1.0 / n as f64);
    let center = random_unit(rng, n)
        .into_iter()
        .map(|x| x * offset)
        .collect();
    BodyExpr::Ball {
        radius,
        center: Some(center),
    }
}

/// Randomly rotated ellipsoid with semi-axes in `[0.5, 3]`.
pub fn random_ellipsoid<R: Rng>(rng: &mut R, n: usize) -> BodyExpr {
    let semi_axes = (0..n).map(|_| rng.random_range(0.5..=3.0)).collect();
    BodyExpr::Ellipsoid {
        semi_axes,
        rotation: Some(rows(&random_rotation(rng, n))),
    }
}

/// Sphere of radius in `[0.8, 1.5]` plus one to three ridge terms of degree at
/// most 4, with total amplitude at most 40% of the radius.
pub fn random_perturbed<R: Rng>(rng: &mut R, n: usize) -> BodyExpr {
    let base_radius = rng.random_range(0.8..=1.5);
    let count = rng.random_range(1..=3);
    let budget = 0.4 * base_radius / count as f64;
    let terms = (0..count)
        .map(|_| RidgeTerm {
            amplitude: budget * rng.random_range(-1.0..=1.0),
            direction: random_unit(rng, n),
            degree: rng.random_range(1..=4),
        })
        .collect();
    BodyExpr::PerturbedSphere { base_radius, terms }
}

/// A random unimodular image of a random ball, ellipsoid or perturbed sphere.
pub fn random_sl_image<R: Rng>(rng: &mut R, n: usize) -> BodyExpr {
    let inner = match rng.random_range(0..3) {
        0 => random_ball(rng, n),
        1 => random_ellipsoid(rng, n),
        _ => random_perturbed(rng, n),
    };
    BodyExpr::LinearImage {
        matrix: random_sl(rng, n, DEFAULT_MAX_CONDITION).rows(),
        body: Box::new(inner),
    }
}

pub fn random_body<R: Rng>(rng: &mut R, n: usize, family: ShapeFamily) -> BodyExpr {
    match family {
        ShapeFamily::Ball => random_ball(rng, n),
        ShapeFamily::Ellipsoid => random_ellipsoid(rng, n),
        ShapeFamily::PerturbedSphere => random_perturbed(rng, n),
        ShapeFamily::SlImage => random_sl_image(rng, n),
    }
}

/// A strictly convex gauge: `Power(p)` or `PowerMix(a, p, q)` with exponents
/// in `[1, 4]`.
pub fn random_orlicz<R: Rng>(rng: &mut R) -> OrliczFunction {
    if rng.random_bool(0.5) {
        OrliczFunction::power(rng.random_range(1.0..=4.0)).expect("valid exponent")
    } else {
        OrliczFunction::power_mix(
            rng.random_range(0.1..=0.9),
            rng.random_range(1.0..=4.0),
            rng.random_range(1.0..=4.0),
        )
        .expect("valid mix")
    }
}
