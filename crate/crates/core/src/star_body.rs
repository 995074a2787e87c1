//! Star bodies described by their radial functions.
//!
//! A [`StarBody`] is an immutable expression tree: closed-form leaves (balls,
//! ellipsoids, perturbed spheres, tabulated values) under linear images,
//! dilations and chord additions. Evaluation is batched over a slice of
//! directions so that every node of the tree is visited once per batch, which
//! keeps nested additions linear in the size of the tree.
//!
//! Bodies are only ever evaluated at unit directions. A linear image pulls a
//! direction back through `A^-1`, renormalizes it, and rescales by the
//! degree `-1` homogeneity of the radial function.
//!
//! Chord additions only determine the half-chord function of the result, so
//! the body they produce is the origin-symmetric one whose radial function
//! equals its half-chord function.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chord_addition::{LpCombination, OrliczCombination};
use crate::error::{ChordError, Result};
use crate::orlicz_fn::OrliczFunction;
use crate::quadrature::{RuleKind, SphereQuadrature};

/// Radial values at or below this are rejected rather than clamped.
pub const POSITIVITY_FLOOR: f64 = 1e-14;

/// Maximum nesting of chord additions inside one body.
pub const MAX_ADDITION_DEPTH: usize = 8;

/// Directions per parallel evaluation block.
const BLOCK: usize = 256;

/// A point of S^(n-1).
#[derive(Debug, Clone, PartialEq)]
pub struct UnitDirection(Vec<f64>);

impl UnitDirection {
    /// Accepts `coords` if its Euclidean norm is 1 within `1e-12`.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(ChordError::InvalidParameter(format!(
                "directions need n >= 2, got {}",
                coords.len()
            )));
        }
        let norm = coords.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(ChordError::NotUnit { norm });
        }
        Ok(UnitDirection(coords))
    }

    /// Normalizes `v`, returning the direction and the original norm.
    pub fn normalize(mut v: Vec<f64>) -> Result<(Self, f64)> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) || v.len() < 2 {
            return Err(ChordError::InvalidParameter(
                "cannot normalize a zero or non-finite vector".into(),
            ));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        Ok((UnitDirection(v), norm))
    }

    /// The `k`-th standard basis vector of R^n.
    pub fn axis(n: usize, k: usize) -> Self {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        UnitDirection(v)
    }

    pub(crate) fn from_trusted(coords: Vec<f64>) -> Self {
        UnitDirection(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn antipode(&self) -> Self {
        UnitDirection(self.0.iter().map(|x| -x).collect())
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.0.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// Bit pattern with `-0.0` folded into `0.0`, for exact node lookup.
    fn key(coords: &[f64]) -> Vec<u64> {
        coords.iter().map(|x| (x + 0.0).to_bits()).collect()
    }
}

/// An invertible linear map of R^n.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    det: f64,
}

impl LinearMap {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() < 2 {
            return Err(ChordError::InvalidParameter(format!(
                "linear map must be n x n with n >= 2, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(ChordError::InvalidParameter(
                "matrix has non-finite entries".into(),
            ));
        }
        let det = matrix.determinant();
        if det.abs() < 1e-14 {
            return Err(ChordError::SingularMatrix { det });
        }
        let inverse = matrix
            .clone()
            .try_inverse()
            .ok_or(ChordError::SingularMatrix { det })?;
        Ok(LinearMap {
            matrix,
            inverse,
            det,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(ChordError::InvalidParameter(
                "matrix rows must form a square".into(),
            ));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity is invertible")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    /// Set iff `|det - 1| < 1e-12`.
    pub fn is_special(&self) -> bool {
        (self.det - 1.0).abs() < 1e-12
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| self.matrix.row(i).iter().copied().collect())
            .collect()
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.matrix, x)
    }

    /// `A^-1 u` normalized, together with `|A^-1 u|`.
    pub fn pull_back(&self, u: &UnitDirection) -> (UnitDirection, f64) {
        let v = mat_vec(&self.inverse, u.coords());
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        (
            UnitDirection(v.into_iter().map(|x| x / norm).collect()),
            norm,
        )
    }
}

fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum())
        .collect()
}

/// One ridge term `amplitude * (w . u)^degree` of a sphere perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeTerm {
    pub amplitude: f64,
    pub direction: Vec<f64>,
    pub degree: u32,
}

impl RidgeTerm {
    fn eval(&self, u: &[f64]) -> f64 {
        let s: f64 = self.direction.iter().zip(u).map(|(a, b)| a * b).sum();
        self.amplitude * s.powi(self.degree as i32)
    }
}

/// Radial values tabulated on the nodes of one quadrature rule.
#[derive(Debug, Clone)]
pub struct Tabulated {
    rule: RuleKind,
    values: Vec<f64>,
    index: HashMap<Vec<u64>, usize>,
}

impl Tabulated {
    fn new(rule: &SphereQuadrature, values: Vec<f64>) -> Result<Self> {
        if values.len() != rule.len() {
            return Err(ChordError::DimensionMismatch {
                expected: rule.len(),
                found: values.len(),
            });
        }
        if let Some(&bad) = values
            .iter()
            .find(|v| !(**v > POSITIVITY_FLOOR) || !v.is_finite())
        {
            return Err(ChordError::NonPositiveRadial { value: bad });
        }
        let index = rule
            .nodes()
            .iter()
            .enumerate()
            .map(|(k, u)| (UnitDirection::key(u.coords()), k))
            .collect();
        Ok(Tabulated {
            rule: rule.kind(),
            values,
            index,
        })
    }

    fn radial(&self, coords: &[f64]) -> Result<f64> {
        if let Some(&k) = self.index.get(&UnitDirection::key(coords)) {
            return Ok(self.values[k]);
        }
        match self.rule {
            // piecewise-linear in angle; circle node k sits at angle 2 pi k / m
            RuleKind::Circle { points } => {
                let step = std::f64::consts::TAU / points as f64;
                let theta = coords[1].atan2(coords[0]).rem_euclid(std::f64::consts::TAU);
                let s = theta / step;
                let k0 = (s.floor() as usize) % points;
                let frac = s - s.floor();
                let k1 = (k0 + 1) % points;
                Ok((1.0 - frac) * self.values[k0] + frac * self.values[k1])
            }
            _ => Err(ChordError::OffRule {
                rule_id: self.rule.to_string(),
            }),
        }
    }
}

impl PartialEq for Tabulated {
    fn eq(&self, other: &Self) -> bool {
        self.rule == other.rule && self.values == other.values
    }
}

/// The shape of a body.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Euclidean ball containing the origin in its interior.
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// `R diag(a) B^n` for an orthogonal `R`.
    Ellipsoid {
        semi_axes: Vec<f64>,
        rotation: DMatrix<f64>,
    },
    /// `rho(u) = base + sum of ridge terms`.
    PerturbedSphere {
        base_radius: f64,
        terms: Vec<RidgeTerm>,
    },
    Tabulated(Arc<Tabulated>),
    LinearImage {
        map: LinearMap,
        inner: Arc<StarBody>,
    },
    Dilate {
        factor: f64,
        inner: Arc<StarBody>,
    },
    LpSum(Arc<LpCombination>),
    OrliczSum(Arc<OrliczCombination>),
}

/// A star body in R^n with positive continuous radial function.
#[derive(Debug, Clone, PartialEq)]
pub struct StarBody {
    dim: usize,
    shape: Shape,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(ChordError::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )));
    }
    Ok(())
}

fn positive(value: f64) -> Result<f64> {
    if value > POSITIVITY_FLOOR && value.is_finite() {
        Ok(value)
    } else {
        Err(ChordError::NonPositiveRadial { value })
    }
}

impl StarBody {
    pub(crate) fn from_shape(dim: usize, shape: Shape) -> Self {
        StarBody { dim, shape }
    }

    /// Ball of radius `radius` centered at `center`; the origin must be interior.
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        check_positive("radius", radius)?;
        if center.len() < 2 || center.iter().any(|c| !c.is_finite()) {
            return Err(ChordError::InvalidParameter(
                "ball center must be finite with n >= 2".into(),
            ));
        }
        let c2: f64 = center.iter().map(|c| c * c).sum();
        if c2.sqrt() >= radius {
            return Err(ChordError::InvalidParameter(format!(
                "origin must lie inside the ball (|c| = {} >= R = {radius})",
                c2.sqrt()
            )));
        }
        Ok(StarBody {
            dim: center.len(),
            shape: Shape::Ball { center, radius },
        })
    }

    pub fn centered_ball(dim: usize, radius: f64) -> Result<Self> {
        Self::ball(vec![0.0; dim], radius)
    }

    pub fn unit_ball(dim: usize) -> Self {
        Self::centered_ball(dim, 1.0).expect("unit ball is valid")
    }

    /// Axis-aligned ellipsoid, optionally rotated by an orthogonal matrix.
    pub fn ellipsoid(semi_axes: Vec<f64>, rotation: Option<DMatrix<f64>>) -> Result<Self> {
        let n = semi_axes.len();
        if n < 2 {
            return Err(ChordError::InvalidParameter(
                "ellipsoid needs n >= 2".into(),
            ));
        }
        for a in &semi_axes {
            check_positive("semi-axis", *a)?;
        }
        let rotation = rotation.unwrap_or_else(|| DMatrix::identity(n, n));
        if rotation.nrows() != n || rotation.ncols() != n {
            return Err(ChordError::DimensionMismatch {
                expected: n,
                found: rotation.nrows(),
            });
        }
        let defect = (rotation.transpose() * &rotation - DMatrix::<f64>::identity(n, n)).amax();
        if defect > 1e-10 {
            return Err(ChordError::InvalidParameter(format!(
                "ellipsoid rotation is not orthogonal (defect {defect:e})"
            )));
        }
        Ok(StarBody {
            dim: n,
            shape: Shape::Ellipsoid {
                semi_axes,
                rotation,
            },
        })
    }

    /// `rho(u) = base_radius + sum_k a_k (w_k . u)^m_k`. Term directions are
    /// normalized; the total amplitude must not exceed `0.9 * base_radius`,
    /// which bounds the perturbation on the whole sphere.
    pub fn perturbed_sphere(dim: usize, base_radius: f64, terms: Vec<RidgeTerm>) -> Result<Self> {
        check_positive("base radius", base_radius)?;
        if dim < 2 {
            return Err(ChordError::InvalidParameter(
                "perturbed sphere needs n >= 2".into(),
            ));
        }
        let mut normalized = Vec::with_capacity(terms.len());
        let mut total = 0.0;
        for t in terms {
            if t.direction.len() != dim {
                return Err(ChordError::DimensionMismatch {
                    expected: dim,
                    found: t.direction.len(),
                });
            }
            if !t.amplitude.is_finite() || t.degree == 0 {
                return Err(ChordError::InvalidParameter(
                    "ridge terms need a finite amplitude and degree >= 1".into(),
                ));
            }
            let (w, _) = UnitDirection::normalize(t.direction)?;
            total += t.amplitude.abs();
            normalized.push(RidgeTerm {
                amplitude: t.amplitude,
                direction: w.0,
                degree: t.degree,
            });
        }
        if total > 0.9 * base_radius {
            return Err(ChordError::InvalidParameter(format!(
                "perturbation amplitude {total} exceeds 0.9 x base radius {base_radius}"
            )));
        }
        Ok(StarBody {
            dim,
            shape: Shape::PerturbedSphere {
                base_radius,
                terms: normalized,
            },
        })
    }

    /// Radial values bound to the nodes of `rule`.
    pub fn tabulated(rule: &SphereQuadrature, values: Vec<f64>) -> Result<Self> {
        Ok(StarBody {
            dim: rule.dimension(),
            shape: Shape::Tabulated(Arc::new(Tabulated::new(rule, values)?)),
        })
    }

    /// The image `A K`, evaluated lazily through `rho(AK, u) = rho(K, A^-1 u)`.
    pub fn linear_image(map: LinearMap, inner: impl Into<Arc<StarBody>>) -> Result<Self> {
        let inner = inner.into();
        if map.dim() != inner.dim {
            return Err(ChordError::DimensionMismatch {
                expected: inner.dim,
                found: map.dim(),
            });
        }
        Ok(StarBody {
            dim: inner.dim,
            shape: Shape::LinearImage { map, inner },
        })
    }

    pub fn dilate(factor: f64, inner: impl Into<Arc<StarBody>>) -> Result<Self> {
        check_positive("dilation factor", factor)?;
        let inner = inner.into();
        Ok(StarBody {
            dim: inner.dim,
            shape: Shape::Dilate { factor, inner },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Number of chord additions on the longest root-to-leaf path.
    pub fn addition_depth(&self) -> usize {
        match &self.shape {
            Shape::LinearImage { inner, .. } | Shape::Dilate { inner, .. } => {
                inner.addition_depth()
            }
            Shape::LpSum(c) => 1 + c.left().addition_depth().max(c.right().addition_depth()),
            Shape::OrliczSum(c) => {
                1 + c
                    .terms()
                    .iter()
                    .map(|t| t.body.addition_depth())
                    .max()
                    .unwrap_or(0)
            }
            _ => 0,
        }
    }

    fn check_dirs(&self, dirs: &[UnitDirection]) -> Result<()> {
        match dirs.iter().find(|u| u.dim() != self.dim) {
            Some(u) => Err(ChordError::DimensionMismatch {
                expected: self.dim,
                found: u.dim(),
            }),
            None => Ok(()),
        }
    }

    /// `rho(K, u)`.
    pub fn radial(&self, u: &UnitDirection) -> Result<f64> {
        Ok(self.radii(std::slice::from_ref(u))?[0])
    }

    /// `d(K, u) = (rho(K, u) + rho(K, -u)) / 2`.
    pub fn half_chord(&self, u: &UnitDirection) -> Result<f64> {
        Ok(self.half_chords(std::slice::from_ref(u))?[0])
    }

    /// Radial function at every direction of `dirs`.
    pub fn radii(&self, dirs: &[UnitDirection]) -> Result<Vec<f64>> {
        self.check_dirs(dirs)?;
        self.radii_raw(dirs)
    }

    /// Half-chord function at every direction of `dirs`.
    pub fn half_chords(&self, dirs: &[UnitDirection]) -> Result<Vec<f64>> {
        self.check_dirs(dirs)?;
        self.half_chords_raw(dirs)
    }

    /// Half-chords at all nodes of `rule`, evaluated block-parallel and
    /// concatenated in node order.
    pub fn half_chords_on(&self, rule: &SphereQuadrature) -> Result<Vec<f64>> {
        self.on_rule(rule, |dirs| self.half_chords_raw(dirs))
    }

    /// Radial function at all nodes of `rule`.
    pub fn radii_on(&self, rule: &SphereQuadrature) -> Result<Vec<f64>> {
        self.on_rule(rule, |dirs| self.radii_raw(dirs))
    }

    fn on_rule<F>(&self, rule: &SphereQuadrature, eval: F) -> Result<Vec<f64>>
    where
        F: Fn(&[UnitDirection]) -> Result<Vec<f64>> + Sync,
    {
        if rule.dimension() != self.dim {
            return Err(ChordError::DimensionMismatch {
                expected: self.dim,
                found: rule.dimension(),
            });
        }
        let blocks: Vec<Vec<f64>> = rule
            .nodes()
            .par_chunks(BLOCK)
            .map(&eval)
            .collect::<Result<_>>()?;
        Ok(blocks.concat())
    }

    fn radii_raw(&self, dirs: &[UnitDirection]) -> Result<Vec<f64>> {
        match &self.shape {
            Shape::Ball { center, radius } => {
                let c2: f64 = center.iter().map(|c| c * c).sum();
                let base = radius * radius - c2;
                dirs.iter()
                    .map(|u| {
                        let cu = u.dot(center);
                        positive(cu + (base + cu * cu).sqrt())
                    })
                    .collect()
            }
            Shape::Ellipsoid {
                semi_axes,
                rotation,
            } => dirs
                .iter()
                .map(|u| {
                    // y = R^T u, rho = 1 / |diag(1/a) y|
                    let mut q = 0.0;
                    for (i, a) in semi_axes.iter().enumerate() {
                        let y: f64 = (0..self.dim).map(|k| rotation[(k, i)] * u.0[k]).sum();
                        q += (y / a) * (y / a);
                    }
                    positive(1.0 / q.sqrt())
                })
                .collect(),
            Shape::PerturbedSphere { base_radius, terms } => dirs
                .iter()
                .map(|u| positive(base_radius + terms.iter().map(|t| t.eval(&u.0)).sum::<f64>()))
                .collect(),
            Shape::Tabulated(t) => dirs.iter().map(|u| t.radial(&u.0)).collect(),
            Shape::LinearImage { map, inner } => {
                let (pulled, norms): (Vec<_>, Vec<_>) =
                    dirs.iter().map(|u| map.pull_back(u)).unzip();
                let r = inner.radii_raw(&pulled)?;
                r.iter().zip(&norms).map(|(r, s)| positive(r / s)).collect()
            }
            Shape::Dilate { factor, inner } => Ok(inner
                .radii_raw(dirs)?
                .into_iter()
                .map(|r| factor * r)
                .collect()),
            Shape::LpSum(_) | Shape::OrliczSum(_) => self.half_chords_raw(dirs),
        }
    }

    fn half_chords_raw(&self, dirs: &[UnitDirection]) -> Result<Vec<f64>> {
        match &self.shape {
            Shape::LinearImage { map, inner } => {
                // A^-1(-u) = -A^-1 u, so the chord pulls back as a whole
                let (pulled, norms): (Vec<_>, Vec<_>) =
                    dirs.iter().map(|u| map.pull_back(u)).unzip();
                let d = inner.half_chords_raw(&pulled)?;
                d.iter().zip(&norms).map(|(d, s)| positive(d / s)).collect()
            }
            Shape::Dilate { factor, inner } => Ok(inner
                .half_chords_raw(dirs)?
                .into_iter()
                .map(|d| factor * d)
                .collect()),
            Shape::LpSum(c) => c.half_chords(dirs),
            Shape::OrliczSum(c) => c.half_chords(dirs),
            _ => {
                let forward = self.radii_raw(dirs)?;
                let back: Vec<UnitDirection> = dirs.iter().map(|u| u.antipode()).collect();
                let backward = self.radii_raw(&back)?;
                Ok(forward
                    .iter()
                    .zip(&backward)
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect())
            }
        }
    }

    /// `A K` as a plain ellipsoid when `K` is a centered ball or ellipsoid:
    /// with `K = R diag(a) B`, the SVD `A R diag(a) = U S V^T` gives semi-axes
    /// `S` and rotation `U`. Returns `None` for other shapes.
    pub fn linear_image_closed_form(&self, map: &LinearMap) -> Result<Option<StarBody>> {
        if map.dim() != self.dim {
            return Err(ChordError::DimensionMismatch {
                expected: self.dim,
                found: map.dim(),
            });
        }
        let n = self.dim;
        let m = match &self.shape {
            Shape::Ball { center, radius } if center.iter().all(|c| *c == 0.0) => {
                map.matrix() * *radius
            }
            Shape::Ellipsoid {
                semi_axes,
                rotation,
            } => {
                map.matrix()
                    * rotation
                    * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(semi_axes))
            }
            _ => return Ok(None),
        };
        let svd = m.svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        debug_assert_eq!(u.nrows(), n);
        StarBody::ellipsoid(svd.singular_values.iter().copied().collect(), Some(u)).map(Some)
    }

    /// Serializable description of this body.
    pub fn to_expr(&self) -> BodyExpr {
        match &self.shape {
            Shape::Ball { center, radius } => BodyExpr::Ball {
                radius: *radius,
                center: Some(center.clone()),
            },
            Shape::Ellipsoid {
                semi_axes,
                rotation,
            } => {
                let n = self.dim;
                let is_identity = *rotation == DMatrix::<f64>::identity(n, n);
                BodyExpr::Ellipsoid {
                    semi_axes: semi_axes.clone(),
                    rotation: (!is_identity).then(|| {
                        (0..n)
                            .map(|i| rotation.row(i).iter().copied().collect())
                            .collect()
                    }),
                }
            }
            Shape::PerturbedSphere { base_radius, terms } => BodyExpr::PerturbedSphere {
                base_radius: *base_radius,
                terms: terms.clone(),
            },
            Shape::Tabulated(t) => BodyExpr::Tabulated {
                rule: t.rule.to_string(),
                values: t.values.clone(),
            },
            Shape::LinearImage { map, inner } => BodyExpr::LinearImage {
                matrix: map.rows(),
                body: Box::new(inner.to_expr()),
            },
            Shape::Dilate { factor, inner } => BodyExpr::Dilate {
                factor: *factor,
                body: Box::new(inner.to_expr()),
            },
            Shape::LpSum(c) => BodyExpr::LpAdd {
                p: c.p(),
                alpha: c.alpha(),
                beta: c.beta(),
                left: Box::new(c.left().to_expr()),
                right: Box::new(c.right().to_expr()),
            },
            Shape::OrliczSum(c) => BodyExpr::OrliczAdd {
                parts: c.terms().iter().map(|t| t.body.to_expr()).collect(),
                coefficients: Some(c.terms().iter().map(|t| t.coefficient).collect()),
                gauges: c.terms().iter().map(|t| t.gauge).collect(),
            },
        }
    }

    /// Builds a body of dimension `dim` from its description.
    pub fn from_expr(expr: &BodyExpr, dim: usize) -> Result<Self> {
        let body = match expr {
            BodyExpr::Ball { radius, center } => {
                let center = center.clone().unwrap_or_else(|| vec![0.0; dim]);
                Self::ball(center, *radius)?
            }
            BodyExpr::Ellipsoid {
                semi_axes,
                rotation,
            } => {
                let rotation = match rotation {
                    Some(rows) => Some(LinearMap::from_rows(rows)?.matrix().clone()),
                    None => None,
                };
                Self::ellipsoid(semi_axes.clone(), rotation)?
            }
            BodyExpr::PerturbedSphere { base_radius, terms } => {
                Self::perturbed_sphere(dim, *base_radius, terms.clone())?
            }
            BodyExpr::Tabulated { rule, values } => {
                Self::tabulated(&SphereQuadrature::from_id(rule)?, values.clone())?
            }
            BodyExpr::LinearImage { matrix, body } => {
                Self::linear_image(LinearMap::from_rows(matrix)?, Self::from_expr(body, dim)?)?
            }
            BodyExpr::Dilate { factor, body } => {
                Self::dilate(*factor, Self::from_expr(body, dim)?)?
            }
            BodyExpr::LpAdd {
                p,
                alpha,
                beta,
                left,
                right,
            } => crate::chord_addition::lp_chord_add(
                Self::from_expr(left, dim)?,
                Self::from_expr(right, dim)?,
                *p,
                *alpha,
                *beta,
            )?,
            BodyExpr::OrliczAdd {
                parts,
                coefficients,
                gauges,
            } => {
                let parts = parts
                    .iter()
                    .map(|p| Self::from_expr(p, dim).map(Arc::new))
                    .collect::<Result<Vec<_>>>()?;
                let coefficients = coefficients
                    .clone()
                    .unwrap_or_else(|| vec![1.0; parts.len()]);
                let gauges = if gauges.len() == 1 && parts.len() > 1 {
                    vec![gauges[0]; parts.len()]
                } else {
                    gauges.clone()
                };
                crate::chord_addition::orlicz_chord_combine(parts, coefficients, gauges)?
            }
        };
        if body.dim != dim {
            return Err(ChordError::DimensionMismatch {
                expected: dim,
                found: body.dim,
            });
        }
        Ok(body)
    }
}

/// Serializable description of a body, used by replay digests and configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BodyExpr {
    Ball {
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    Ellipsoid {
        semi_axes: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rotation: Option<Vec<Vec<f64>>>,
    },
    PerturbedSphere {
        base_radius: f64,
        #[serde(default)]
        terms: Vec<RidgeTerm>,
    },
    Tabulated {
        rule: String,
        values: Vec<f64>,
    },
    LinearImage {
        matrix: Vec<Vec<f64>>,
        body: Box<BodyExpr>,
    },
    Dilate {
        factor: f64,
        body: Box<BodyExpr>,
    },
    LpAdd {
        p: f64,
        #[serde(default = "one")]
        alpha: f64,
        #[serde(default = "one")]
        beta: f64,
        left: Box<BodyExpr>,
        right: Box<BodyExpr>,
    },
    OrliczAdd {
        parts: Vec<BodyExpr>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coefficients: Option<Vec<f64>>,
        /// One gauge per part, or a single gauge shared by all parts.
        gauges: Vec<OrliczFunction>,
    },
}

fn one() -> f64 {
    1.0
}

/// `(r_K, R_K)`: min and max of the half-chord function over the rule nodes.
/// These are grid approximations of the true extrema.
pub fn radial_bounds(body: &StarBody, rule: &SphereQuadrature) -> Result<(f64, f64)> {
    let d = body.half_chords_on(rule)?;
    let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// Grid approximation of the radial metric `max_u |rho(K, u) - rho(L, u)|`.
pub fn radial_distance(k: &StarBody, l: &StarBody, rule: &SphereQuadrature) -> Result<f64> {
    if k.dim() != l.dim() {
        return Err(ChordError::DimensionMismatch {
            expected: k.dim(),
            found: l.dim(),
        });
    }
    let a = k.radii_on(rule)?;
    let b = l.radii_on(rule)?;
    Ok(a.iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Result of a proportionality test between two node-indexed profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proportionality {
    pub is_similar: bool,
    /// Fitted ratio, the mean of `f_K / f_L` over the nodes.
    pub lambda: f64,
    /// `max |f_K / (lambda f_L) - 1|`.
    pub max_deviation: f64,
}

pub(crate) fn proportionality(a: &[f64], b: &[f64], tol: f64) -> Proportionality {
    let ratios: Vec<f64> = a.iter().zip(b).map(|(x, y)| x / y).collect();
    let lambda = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let max_deviation = ratios
        .iter()
        .map(|r| (r / lambda - 1.0).abs())
        .fold(0.0, f64::max);
    Proportionality {
        is_similar: max_deviation < tol,
        lambda,
        max_deviation,
    }
}

/// Tests whether `d(K, .) = lambda d(L, .)` on the rule nodes.
pub fn similar_chord_check(
    k: &StarBody,
    l: &StarBody,
    rule: &SphereQuadrature,
    tol: f64,
) -> Result<Proportionality> {
    Ok(proportionality(
        &k.half_chords_on(rule)?,
        &l.half_chords_on(rule)?,
        tol,
    ))
}

/// Tests whether `rho(K, .) = lambda rho(L, .)` on the rule nodes, i.e. the
/// bodies are dilates of each other.
pub fn dilate_check(
    k: &StarBody,
    l: &StarBody,
    rule: &SphereQuadrature,
    tol: f64,
) -> Result<Proportionality> {
    Ok(proportionality(&k.radii_on(rule)?, &l.radii_on(rule)?, tol))
}
