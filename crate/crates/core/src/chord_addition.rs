//! Orlicz chord additions and linear combinations.
//!
//! The combination of `K_1, ..., K_m` with coefficients `alpha_j` and gauges
//! `phi_j` has, in every direction `u`, the half-chord `lambda > 0` solving
//!
//! ```text
//! sum_j alpha_j phi_j(d(K_j, u) / lambda) = 1.
//! ```
//!
//! Each `phi_j` is decreasing and its argument decreases in `lambda`, so the
//! left-hand side increases strictly from 0 to infinity and the root is
//! unique. It is found by geometric bracket expansion from `max_j d_j`
//! followed by a Newton iteration safeguarded by bisection.
//!
//! Terms with a zero coefficient are dropped. The L_p case, where every gauge
//! is `t^-p`, also has a closed form; [`lp_chord_add`] uses it directly.

use std::sync::Arc;

use crate::error::{ChordError, Result};
use crate::orlicz_fn::{OrliczFunction, OrliczGauge};
use crate::roots;
use crate::star_body::{Shape, StarBody, UnitDirection, MAX_ADDITION_DEPTH};

/// Relative tolerance on the solved half-chord.
pub const SOLVER_REL_TOL: f64 = 1e-12;

/// Bound on `|sum_j alpha_j phi_j(d_j / lambda) - 1|` at every solved direction.
pub const RESIDUAL_TOL: f64 = 1e-11;

/// One summand of an Orlicz combination.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationTerm {
    pub body: Arc<StarBody>,
    pub coefficient: f64,
    pub gauge: OrliczFunction,
}

/// Lazily evaluated Orlicz chord linear combination.
#[derive(Debug, Clone, PartialEq)]
pub struct OrliczCombination {
    terms: Vec<CombinationTerm>,
}

fn check_coefficients(coefficients: &[f64]) -> Result<()> {
    if let Some(c) = coefficients.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(ChordError::InvalidParameter(format!(
            "coefficients must be finite and nonnegative, got {c}"
        )));
    }
    if coefficients.iter().all(|c| *c == 0.0) {
        return Err(ChordError::ZeroCoefficients);
    }
    Ok(())
}

fn check_nesting(bodies: &[&StarBody]) -> Result<usize> {
    let dim = bodies[0].dim();
    if let Some(b) = bodies.iter().find(|b| b.dim() != dim) {
        return Err(ChordError::DimensionMismatch {
            expected: dim,
            found: b.dim(),
        });
    }
    let depth = 1 + bodies.iter().map(|b| b.addition_depth()).max().unwrap_or(0);
    if depth > MAX_ADDITION_DEPTH {
        return Err(ChordError::NestingTooDeep {
            max: MAX_ADDITION_DEPTH,
        });
    }
    Ok(dim)
}

impl OrliczCombination {
    pub fn terms(&self) -> &[CombinationTerm] {
        &self.terms
    }

    fn active(&self) -> impl Iterator<Item = &CombinationTerm> {
        self.terms.iter().filter(|t| t.coefficient > 0.0)
    }

    /// `sum_j alpha_j phi_j(d_j / lambda) - 1` over the active terms, with the
    /// derivative in `lambda`.
    fn equation(&self, chords: &[f64], lambda: f64) -> (f64, f64) {
        let mut value = -1.0;
        let mut slope = 0.0;
        for (t, d) in self.active().zip(chords) {
            let x = d / lambda;
            let (v, dv) = t.gauge.value_and_slope(x);
            value += t.coefficient * v;
            slope -= t.coefficient * dv * x / lambda;
        }
        (value, slope)
    }

    /// Residual of the defining equation at `lambda`, given the half-chords
    /// of the active terms.
    pub fn residual(&self, chords: &[f64], lambda: f64) -> f64 {
        self.equation(chords, lambda).0
    }

    /// Solves for the half-chord of the combination given the half-chords of
    /// the active terms in one direction.
    pub fn solve(&self, chords: &[f64]) -> Result<f64> {
        let start = chords.iter().copied().fold(0.0, f64::max);
        let (lo, hi) = roots::bracket_increasing(|l| self.equation(chords, l).0, start)?;
        let lambda = roots::solve_increasing(|l| self.equation(chords, l), lo, hi, SOLVER_REL_TOL)?;
        let residual = self.residual(chords, lambda);
        if !(residual.abs() < RESIDUAL_TOL) {
            return Err(ChordError::ConvergenceFailure {
                what: "chord addition residual check",
                iterations: roots::MAX_ITERATIONS,
            });
        }
        Ok(lambda)
    }

    /// Envelope `r / max_j phi_j^-1(1/m) <= lambda <= R / min_j phi_j^-1(1/m)`
    /// where `r`, `R` are the smallest and largest of the `d_j`. Only
    /// meaningful when all coefficients equal 1; returns `None` otherwise.
    pub fn envelope(&self, chords: &[f64]) -> Result<Option<(f64, f64)>> {
        if self.terms.iter().any(|t| t.coefficient != 1.0) {
            return Ok(None);
        }
        let m = self.terms.len() as f64;
        let mut inv_min = f64::INFINITY;
        let mut inv_max = 0.0f64;
        for t in &self.terms {
            let v = t.gauge.inverse(1.0 / m)?;
            inv_min = inv_min.min(v);
            inv_max = inv_max.max(v);
        }
        let r = chords.iter().copied().fold(f64::INFINITY, f64::min);
        let big_r = chords.iter().copied().fold(0.0, f64::max);
        Ok(Some((r / inv_max, big_r / inv_min)))
    }

    /// Half-chords of the active terms at each direction, term-major.
    pub fn term_half_chords(&self, dirs: &[UnitDirection]) -> Result<Vec<Vec<f64>>> {
        self.active().map(|t| t.body.half_chords(dirs)).collect()
    }

    pub(crate) fn half_chords(&self, dirs: &[UnitDirection]) -> Result<Vec<f64>> {
        let per_term = self.term_half_chords(dirs)?;
        let mut chords = vec![0.0; per_term.len()];
        (0..dirs.len())
            .map(|k| {
                for (c, column) in chords.iter_mut().zip(&per_term) {
                    *c = column[k];
                }
                self.solve(&chords)
            })
            .collect()
    }
}

/// Closed-form L_p chord combination
/// `d = (alpha d_K^-p + beta d_L^-p)^(-1/p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpCombination {
    p: f64,
    alpha: f64,
    beta: f64,
    left: Arc<StarBody>,
    right: Arc<StarBody>,
}

impl LpCombination {
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn left(&self) -> &StarBody {
        &self.left
    }

    pub fn right(&self) -> &StarBody {
        &self.right
    }

    pub(crate) fn half_chords(&self, dirs: &[UnitDirection]) -> Result<Vec<f64>> {
        let p = self.p;
        let mut acc = vec![0.0; dirs.len()];
        for (coef, body) in [(self.alpha, &self.left), (self.beta, &self.right)] {
            if coef > 0.0 {
                for (a, d) in acc.iter_mut().zip(body.half_chords(dirs)?) {
                    *a += coef * d.powf(-p);
                }
            }
        }
        Ok(acc.into_iter().map(|s| s.powf(-1.0 / p)).collect())
    }
}

/// The Orlicz chord linear combination of `parts` with the given coefficients
/// and one univariate gauge per part.
pub fn orlicz_chord_combine(
    parts: Vec<Arc<StarBody>>,
    coefficients: Vec<f64>,
    gauges: Vec<OrliczFunction>,
) -> Result<StarBody> {
    if parts.len() < 2 {
        return Err(ChordError::ArityMismatch {
            expected: 2,
            found: parts.len(),
        });
    }
    for found in [coefficients.len(), gauges.len()] {
        if found != parts.len() {
            return Err(ChordError::ArityMismatch {
                expected: parts.len(),
                found,
            });
        }
    }
    check_coefficients(&coefficients)?;
    let refs: Vec<&StarBody> = parts.iter().map(|p| p.as_ref()).collect();
    let dim = check_nesting(&refs)?;
    let terms = parts
        .into_iter()
        .zip(coefficients)
        .zip(gauges)
        .map(|((body, coefficient), gauge)| CombinationTerm {
            body,
            coefficient,
            gauge,
        })
        .collect();
    Ok(StarBody::from_shape(
        dim,
        Shape::OrliczSum(Arc::new(OrliczCombination { terms })),
    ))
}

/// Orlicz chord addition with a multivariate sum-form gauge and unit
/// coefficients.
pub fn orlicz_chord_add(parts: Vec<Arc<StarBody>>, gauge: &OrliczGauge) -> Result<StarBody> {
    if gauge.arity() != parts.len() {
        return Err(ChordError::ArityMismatch {
            expected: gauge.arity(),
            found: parts.len(),
        });
    }
    let m = parts.len();
    orlicz_chord_combine(parts, vec![1.0; m], gauge.univariate_terms())
}

/// `K +_phi eps . L`: coefficients `(1, eps)` with gauges `(phi1, phi2)`.
/// At `eps = 0` the second term is dropped and the half-chord equals `d(K, .)`.
pub fn eps_combination(
    k: impl Into<Arc<StarBody>>,
    l: impl Into<Arc<StarBody>>,
    eps: f64,
    phi1: OrliczFunction,
    phi2: OrliczFunction,
) -> Result<StarBody> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(ChordError::InvalidParameter(format!(
            "epsilon must be finite and nonnegative, got {eps}"
        )));
    }
    orlicz_chord_combine(vec![k.into(), l.into()], vec![1.0, eps], vec![phi1, phi2])
}

/// Closed-form L_p chord combination of two bodies.
pub fn lp_chord_add(
    k: impl Into<Arc<StarBody>>,
    l: impl Into<Arc<StarBody>>,
    p: f64,
    alpha: f64,
    beta: f64,
) -> Result<StarBody> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(ChordError::InvalidParameter(format!(
            "p must be ≥ 1, got {p}"
        )));
    }
    check_coefficients(&[alpha, beta])?;
    let (left, right) = (k.into(), l.into());
    let dim = check_nesting(&[&left, &right])?;
    Ok(StarBody::from_shape(
        dim,
        Shape::LpSum(Arc::new(LpCombination {
            p,
            alpha,
            beta,
            left,
            right,
        })),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::SphereQuadrature;

    fn ball(r: f64) -> Arc<StarBody> {
        Arc::new(StarBody::centered_ball(3, r).unwrap())
    }

    fn power(p: f64) -> OrliczFunction {
        OrliczFunction::power(p).unwrap()
    }

    #[test]
    fn symmetric_l2_sum_of_unit_balls() {
        let s = orlicz_chord_combine(
            vec![ball(1.0), ball(1.0)],
            vec![1.0, 1.0],
            vec![power(2.0); 2],
        )
        .unwrap();
        let rule = SphereQuadrature::gauss_product(8, 16).unwrap();
        for d in s.half_chords_on(&rule).unwrap() {
            assert!((d - 0.5f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn eps_combination_of_balls_closed_form() {
        // lambda = (1 + eps 2^-p)^(-1/p)
        let rule = SphereQuadrature::gauss_product(8, 16).unwrap();
        for p in [1.0, 2.0, 3.5] {
            for eps in [0.0, 1e-3, 0.1, 1.0] {
                let s = eps_combination(ball(1.0), ball(2.0), eps, power(p), power(p)).unwrap();
                let expect = (1.0 + eps * 2f64.powf(-p)).powf(-1.0 / p);
                for d in s.half_chords_on(&rule).unwrap() {
                    assert!((d - expect).abs() < 1e-12 * expect, "p={p} eps={eps}");
                }
            }
        }
        let s = eps_combination(ball(1.0), ball(2.0), 0.1, power(2.0), power(2.0)).unwrap();
        let d = s.half_chord(&UnitDirection::axis(3, 0)).unwrap();
        assert!((d - 0.987_730).abs() < 5e-7, "d = {d}");
    }

    #[test]
    fn lp_closed_form_examples() {
        let s = lp_chord_add(ball(1.0), ball(1.0), 1.0, 1.0, 1.0).unwrap();
        assert!((s.half_chord(&UnitDirection::axis(3, 2)).unwrap() - 0.5).abs() < 1e-15);
        let s = lp_chord_add(ball(1.0), ball(2.0), 2.0, 1.0, 1.0).unwrap();
        assert!((s.half_chord(&UnitDirection::axis(3, 2)).unwrap() - 0.894_427_191).abs() < 1e-9);
    }

    #[test]
    fn zero_coefficient_reproduces_first_body() {
        let rule = SphereQuadrature::gauss_product(8, 16).unwrap();
        let k = Arc::new(StarBody::ball(vec![0.1, 0.0, -0.2], 1.0).unwrap());
        let s = orlicz_chord_combine(
            vec![k.clone(), ball(2.0)],
            vec![1.0, 0.0],
            vec![power(2.0), power(1.0)],
        )
        .unwrap();
        let a = s.half_chords_on(&rule).unwrap();
        let b = k.half_chords_on(&rule).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn argument_errors() {
        assert!(matches!(
            orlicz_chord_combine(
                vec![ball(1.0), ball(2.0)],
                vec![0.0, 0.0],
                vec![power(2.0); 2]
            ),
            Err(ChordError::ZeroCoefficients)
        ));
        assert!(orlicz_chord_combine(
            vec![ball(1.0), ball(2.0)],
            vec![1.0, -1.0],
            vec![power(2.0); 2]
        )
        .is_err());
        assert!(orlicz_chord_combine(vec![ball(1.0)], vec![1.0], vec![power(2.0)]).is_err());
        assert!(lp_chord_add(ball(1.0), ball(1.0), 0.5, 1.0, 1.0).is_err());
        let flat = Arc::new(StarBody::unit_ball(2));
        assert!(matches!(
            lp_chord_add(ball(1.0), flat, 1.0, 1.0, 1.0),
            Err(ChordError::DimensionMismatch { .. })
        ));
        assert!(eps_combination(ball(1.0), ball(1.0), -0.1, power(1.0), power(1.0)).is_err());
    }

    #[test]
    fn nesting_depth_is_capped() {
        let mut body = StarBody::unit_ball(3);
        for _ in 0..MAX_ADDITION_DEPTH {
            body = orlicz_chord_combine(
                vec![Arc::new(body), ball(1.0)],
                vec![1.0, 1.0],
                vec![power(1.0); 2],
            )
            .unwrap();
        }
        assert_eq!(body.addition_depth(), MAX_ADDITION_DEPTH);
        assert!(matches!(
            lp_chord_add(body, ball(1.0), 1.0, 1.0, 1.0),
            Err(ChordError::NestingTooDeep { .. })
        ));
    }

    #[test]
    fn multivariate_gauge_matches_univariate_terms() {
        let rule = SphereQuadrature::gauss_product(8, 16).unwrap();
        let k = Arc::new(StarBody::ellipsoid(vec![1.0, 2.0, 0.7], None).unwrap());
        let g = OrliczGauge::power_sum(2.0, 2).unwrap();
        let a = orlicz_chord_add(vec![k.clone(), ball(1.0)], &g).unwrap();
        let b = lp_chord_add(k, ball(1.0), 2.0, 1.0, 1.0).unwrap();
        let (da, db) = (
            a.half_chords_on(&rule).unwrap(),
            b.half_chords_on(&rule).unwrap(),
        );
        for (x, y) in da.iter().zip(&db) {
            assert!((x - y).abs() < 1e-12 * y);
        }
    }

    #[test]
    fn envelope_requires_unit_coefficients() {
        let combo = OrliczCombination {
            terms: vec![
                CombinationTerm {
                    body: ball(1.0),
                    coefficient: 1.0,
                    gauge: power(2.0),
                },
                CombinationTerm {
                    body: ball(2.0),
                    coefficient: 1.0,
                    gauge: power(2.0),
                },
            ],
        };
        let lambda = combo.solve(&[1.0, 2.0]).unwrap();
        let (lo, hi) = combo.envelope(&[1.0, 2.0]).unwrap().unwrap();
        assert!(lo <= lambda && lambda <= hi);
        let mut scaled = combo.clone();
        scaled.terms[1].coefficient = 0.5;
        assert!(scaled.envelope(&[1.0, 2.0]).unwrap().is_none());
    }
}
