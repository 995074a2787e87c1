//! Chord-integral functionals computed by spherical quadrature.
//!
//! With `d_K = d(K, .)` the half-chord function and `w_k` the rule weights,
//!
//! | functional | discrete form |
//! |---|---|
//! | `B_i(K)` | `(1/n) sum w_k d_K^(n-i)` |
//! | `B(K_1, ..., K_n)` | `(1/n) sum w_k prod_j d_Kj` |
//! | `B_i(K, L)` | `(1/n) sum w_k d_K^(n-i-1) d_L` |
//! | `B_-p,i(K, L)` | `(1/n) sum w_k d_K^(n-i+p) d_L^-p` |
//! | `B_phi,i(K, L)` | `(1/n) sum w_k phi(d_L / d_K) d_K^(n-i)` |
//!
//! Every public functional returns an [`IntegralResult`] whose error estimate
//! is the difference between the value on the given rule and on the same
//! family at double resolution. The `kernel` functions work on precomputed
//! node-indexed half-chords and are shared with the inequality checks.

use crate::chord_addition::eps_combination;
use crate::error::{ChordError, Result};
use crate::orlicz_fn::OrliczFunction;
use crate::quadrature::{pairwise_sum, SphereQuadrature};
use crate::star_body::StarBody;

/// Default epsilon schedule for the one-sided difference quotients.
pub const DEFAULT_EPS_SCHEDULE: [f64; 4] = [1e-2, 5e-3, 2.5e-3, 1.25e-3];

/// Successive extrapolants must agree to this relative tolerance.
pub const EXTRAPOLATION_TOL: f64 = 1e-3;

/// Value of a functional with a coarse-vs-refined discretization error.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralResult {
    pub value: f64,
    pub rule_id: String,
    /// `|value(rule) - value(refined rule)|`; zero when the integrand cannot be
    /// evaluated on the refined rule (tabulated bodies off their nodes).
    pub error_estimate: f64,
}

pub(crate) fn check_index(i: usize, n: usize) -> Result<()> {
    if i >= n {
        return Err(ChordError::IndexOutOfRange { i, n });
    }
    Ok(())
}

fn check_dims(rule: &SphereQuadrature, bodies: &[&StarBody]) -> Result<usize> {
    let n = rule.dimension();
    match bodies.iter().find(|b| b.dim() != n) {
        Some(b) => Err(ChordError::DimensionMismatch {
            expected: n,
            found: b.dim(),
        }),
        None => Ok(n),
    }
}

/// Evaluates `f` on `rule` and on its refinement.
pub(crate) fn with_refinement<F>(rule: &SphereQuadrature, f: F) -> Result<IntegralResult>
where
    F: Fn(&SphereQuadrature) -> Result<f64>,
{
    let value = f(rule)?;
    let error_estimate = match rule.refined().and_then(|r| f(&r)) {
        Ok(fine) => (fine - value).abs(),
        Err(ChordError::OffRule { .. }) => 0.0,
        Err(e) => return Err(e),
    };
    Ok(IntegralResult {
        value,
        rule_id: rule.rule_id(),
        error_estimate,
    })
}

/// Functionals on node-indexed half-chord values.
pub mod kernel {
    use super::*;

    fn scaled(rule: &SphereQuadrature, values: &[f64]) -> Result<f64> {
        Ok(rule.integrate(values)? / rule.dimension() as f64)
    }

    pub fn chord_integral(rule: &SphereQuadrature, dk: &[f64], i: usize) -> Result<f64> {
        let e = (rule.dimension() - i) as i32;
        let v: Vec<f64> = dk.iter().map(|d| d.powi(e)).collect();
        scaled(rule, &v)
    }

    pub fn mixed(rule: &SphereQuadrature, profiles: &[&[f64]]) -> Result<f64> {
        let v: Vec<f64> = (0..rule.len())
            .map(|k| profiles.iter().map(|d| d[k]).product())
            .collect();
        scaled(rule, &v)
    }

    pub fn ith_mixed(rule: &SphereQuadrature, dk: &[f64], dl: &[f64], i: usize) -> Result<f64> {
        let e = (rule.dimension() - i - 1) as i32;
        let v: Vec<f64> = dk.iter().zip(dl).map(|(a, b)| a.powi(e) * b).collect();
        scaled(rule, &v)
    }

    pub fn lp_mixed(
        rule: &SphereQuadrature,
        dk: &[f64],
        dl: &[f64],
        i: usize,
        p: f64,
    ) -> Result<f64> {
        let e = (rule.dimension() - i) as f64 + p;
        let v: Vec<f64> = dk
            .iter()
            .zip(dl)
            .map(|(a, b)| a.powf(e) * b.powf(-p))
            .collect();
        scaled(rule, &v)
    }

    pub fn orlicz_mixed(
        rule: &SphereQuadrature,
        dk: &[f64],
        dl: &[f64],
        i: usize,
        phi: &OrliczFunction,
    ) -> Result<f64> {
        let e = (rule.dimension() - i) as i32;
        let v = dk
            .iter()
            .zip(dl)
            .map(|(a, b)| Ok(phi.evaluate(b / a)? * a.powi(e)))
            .collect::<Result<Vec<f64>>>()?;
        scaled(rule, &v)
    }

    pub fn chord_measure(rule: &SphereQuadrature, dk: &[f64], i: usize) -> Result<Vec<f64>> {
        let n = rule.dimension();
        let total = chord_integral(rule, dk, i)?;
        let e = (n - i) as i32;
        let norm = n as f64 * total;
        Ok(rule
            .weights()
            .iter()
            .zip(dk)
            .map(|(w, d)| w * d.powi(e) / norm)
            .collect())
    }
}

/// `B_i(K) = (1/n) int d(K, u)^(n-i) dS(u)`.
pub fn chord_integral(k: &StarBody, i: usize, rule: &SphereQuadrature) -> Result<IntegralResult> {
    let n = check_dims(rule, &[k])?;
    check_index(i, n)?;
    with_refinement(rule, |r| {
        kernel::chord_integral(r, &k.half_chords_on(r)?, i)
    })
}

/// `B(K_1, ..., K_n)` for exactly `n` bodies.
pub fn mixed_chord_integral(
    bodies: &[&StarBody],
    rule: &SphereQuadrature,
) -> Result<IntegralResult> {
    let n = check_dims(rule, bodies)?;
    if bodies.len() != n {
        return Err(ChordError::ArityMismatch {
            expected: n,
            found: bodies.len(),
        });
    }
    with_refinement(rule, |r| {
        let profiles = bodies
            .iter()
            .map(|b| b.half_chords_on(r))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&[f64]> = profiles.iter().map(|p| p.as_slice()).collect();
        kernel::mixed(r, &refs)
    })
}

/// `B_i(K, L) = (1/n) int d_K^(n-i-1) d_L dS`.
pub fn ith_mixed_chord(
    k: &StarBody,
    l: &StarBody,
    i: usize,
    rule: &SphereQuadrature,
) -> Result<IntegralResult> {
    let n = check_dims(rule, &[k, l])?;
    check_index(i, n)?;
    with_refinement(rule, |r| {
        kernel::ith_mixed(r, &k.half_chords_on(r)?, &l.half_chords_on(r)?, i)
    })
}

/// `B_-p,i(K, L) = (1/n) int d_K^(n-i+p) d_L^-p dS` for `p >= 1`.
pub fn lp_mixed_chord(
    k: &StarBody,
    l: &StarBody,
    i: usize,
    p: f64,
    rule: &SphereQuadrature,
) -> Result<IntegralResult> {
    let n = check_dims(rule, &[k, l])?;
    check_index(i, n)?;
    if !(p.is_finite() && p >= 1.0) {
        return Err(ChordError::InvalidParameter(format!(
            "p must be ≥ 1, got {p}"
        )));
    }
    with_refinement(rule, |r| {
        kernel::lp_mixed(r, &k.half_chords_on(r)?, &l.half_chords_on(r)?, i, p)
    })
}

/// `B_phi,i(K, L) = (1/n) int phi(d_L / d_K) d_K^(n-i) dS`.
pub fn orlicz_mixed_chord(
    k: &StarBody,
    l: &StarBody,
    i: usize,
    phi: &OrliczFunction,
    rule: &SphereQuadrature,
) -> Result<IntegralResult> {
    let n = check_dims(rule, &[k, l])?;
    check_index(i, n)?;
    with_refinement(rule, |r| {
        kernel::orlicz_mixed(r, &k.half_chords_on(r)?, &l.half_chords_on(r)?, i, phi)
    })
}

/// Discrete chord measure: node masses `w_k d_K(u_k)^(n-i) / (n B_i(K))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChordMeasure {
    pub rule_id: String,
    pub weights: Vec<f64>,
}

impl ChordMeasure {
    pub fn total_mass(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    /// `int f dmu` for node-indexed values.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.weights.len() {
            return Err(ChordError::DimensionMismatch {
                expected: self.weights.len(),
                found: values.len(),
            });
        }
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(values)
            .map(|(w, f)| w * f)
            .collect();
        Ok(pairwise_sum(&terms))
    }
}

pub fn chord_measure(k: &StarBody, i: usize, rule: &SphereQuadrature) -> Result<ChordMeasure> {
    let n = check_dims(rule, &[k])?;
    check_index(i, n)?;
    Ok(ChordMeasure {
        rule_id: rule.rule_id(),
        weights: kernel::chord_measure(rule, &k.half_chords_on(rule)?, i)?,
    })
}

/// Difference quotients and their extrapolation table.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalEstimate {
    /// Extrapolated estimate of `B_phi2,i(K, L)`.
    pub value: f64,
    /// `(B_i(K +_phi eps . L) - B_i(K)) / eps` for each eps in the schedule.
    pub quotients: Vec<f64>,
    /// Diagonal of the Neville table (extrapolated derivative, unscaled).
    pub extrapolants: Vec<f64>,
}

/// Estimates `B_phi2,i(K, L)` as `(phi1)'_r(1) / (n - i)` times the right
/// derivative at `eps = 0` of `B_i(K +_phi eps . L)`.
pub fn variational_derivative(
    k: &StarBody,
    l: &StarBody,
    i: usize,
    phi1: &OrliczFunction,
    phi2: &OrliczFunction,
    rule: &SphereQuadrature,
    schedule: &[f64],
) -> Result<f64> {
    variational_estimate(k, l, i, phi1, phi2, rule, schedule).map(|e| e.value)
}

pub fn variational_estimate(
    k: &StarBody,
    l: &StarBody,
    i: usize,
    phi1: &OrliczFunction,
    phi2: &OrliczFunction,
    rule: &SphereQuadrature,
    schedule: &[f64],
) -> Result<VariationalEstimate> {
    let n = check_dims(rule, &[k, l])?;
    check_index(i, n)?;
    if schedule.len() < 2
        || schedule.iter().any(|e| !(e.is_finite() && *e > 0.0))
        || schedule.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(ChordError::InvalidParameter(
            "epsilon schedule must hold at least two positive, strictly decreasing values".into(),
        ));
    }
    let slope_at_one = phi1.right_derivative_at_one();
    if !(slope_at_one < 0.0) {
        return Err(ChordError::SignViolation(format!(
            "(phi1)'_r(1) = {slope_at_one} must be negative"
        )));
    }

    let base = kernel::chord_integral(rule, &k.half_chords_on(rule)?, i)?;
    let (k_arc, l_arc) = (
        std::sync::Arc::new(k.clone()),
        std::sync::Arc::new(l.clone()),
    );
    let mut quotients = Vec::with_capacity(schedule.len());
    for &eps in schedule {
        let sum = eps_combination(k_arc.clone(), l_arc.clone(), eps, *phi1, *phi2)?;
        let b = kernel::chord_integral(rule, &sum.half_chords_on(rule)?, i)?;
        let q = (b - base) / eps;
        if !(q < 0.0) {
            return Err(ChordError::SignViolation(format!(
                "difference quotient {q} at eps = {eps} must be negative"
            )));
        }
        quotients.push(q);
    }

    // Neville extrapolation to eps = 0 of a series in powers of eps
    let mut table = quotients.clone();
    let mut extrapolants = vec![table[0]];
    for level in 1..schedule.len() {
        for j in (level..schedule.len()).rev() {
            let (e_far, e_near) = (schedule[j - level], schedule[j]);
            table[j] = table[j] + (table[j] - table[j - 1]) * e_near / (e_far - e_near);
        }
        extrapolants.push(table[level]);
    }
    let m = extrapolants.len();
    let (last, prev) = (extrapolants[m - 1], extrapolants[m - 2]);
    if (last - prev).abs() > EXTRAPOLATION_TOL * last.abs() {
        return Err(ChordError::ConvergenceFailure {
            what: "Richardson extrapolation of the first variation",
            iterations: schedule.len(),
        });
    }
    Ok(VariationalEstimate {
        value: slope_at_one / (n - i) as f64 * last,
        quotients,
        extrapolants,
    })
}
