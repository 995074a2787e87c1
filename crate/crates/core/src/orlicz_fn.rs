//! Convex decreasing gauge functions.
//!
//! A univariate gauge `phi: (0, inf) -> (0, inf)` is convex, strictly
//! decreasing, normalized by `phi(1) = 1`, blows up at `0+` and vanishes at
//! infinity. Multivariate gauges of arity `m` are built as sums of univariate
//! ones. Only closed-form families are shipped, so every value, inverse and
//! derivative is analytic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ChordError, Result};
use crate::roots;

/// Smallest argument a gauge accepts; the domain is open at zero.
pub const MIN_ARGUMENT: f64 = 1e-14;

/// The closed-form families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `t^-p`
    Power { p: f64 },
    /// `a t^-p + (1 - a) t^-q`
    PowerMix { a: f64, p: f64, q: f64 },
}

/// A validated member of the univariate class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Family", into = "Family")]
pub struct OrliczFunction {
    family: Family,
    right_derivative: f64,
}

fn check_exponent(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 1.0) {
        return Err(ChordError::InvalidParameter(format!(
            "{name} must be ≥ 1, got {v}"
        )));
    }
    Ok(())
}

impl TryFrom<Family> for OrliczFunction {
    type Error = ChordError;

    fn try_from(family: Family) -> Result<Self> {
        let right_derivative = match family {
            Family::Power { p } => {
                check_exponent("p", p)?;
                -p
            }
            Family::PowerMix { a, p, q } => {
                check_exponent("p", p)?;
                check_exponent("q", q)?;
                if !(0.0..=1.0).contains(&a) {
                    return Err(ChordError::InvalidParameter(format!(
                        "mixing weight a must lie in [0, 1], got {a}"
                    )));
                }
                -(a * p + (1.0 - a) * q)
            }
        };
        Ok(OrliczFunction {
            family,
            right_derivative,
        })
    }
}

impl From<OrliczFunction> for Family {
    fn from(f: OrliczFunction) -> Family {
        f.family
    }
}

impl OrliczFunction {
    pub fn power(p: f64) -> Result<Self> {
        Family::Power { p }.try_into()
    }

    pub fn power_mix(a: f64, p: f64, q: f64) -> Result<Self> {
        Family::PowerMix { a, p, q }.try_into()
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Short label used in reports, e.g. `power(2)` or `power_mix(0.5,1,3)`.
    pub fn label(&self) -> String {
        match self.family {
            Family::Power { p } => format!("power({p})"),
            Family::PowerMix { a, p, q } => format!("power_mix({a},{p},{q})"),
        }
    }

    /// The exponent when the gauge is a pure power `t^-p`.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.family {
            Family::Power { p } => Some(p),
            Family::PowerMix { .. } => None,
        }
    }

    fn check_argument(t: f64) -> Result<()> {
        if t.is_nan() || t < MIN_ARGUMENT {
            return Err(ChordError::NonPositiveArgument(t));
        }
        Ok(())
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        Self::check_argument(t)?;
        Ok(self.value(t))
    }

    /// Evaluation without the domain check; callers guarantee `t > 0`.
    #[inline]
    pub(crate) fn value(&self, t: f64) -> f64 {
        match self.family {
            Family::Power { p } => t.powf(-p),
            Family::PowerMix { a, p, q } => a * t.powf(-p) + (1.0 - a) * t.powf(-q),
        }
    }

    /// `(phi(t), phi'(t))` sharing the power evaluations.
    #[inline]
    pub(crate) fn value_and_slope(&self, t: f64) -> (f64, f64) {
        match self.family {
            Family::Power { p } => {
                let v = t.powf(-p);
                (v, -p * v / t)
            }
            Family::PowerMix { a, p, q } => {
                let (vp, vq) = (t.powf(-p), t.powf(-q));
                (
                    a * vp + (1.0 - a) * vq,
                    -(a * p * vp + (1.0 - a) * q * vq) / t,
                )
            }
        }
    }

    /// `phi'(t)`, analytic.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        Self::check_argument(t)?;
        Ok(self.slope(t))
    }

    #[inline]
    pub(crate) fn slope(&self, t: f64) -> f64 {
        match self.family {
            Family::Power { p } => -p * t.powf(-p - 1.0),
            Family::PowerMix { a, p, q } => {
                -a * p * t.powf(-p - 1.0) - (1.0 - a) * q * t.powf(-q - 1.0)
            }
        }
    }

    /// The unique `t > 0` with `phi(t) = y`.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !(y.is_finite() && y > 0.0) {
            return Err(ChordError::NonPositiveArgument(y));
        }
        match self.family {
            Family::Power { p } => Ok(y.powf(-1.0 / p)),
            Family::PowerMix { .. } => {
                // t -> y - phi(t) is increasing
                let g = |t: f64| y - self.value(t);
                let (lo, hi) = roots::bracket_increasing(g, 1.0)?;
                roots::solve_increasing(|t| (g(t), -self.slope(t)), lo, hi, 1e-15)
            }
        }
    }

    /// `(phi)'_r(1)`, which is strictly negative for every shipped family.
    pub fn right_derivative_at_one(&self) -> f64 {
        self.right_derivative
    }

    /// Every shipped family is strictly convex on `(0, inf)`.
    pub fn is_strictly_convex(&self) -> bool {
        true
    }

    /// Runs the class checks on a log-spaced grid and cross-checks the analytic
    /// right derivative at 1 against an extrapolated finite difference.
    pub fn validate(&self) -> ValidationReport {
        let mut report = validate_univariate(|t| self.value(t));
        let fd = finite_difference_right_derivative(|t| self.value(t));
        let diff = (fd - self.right_derivative).abs();
        report.push(
            "analytic right derivative matches finite differences",
            diff < 1e-6,
            format!("analytic {}, extrapolated {fd}", self.right_derivative),
        );
        report
    }
}

/// One-sided difference quotients at `h = 1e-4, 5e-5, 2.5e-5`, combined by
/// two rounds of Richardson extrapolation (leading error `O(h)`).
pub fn finite_difference_right_derivative<F: Fn(f64) -> f64>(f: F) -> f64 {
    let f1 = f(1.0);
    let q: Vec<f64> = [1e-4, 5e-5, 2.5e-5]
        .iter()
        .map(|h| (f(1.0 + h) - f1) / h)
        .collect();
    let r1 = 2.0 * q[1] - q[0];
    let r2 = 2.0 * q[2] - q[1];
    (4.0 * r2 - r1) / 3.0
}

/// Outcome of one class property check.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub property: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Pass/fail per property for a gauge.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<PropertyCheck>,
}

impl ValidationReport {
    fn push(&mut self, property: &'static str, passed: bool, detail: String) {
        self.checks.push(PropertyCheck {
            property,
            passed,
            detail,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropertyCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, property: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.property == property)
    }
}

/// 200 log-spaced points on `[1e-6, 1e6]`.
pub fn validation_grid() -> Vec<f64> {
    (0..200)
        .map(|k| 10f64.powf(-6.0 + 12.0 * k as f64 / 199.0))
        .collect()
}

/// Class checks for an arbitrary univariate function (used for the shipped
/// families and for user experiments with candidate gauges).
pub fn validate_univariate<F: Fn(f64) -> f64>(f: F) -> ValidationReport {
    let grid = validation_grid();
    let vals: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
    let mut report = ValidationReport::default();

    let positive = vals.iter().all(|v| *v > 0.0 && v.is_finite());
    report.push("positive", positive, String::new());

    let bad_decrease = vals.windows(2).position(|w| w[0] <= w[1]);
    report.push(
        "strictly decreasing",
        bad_decrease.is_none(),
        bad_decrease
            .map(|k| format!("not decreasing between t={} and t={}", grid[k], grid[k + 1]))
            .unwrap_or_default(),
    );

    // f(t1) must not exceed the chord through (t0, f0), (t2, f2), up to a
    // relative roundoff allowance of 1e-10.
    let mut worst = 0.0f64;
    for k in 1..grid.len() - 1 {
        let (t0, t1, t2) = (grid[k - 1], grid[k], grid[k + 1]);
        let chord = vals[k - 1] + (vals[k + 1] - vals[k - 1]) * (t1 - t0) / (t2 - t0);
        let excess = (vals[k] - chord) / chord.abs().max(1.0);
        worst = worst.max(excess);
    }
    report.push(
        "convex",
        worst <= 1e-10,
        format!("largest relative chord excess {worst:e}"),
    );

    let at_one = f(1.0);
    report.push(
        "normalized at 1",
        (at_one - 1.0).abs() <= 1e-14,
        format!("phi(1) = {at_one}"),
    );

    let near_zero = f(1e-8);
    let far = f(1e8);
    report.push(
        "blows up at 0+",
        near_zero > 1e6,
        format!("phi(1e-8) = {near_zero:e}"),
    );
    report.push(
        "vanishes at infinity",
        far < 1e-6,
        format!("phi(1e8) = {far:e}"),
    );

    let slope = finite_difference_right_derivative(&f);
    report.push(
        "negative right derivative at 1",
        slope < 0.0,
        format!("(phi)'_r(1) ~ {slope}"),
    );
    report
}

/// Internal representation of a multivariate gauge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum GaugeForm {
    /// `sum_j phi_j(x_j)`
    Sum { parts: Vec<OrliczFunction> },
    /// `sum_j x_j^-p`
    PowerSum { p: f64, arity: usize },
}

/// A validated gauge of arity `m >= 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaugeForm", into = "GaugeForm")]
pub struct OrliczGauge {
    form: GaugeForm,
}

impl TryFrom<GaugeForm> for OrliczGauge {
    type Error = ChordError;

    fn try_from(form: GaugeForm) -> Result<Self> {
        let arity = match &form {
            GaugeForm::Sum { parts } => parts.len(),
            GaugeForm::PowerSum { p, arity } => {
                check_exponent("p", *p)?;
                *arity
            }
        };
        if arity < 2 {
            return Err(ChordError::InvalidParameter(format!(
                "multivariate gauge needs arity >= 2, got {arity}"
            )));
        }
        Ok(OrliczGauge { form })
    }
}

impl From<OrliczGauge> for GaugeForm {
    fn from(g: OrliczGauge) -> GaugeForm {
        g.form
    }
}

impl OrliczGauge {
    pub fn sum(parts: Vec<OrliczFunction>) -> Result<Self> {
        GaugeForm::Sum { parts }.try_into()
    }

    pub fn power_sum(p: f64, arity: usize) -> Result<Self> {
        GaugeForm::PowerSum { p, arity }.try_into()
    }

    pub fn form(&self) -> &GaugeForm {
        &self.form
    }

    pub fn arity(&self) -> usize {
        match &self.form {
            GaugeForm::Sum { parts } => parts.len(),
            GaugeForm::PowerSum { arity, .. } => *arity,
        }
    }

    pub fn label(&self) -> String {
        match &self.form {
            GaugeForm::Sum { parts } => {
                let inner: Vec<String> = parts.iter().map(|p| p.label()).collect();
                format!("sum[{}]", inner.join(";"))
            }
            GaugeForm::PowerSum { p, arity } => format!("power_sum({p},{arity})"),
        }
    }

    /// The univariate summands; `PowerSum(p)` expands to `Power(p)` copies.
    pub fn univariate_terms(&self) -> Vec<OrliczFunction> {
        match &self.form {
            GaugeForm::Sum { parts } => parts.clone(),
            GaugeForm::PowerSum { p, arity } => {
                vec![OrliczFunction::power(*p).expect("validated exponent"); *arity]
            }
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.arity() {
            return Err(ChordError::DimensionMismatch {
                expected: self.arity(),
                found: x.len(),
            });
        }
        match &self.form {
            GaugeForm::Sum { parts } => parts
                .iter()
                .zip(x)
                .try_fold(0.0, |acc, (f, &t)| Ok(acc + f.evaluate(t)?)),
            GaugeForm::PowerSum { p, .. } => x.iter().try_fold(0.0, |acc, &t| {
                OrliczFunction::check_argument(t)?;
                Ok(acc + t.powf(-p))
            }),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let m = self.arity();
        validate_multivariate(|x| self.evaluate(x).unwrap_or(f64::NAN), m)
    }
}

/// Class checks for an arity-`m` gauge: monotone decrease in every variable
/// along log grids through random base points, random midpoint convexity, and
/// the unit normalizations.
pub fn validate_multivariate<F: Fn(&[f64]) -> f64>(f: F, arity: usize) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0c0f_fee5);
    let grid: Vec<f64> = (0..60)
        .map(|k| 10f64.powf(-3.0 + 6.0 * k as f64 / 59.0))
        .collect();

    let mut decreasing = true;
    let mut detail = String::new();
    'outer: for _ in 0..10 {
        let base: Vec<f64> = (0..arity)
            .map(|_| 10f64.powf(rng.random_range(-2.0..2.0)))
            .collect();
        for j in 0..arity {
            // strict decrease can be swamped by roundoff when the other
            // terms dominate, so require non-increase along the grid and a
            // strict drop end to end
            let mut prev = f64::INFINITY;
            let mut first = None;
            for &t in &grid {
                let mut x = base.clone();
                x[j] = t;
                let v = f(&x);
                if v.is_nan() || v > prev {
                    decreasing = false;
                    detail = format!("variable {j} not decreasing at {x:?}");
                    break 'outer;
                }
                first.get_or_insert(v);
                prev = v;
            }
            if first.is_some_and(|f0| !(prev < f0)) {
                decreasing = false;
                detail = format!("variable {j} is flat along the grid");
                break 'outer;
            }
        }
    }
    report.push("decreasing in each variable", decreasing, detail);

    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..arity)
            .map(|_| 10f64.powf(rng.random_range(-3.0..3.0)))
            .collect();
        let y: Vec<f64> = (0..arity)
            .map(|_| 10f64.powf(rng.random_range(-3.0..3.0)))
            .collect();
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let avg = 0.5 * (f(&x) + f(&y));
        worst = worst.max((f(&mid) - avg) / avg.abs().max(1.0));
    }
    report.push(
        "convex",
        worst <= 1e-10,
        format!("largest relative midpoint excess {worst:e}"),
    );

    let ones = vec![1.0; arity];
    let at_ones = f(&ones);
    report.push(
        "sum normalization phi(1,...,1) = m",
        (at_ones - arity as f64).abs() <= 1e-12,
        format!("phi(1,...,1) = {at_ones}"),
    );

    // phi(e_j) = 1 with the other arguments pushed to "infinity"
    let mut worst_axis = 0.0f64;
    for j in 0..arity {
        let mut x = vec![1e12; arity];
        x[j] = 1.0;
        worst_axis = worst_axis.max((f(&x) - 1.0).abs());
    }
    report.push(
        "axis normalization",
        worst_axis <= 1e-6,
        format!("largest |phi(e_j) - 1| = {worst_axis:e}"),
    );
    report
}
