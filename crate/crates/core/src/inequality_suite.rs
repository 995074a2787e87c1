//! Both sides of each chord-integral inequality and identity, with signed
//! slack, discretization error bars and equality detection.
//!
//! Sign convention: `slack >= 0` means the statement holds as written. For the
//! decomposition identity the slack should vanish.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chord_addition::{lp_chord_add, orlicz_chord_add, orlicz_chord_combine};
use crate::chord_integrals::{check_index, kernel};
use crate::error::{ChordError, Result};
use crate::orlicz_fn::{OrliczFunction, OrliczGauge};
use crate::quadrature::SphereQuadrature;
use crate::star_body::{proportionality, BodyExpr, StarBody};

/// Floor of the equality and violation thresholds for inequalities.
pub const EQUALITY_FLOOR: f64 = 1e-8;

/// Floor of the vanishing threshold for identities.
pub const IDENTITY_FLOOR: f64 = 1e-10;

/// Tolerance used when testing the equality witnesses on rule nodes.
pub const WITNESS_TOL: f64 = 1e-9;

/// Which check to run, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum CheckKind {
    MinkowskiIth,
    LpMinkowski {
        p: f64,
    },
    OrliczMinkowski {
        phi: OrliczFunction,
    },
    OrliczBm {
        gauge: OrliczGauge,
    },
    LpBm {
        p: f64,
    },
    Decomposition {
        phi1: OrliczFunction,
        phi2: OrliczFunction,
    },
    JensenBound {
        phi: OrliczFunction,
    },
}

impl CheckKind {
    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::MinkowskiIth => "minkowski_ith",
            CheckKind::LpMinkowski { .. } => "lp_minkowski",
            CheckKind::OrliczMinkowski { .. } => "orlicz_minkowski",
            CheckKind::OrliczBm { .. } => "orlicz_bm",
            CheckKind::LpBm { .. } => "lp_bm",
            CheckKind::Decomposition { .. } => "decomposition",
            CheckKind::JensenBound { .. } => "jensen_bound",
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, CheckKind::Decomposition { .. })
    }

    /// The exponent or gauge, as a short label for reports.
    pub fn parameter_label(&self) -> String {
        match self {
            CheckKind::MinkowskiIth => String::new(),
            CheckKind::LpMinkowski { p } | CheckKind::LpBm { p } => format!("p={p}"),
            CheckKind::OrliczMinkowski { phi } | CheckKind::JensenBound { phi } => phi.label(),
            CheckKind::OrliczBm { gauge } => gauge.label(),
            CheckKind::Decomposition { phi1, phi2 } => format!("{};{}", phi1.label(), phi2.label()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            CheckKind::LpMinkowski { p } | CheckKind::LpBm { p }
                if !(p.is_finite() && *p >= 1.0) =>
            {
                Err(ChordError::InvalidParameter(format!(
                    "p must be ≥ 1, got {p}"
                )))
            }
            CheckKind::OrliczBm { gauge } if gauge.arity() != 2 => Err(ChordError::ArityMismatch {
                expected: 2,
                found: gauge.arity(),
            }),
            _ => Ok(()),
        }
    }
}

/// Which equality condition the pair satisfies on the rule nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EqualityWitness {
    /// `d(K, .) = lambda d(L, .)`
    pub similar_chord: bool,
    /// `rho(K, .) = lambda rho(L, .)`
    pub dilates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// `slack / max(|lhs|, |rhs|)`
    pub relative_slack: f64,
    /// `|relative_slack(rule) - relative_slack(refined rule)|`
    pub error_estimate: f64,
    pub equality_flag: bool,
    pub identity: bool,
    pub witness: EqualityWitness,
    pub inputs_digest: String,
}

impl InequalityReport {
    /// Violation threshold in relative units.
    pub fn threshold(&self) -> f64 {
        let floor = if self.identity {
            IDENTITY_FLOOR
        } else {
            EQUALITY_FLOOR
        };
        (10.0 * self.error_estimate).max(floor)
    }

    pub fn holds(&self) -> bool {
        if self.identity {
            self.relative_slack.abs() <= self.threshold()
        } else {
            self.relative_slack >= -self.threshold()
        }
    }

    pub fn violated(&self) -> bool {
        !self.holds()
    }
}

/// A fully specified check, serializable as a replay digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckCase {
    #[serde(flatten)]
    pub check: CheckKind,
    pub i: usize,
    pub rule: String,
    pub k: BodyExpr,
    pub l: BodyExpr,
}

impl CheckCase {
    pub fn digest(&self) -> String {
        serde_json::to_string(self).expect("check cases serialize")
    }

    pub fn from_digest(digest: &str) -> serde_json::Result<Self> {
        serde_json::from_str(digest)
    }

    pub fn run(&self) -> Result<InequalityReport> {
        let rules = RulePair::new(SphereQuadrature::from_id(&self.rule)?)?;
        self.run_on(&rules)
    }

    /// Like [`CheckCase::run`] with prebuilt rules; `rules` must match `self.rule`.
    pub fn run_on(&self, rules: &RulePair) -> Result<InequalityReport> {
        let n = rules.coarse.dimension();
        let k = StarBody::from_expr(&self.k, n)?;
        let l = StarBody::from_expr(&self.l, n)?;
        let mut report = evaluate(&self.check, &k, &l, self.i, rules)?;
        report.inputs_digest = self.digest();
        Ok(report)
    }
}

/// A rule with its refinement, when the refinement is buildable.
#[derive(Debug, Clone)]
pub struct RulePair {
    pub coarse: SphereQuadrature,
    pub refined: SphereQuadrature,
}

impl RulePair {
    pub fn new(coarse: SphereQuadrature) -> Result<Self> {
        let refined = coarse.refined()?;
        Ok(RulePair { coarse, refined })
    }
}

struct Sides {
    lhs: f64,
    rhs: f64,
    slack: f64,
}

impl Sides {
    fn relative(&self) -> f64 {
        let scale = self.lhs.abs().max(self.rhs.abs());
        if scale == 0.0 {
            0.0
        } else {
            self.slack / scale
        }
    }
}

fn sides(
    kind: &CheckKind,
    k: &StarBody,
    l: &StarBody,
    i: usize,
    rule: &SphereQuadrature,
) -> Result<Sides> {
    let n = rule.dimension();
    let m = (n - i) as f64;
    let dk = k.half_chords_on(rule)?;
    let dl = l.half_chords_on(rule)?;
    let bk = kernel::chord_integral(rule, &dk, i)?;
    let bl = kernel::chord_integral(rule, &dl, i)?;
    let arcs = || (Arc::new(k.clone()), Arc::new(l.clone()));
    let out = match kind {
        CheckKind::MinkowskiIth => {
            let lhs = kernel::ith_mixed(rule, &dk, &dl, i)?.powf(m);
            let rhs = bk.powf(m - 1.0) * bl;
            Sides {
                lhs,
                rhs,
                slack: rhs - lhs,
            }
        }
        CheckKind::LpMinkowski { p } => {
            let lhs = kernel::lp_mixed(rule, &dk, &dl, i, *p)?.powf(m);
            let rhs = bk.powf(m + p) * bl.powf(-p);
            Sides {
                lhs,
                rhs,
                slack: lhs - rhs,
            }
        }
        CheckKind::OrliczMinkowski { phi } => {
            let lhs = kernel::orlicz_mixed(rule, &dk, &dl, i, phi)?;
            let rhs = bk * phi.evaluate((bl / bk).powf(1.0 / m))?;
            Sides {
                lhs,
                rhs,
                slack: lhs - rhs,
            }
        }
        CheckKind::JensenBound { phi } => {
            let mu = kernel::chord_measure(rule, &dk, i)?;
            let terms = dk
                .iter()
                .zip(&dl)
                .zip(&mu)
                .map(|((a, b), w)| Ok(w * phi.evaluate(b / a)?))
                .collect::<Result<Vec<f64>>>()?;
            let lhs = crate::quadrature::pairwise_sum(&terms);
            let rhs = phi.evaluate((bl / bk).powf(1.0 / m))?;
            Sides {
                lhs,
                rhs,
                slack: lhs - rhs,
            }
        }
        CheckKind::OrliczBm { gauge } => {
            let (ka, la) = arcs();
            let s = orlicz_chord_add(vec![ka, la], gauge)?;
            let bs = kernel::chord_integral(rule, &s.half_chords_on(rule)?, i)?;
            let x = [(bk / bs).powf(1.0 / m), (bl / bs).powf(1.0 / m)];
            let value = gauge.evaluate(&x)?;
            Sides {
                lhs: 1.0,
                rhs: value,
                slack: 1.0 - value,
            }
        }
        CheckKind::LpBm { p } => {
            let (ka, la) = arcs();
            let s = lp_chord_add(ka, la, *p, 1.0, 1.0)?;
            let bs = kernel::chord_integral(rule, &s.half_chords_on(rule)?, i)?;
            let e = -p / m;
            let lhs = bs.powf(e);
            let rhs = bk.powf(e) + bl.powf(e);
            Sides {
                lhs,
                rhs,
                slack: lhs - rhs,
            }
        }
        CheckKind::Decomposition { phi1, phi2 } => {
            let (ka, la) = arcs();
            let s = orlicz_chord_combine(vec![ka, la], vec![1.0, 1.0], vec![*phi1, *phi2])?;
            let ds = s.half_chords_on(rule)?;
            let lhs = kernel::chord_integral(rule, &ds, i)?;
            let rhs = kernel::orlicz_mixed(rule, &ds, &dk, i, phi1)?
                + kernel::orlicz_mixed(rule, &ds, &dl, i, phi2)?;
            Sides {
                lhs,
                rhs,
                slack: lhs - rhs,
            }
        }
    };
    Ok(out)
}

fn evaluate(
    kind: &CheckKind,
    k: &StarBody,
    l: &StarBody,
    i: usize,
    rules: &RulePair,
) -> Result<InequalityReport> {
    let rule = &rules.coarse;
    let n = rule.dimension();
    for body in [k, l] {
        if body.dim() != n {
            return Err(ChordError::DimensionMismatch {
                expected: n,
                found: body.dim(),
            });
        }
    }
    check_index(i, n)?;
    kind.validate()?;

    let coarse = sides(kind, k, l, i, rule)?;
    let relative_slack = coarse.relative();
    let error_estimate = match sides(kind, k, l, i, &rules.refined) {
        Ok(fine) => (relative_slack - fine.relative()).abs(),
        Err(ChordError::OffRule { .. }) => 0.0,
        Err(e) => return Err(e),
    };
    let witness = EqualityWitness {
        similar_chord: proportionality(
            &k.half_chords_on(rule)?,
            &l.half_chords_on(rule)?,
            WITNESS_TOL,
        )
        .is_similar,
        dilates: proportionality(&k.radii_on(rule)?, &l.radii_on(rule)?, WITNESS_TOL).is_similar,
    };
    let case = CheckCase {
        check: kind.clone(),
        i,
        rule: rule.rule_id(),
        k: k.to_expr(),
        l: l.to_expr(),
    };
    Ok(InequalityReport {
        name: kind.name().to_string(),
        lhs: coarse.lhs,
        rhs: coarse.rhs,
        slack: coarse.slack,
        relative_slack,
        error_estimate,
        equality_flag: relative_slack.abs() < (10.0 * error_estimate).max(EQUALITY_FLOOR),
        identity: kind.is_identity(),
        witness,
        inputs_digest: case.digest(),
    })
}

/// Runs `kind` on `(K, L)` with the error estimate taken against the refined rule.
pub fn run_check(
    kind: &CheckKind,
    k: &StarBody,
    l: &StarBody,
    i: usize,
    rule: &SphereQuadrature,
) -> Result<InequalityReport> {
    evaluate(kind, k, l, i, &RulePair::new(rule.clone())?)
}

/// `B_i(K)^(n-i-1) B_i(L) >= B_i(K, L)^(n-i)`.
pub fn check_minkowski_ith(
    k: &StarBody,
    l: &StarBody,
    i: usize,
    rule: &SphereQuadrature,
) -> Result<InequalityReport> {
    run_check(&CheckKind::MinkowskiIth, k, l, i, rule)
}

/// `B_-p,i(K, L)^(n-i) >= B_i(K)^(n-i+p) B_i(L)^-p`.
pub fn check_lp_minkowski(
    k: &StarBody,
    l: &StarBody,
    i: usize,
    p: f64,
    rule: &SphereQuadrature,
) -> Result<InequalityReport> {
    run_check(&CheckKind::LpMinkowski { p }, k, l, i, rule)
}

/// `B_phi,i(K, L) >= B_i(K) phi((B_i(L) / B_i(K))^(1/(n-i)))`.
pub fn check_orlicz_minkowski(
    k: &StarBody,
    l: &StarBody,
    i: usize,
    phi: &OrliczFunction,
    rule: &SphereQuadrature,
) -> Result<InequalityReport> {
    run_check(&CheckKind::OrliczMinkowski { phi: *phi }, k, l, i, rule)
}

/// `1 >= phi((B_i(K)/B_i(S))^(1/(n-i)), (B_i(L)/B_i(S))^(1/(n-i)))` with
/// `S` the Orlicz chord sum of `K` and `L` under `gauge`.
pub fn check_orlicz_bm(
    k: &StarBody,
    l: &StarBody,
    i: usize,
    gauge: &OrliczGauge,
    rule: &SphereQuadrature,
) -> Result<InequalityReport> {
    run_check(
        &CheckKind::OrliczBm {
            gauge: gauge.clone(),
        },
        k,
        l,
        i,
        rule,
    )
}

/// `B_i(K +_p L)^(-p/(n-i)) >= B_i(K)^(-p/(n-i)) + B_i(L)^(-p/(n-i))`.
pub fn check_lp_bm(
    k: &StarBody,
    l: &StarBody,
    i: usize,
    p: f64,
    rule: &SphereQuadrature,
) -> Result<InequalityReport> {
    run_check(&CheckKind::LpBm { p }, k, l, i, rule)
}

/// `B_i(S) = B_phi1,i(S, K) + B_phi2,i(S, L)` with `S` the Orlicz chord sum
/// under `(phi1, phi2)`.
pub fn check_decomposition(
    k: &StarBody,
    l: &StarBody,
    i: usize,
    phi1: &OrliczFunction,
    phi2: &OrliczFunction,
    rule: &SphereQuadrature,
) -> Result<InequalityReport> {
    run_check(
        &CheckKind::Decomposition {
            phi1: *phi1,
            phi2: *phi2,
        },
        k,
        l,
        i,
        rule,
    )
}

/// `int phi(d_L / d_K) dmu >= phi((B_i(L) / B_i(K))^(1/(n-i)))` against the
/// chord measure `mu` of `K`.
pub fn check_jensen_bound(
    k: &StarBody,
    l: &StarBody,
    i: usize,
    phi: &OrliczFunction,
    rule: &SphereQuadrature,
) -> Result<InequalityReport> {
    run_check(&CheckKind::JensenBound { phi: *phi }, k, l, i, rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chord_integrals::{chord_integral, orlicz_mixed_chord};

    fn rule() -> SphereQuadrature {
        SphereQuadrature::gauss_product(16, 32).unwrap()
    }

    fn ellipsoid() -> StarBody {
        StarBody::ellipsoid(vec![1.0, 2.0, 3.0], None).unwrap()
    }

    fn shifted() -> StarBody {
        StarBody::ball(vec![0.0, 0.0, 0.3], 1.0).unwrap()
    }

    fn power(p: f64) -> OrliczFunction {
        OrliczFunction::power(p).unwrap()
    }

    #[test]
    fn minkowski_ith_cases() {
        let r = rule();
        let k = ellipsoid();
        let dilated = StarBody::dilate(2.0, k.clone()).unwrap();
        let eq = check_minkowski_ith(&k, &dilated, 1, &r).unwrap();
        assert!(eq.equality_flag && eq.holds());
        assert!(eq.witness.similar_chord && eq.witness.dilates);
        let strict = check_minkowski_ith(&StarBody::unit_ball(3), &k, 0, &r).unwrap();
        assert!(strict.slack > 0.0 && !strict.equality_flag);
        let same = check_minkowski_ith(&k, &k, 2, &r).unwrap();
        assert!(same.relative_slack.abs() < 1e-15);
    }

    #[test]
    fn ball_pair_minkowski_values() {
        let r = rule();
        let (k, l) = (
            StarBody::unit_ball(3),
            StarBody::centered_ball(3, 2.0).unwrap(),
        );
        let rep = check_minkowski_ith(&k, &l, 0, &r).unwrap();
        let pi = std::f64::consts::PI;
        assert!((rep.lhs - (8.0 * pi / 3.0).powi(3)).abs() < 1e-9);
        assert!((rep.rhs - (4.0 * pi / 3.0).powi(2) * 32.0 * pi / 3.0).abs() < 1e-9);
        let o = check_orlicz_minkowski(&k, &l, 0, &power(2.0), &r).unwrap();
        assert!((o.lhs - pi / 3.0).abs() < 1e-12 && (o.rhs - pi / 3.0).abs() < 1e-12);
        assert!(o.equality_flag);
    }

    #[test]
    fn lp_minkowski_and_orlicz_agree_on_verdicts() {
        let r = rule();
        let pairs = [
            (StarBody::unit_ball(3), shifted()),
            (ellipsoid(), StarBody::dilate(0.5, ellipsoid()).unwrap()),
            (shifted(), ellipsoid()),
        ];
        for (k, l) in &pairs {
            for i in 0..3 {
                let a = check_lp_minkowski(k, l, i, 2.0, &r).unwrap();
                let b = check_orlicz_minkowski(k, l, i, &power(2.0), &r).unwrap();
                assert_eq!(a.holds(), b.holds());
                assert_eq!(a.equality_flag, b.equality_flag);
            }
        }
        let strict = check_lp_minkowski(&StarBody::unit_ball(3), &shifted(), 0, 1.5, &r).unwrap();
        assert!(strict.slack > 0.0 && !strict.equality_flag);
        assert!(check_lp_minkowski(&ellipsoid(), &shifted(), 0, 0.5, &r).is_err());
    }

    #[test]
    fn orlicz_bm_ball_cases() {
        let r = rule();
        let ball = StarBody::unit_ball(3);
        let g = OrliczGauge::power_sum(2.0, 2).unwrap();
        let rep = check_orlicz_bm(&ball, &ball, 0, &g, &r).unwrap();
        assert!((rep.rhs - 1.0).abs() < 1e-12 && rep.equality_flag);
        let big = StarBody::centered_ball(3, 2.0).unwrap();
        for p in [1.0, 2.5] {
            let g = OrliczGauge::power_sum(p, 2).unwrap();
            assert!(
                check_orlicz_bm(&ball, &big, 1, &g, &r)
                    .unwrap()
                    .equality_flag
            );
        }
        let strict = check_orlicz_bm(&ball, &ellipsoid(), 0, &g, &r).unwrap();
        assert!(strict.slack > 0.0 && !strict.equality_flag);
        let ternary = OrliczGauge::power_sum(2.0, 3).unwrap();
        assert!(check_orlicz_bm(&ball, &big, 0, &ternary, &r).is_err());
    }

    #[test]
    fn lp_bm_cases() {
        let r = rule();
        let (k, l) = (
            StarBody::unit_ball(3),
            StarBody::centered_ball(3, 2.0).unwrap(),
        );
        assert!(check_lp_bm(&k, &l, 0, 3.0, &r).unwrap().equality_flag);
        let strict = check_lp_bm(&k, &shifted(), 0, 1.0, &r).unwrap();
        assert!(strict.slack > 0.0 && !strict.equality_flag);
    }

    #[test]
    fn decomposition_vanishes() {
        let r = rule();
        let k = StarBody::perturbed_sphere(
            3,
            1.0,
            vec![crate::star_body::RidgeTerm {
                amplitude: 0.2,
                direction: vec![0.0, 0.6, 0.8],
                degree: 3,
            }],
        )
        .unwrap();
        let mix = OrliczFunction::power_mix(0.3, 1.0, 3.0).unwrap();
        for (a, b) in [(power(2.0), power(2.0)), (mix, power(1.5))] {
            for i in 0..3 {
                let rep = check_decomposition(&k, &ellipsoid(), i, &a, &b, &r).unwrap();
                assert!(rep.relative_slack.abs() < 1e-10, "{}", rep.relative_slack);
                assert!(rep.holds());
            }
        }
    }

    #[test]
    fn jensen_lhs_matches_orlicz_ratio() {
        let r = rule();
        let (k, l) = (ellipsoid(), shifted());
        let phi = power(2.0);
        for i in 0..3 {
            let rep = check_jensen_bound(&k, &l, i, &phi, &r).unwrap();
            let ratio = orlicz_mixed_chord(&k, &l, i, &phi, &r).unwrap().value
                / chord_integral(&k, i, &r).unwrap().value;
            assert!((rep.lhs - ratio).abs() < 1e-13 * ratio.abs().max(1.0));
            assert!(rep.slack > 0.0);
        }
        let dil = StarBody::dilate(3.0, k.clone()).unwrap();
        assert!(
            check_jensen_bound(&k, &dil, 1, &phi, &r)
                .unwrap()
                .equality_flag
        );
    }

    #[test]
    fn digest_round_trip_is_bitwise() {
        let r = rule();
        let rep = check_orlicz_minkowski(&ellipsoid(), &shifted(), 1, &power(1.5), &r).unwrap();
        let case = CheckCase::from_digest(&rep.inputs_digest).unwrap();
        let again = case.run().unwrap();
        assert_eq!(again.slack.to_bits(), rep.slack.to_bits());
        assert_eq!(again.inputs_digest, rep.inputs_digest);
        assert!(CheckCase::from_digest("{\"check\":\"lp_bm\"").is_err());
    }

    #[test]
    fn index_and_dimension_errors() {
        let r = rule();
        let k = ellipsoid();
        assert!(matches!(
            check_minkowski_ith(&k, &k, 3, &r),
            Err(ChordError::IndexOutOfRange { .. })
        ));
        let disk = StarBody::unit_ball(2);
        assert!(matches!(
            check_minkowski_ith(&k, &disk, 0, &r),
            Err(ChordError::DimensionMismatch { .. })
        ));
    }
}
