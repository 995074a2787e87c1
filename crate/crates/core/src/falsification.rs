//! Randomized search for counterexamples to the chord inequalities.
//!
//! Each trial draws its own generator stream from `(seed, trial)`, so results
//! do not depend on scheduling or thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chord_integrals::kernel;
use crate::error::Result;
use crate::generators::{
    random_body, random_orlicz, random_sl, trial_rng, ShapeFamily, DEFAULT_MAX_CONDITION,
};
use crate::inequality_suite::{CheckCase, CheckKind, InequalityReport, RulePair};
use crate::orlicz_fn::OrliczGauge;
use crate::quadrature::SphereQuadrature;
use crate::star_body::StarBody;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    MinkowskiIth,
    LpMinkowski,
    OrliczMinkowski,
    OrliczBm,
    LpBm,
    Decomposition,
    JensenBound,
}

impl CheckName {
    pub const ALL: [CheckName; 7] = [
        CheckName::MinkowskiIth,
        CheckName::LpMinkowski,
        CheckName::OrliczMinkowski,
        CheckName::OrliczBm,
        CheckName::LpBm,
        CheckName::Decomposition,
        CheckName::JensenBound,
    ];
}

fn default_families() -> Vec<ShapeFamily> {
    ShapeFamily::ALL.to_vec()
}

fn default_keep() -> usize {
    10
}

/// What to generate and which checks to run on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpec {
    pub rule: String,
    pub checks: Vec<CheckName>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_families")]
    pub families: Vec<ShapeFamily>,
    /// Number of worst cases to keep.
    #[serde(default = "default_keep")]
    pub keep: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialError {
    pub trial: usize,
    pub check: CheckName,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub evaluated: usize,
    pub violations: usize,
    pub min_slack: f64,
    pub min_relative_slack: f64,
    /// The `keep` reports with the smallest relative slack, ascending.
    pub worst: Vec<InequalityReport>,
    pub errors: Vec<TrialError>,
}

/// The check instance drawn for one trial.
fn draw_case<R: Rng>(
    rng: &mut R,
    name: CheckName,
    n: usize,
    i: usize,
    rule: &str,
    spec: &SearchSpec,
) -> CheckCase {
    let body = |rng: &mut R| {
        let family = spec.families[rng.random_range(0..spec.families.len())];
        random_body(rng, n, family)
    };
    let k = body(rng);
    let l = body(rng);
    let check = match name {
        CheckName::MinkowskiIth => CheckKind::MinkowskiIth,
        CheckName::LpMinkowski => CheckKind::LpMinkowski {
            p: rng.random_range(1.0..=4.0),
        },
        CheckName::OrliczMinkowski => CheckKind::OrliczMinkowski {
            phi: random_orlicz(rng),
        },
        CheckName::OrliczBm => CheckKind::OrliczBm {
            gauge: OrliczGauge::sum(vec![random_orlicz(rng), random_orlicz(rng)]).expect("arity 2"),
        },
        CheckName::LpBm => CheckKind::LpBm {
            p: rng.random_range(1.0..=4.0),
        },
        CheckName::Decomposition => CheckKind::Decomposition {
            phi1: random_orlicz(rng),
            phi2: random_orlicz(rng),
        },
        CheckName::JensenBound => CheckKind::JensenBound {
            phi: random_orlicz(rng),
        },
    };
    CheckCase {
        check,
        i,
        rule: rule.to_string(),
        k,
        l,
    }
}

/// The cases a search with `spec` evaluates, in trial-major order.
pub fn search_cases(spec: &SearchSpec, n: usize) -> Vec<(usize, CheckName, CheckCase)> {
    (0..spec.trials)
        .flat_map(|trial| {
            let mut rng = trial_rng(spec.seed, trial as u64);
            let i = rng.random_range(0..n);
            spec.checks
                .iter()
                .map(|&name| {
                    (
                        trial,
                        name,
                        draw_case(&mut rng, name, n, i, &spec.rule, spec),
                    )
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

pub fn falsification_search(spec: &SearchSpec) -> Result<SearchOutcome> {
    if spec.trials == 0 || spec.checks.is_empty() || spec.families.is_empty() {
        return Err(crate::error::ChordError::InvalidParameter(
            "search needs at least one trial, check and shape family".into(),
        ));
    }
    let rules = RulePair::new(SphereQuadrature::from_id(&spec.rule)?)?;
    let cases = search_cases(spec, rules.coarse.dimension());
    let results: Vec<_> = cases
        .par_iter()
        .map(|(trial, name, case)| (*trial, *name, case.run_on(&rules)))
        .collect();

    let mut reports = Vec::new();
    let mut errors = Vec::new();
    for (trial, check, result) in results {
        match result {
            Ok(r) => reports.push(r),
            Err(e) => errors.push(TrialError {
                trial,
                check,
                message: e.to_string(),
            }),
        }
    }
    let violations = reports.iter().filter(|r| r.violated()).count();
    let min_slack = reports
        .iter()
        .map(|r| r.slack)
        .fold(f64::INFINITY, f64::min);
    let min_relative_slack = reports
        .iter()
        .map(|r| r.relative_slack)
        .fold(f64::INFINITY, f64::min);
    let evaluated = reports.len();
    // stable sort keeps trial order among ties
    reports.sort_by(|a, b| a.relative_slack.total_cmp(&b.relative_slack));
    reports.truncate(spec.keep);
    Ok(SearchOutcome {
        evaluated,
        violations,
        min_slack,
        min_relative_slack,
        worst: reports,
        errors,
    })
}

/// One paired evaluation of `B_phi,i` before and after a random unimodular map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftSample {
    pub trial: usize,
    pub i: usize,
    pub before: f64,
    pub after: f64,
    pub relative_drift: f64,
    /// Coarse-vs-refined difference of the mapped value, relative.
    pub error_estimate: f64,
}

/// Measures `|B_phi,i(AK, AL) / B_phi,i(K, L) - 1|` for random ellipsoid/ball
/// pairs, gauges and `A` in SL(n).
pub fn sl_drift_probe(
    rule: &SphereQuadrature,
    trials: usize,
    seed: u64,
    indices: &[usize],
) -> Result<Vec<DriftSample>> {
    let n = rule.dimension();
    let refined = rule.refined()?;
    let jobs: Vec<(usize, usize)> = (0..trials)
        .flat_map(|t| indices.iter().map(move |&i| (t, i)))
        .collect();
    jobs.par_iter()
        .map(|&(trial, i)| {
            crate::chord_integrals::check_index(i, n)?;
            let mut rng = trial_rng(seed, trial as u64);
            let k = StarBody::from_expr(&random_body(&mut rng, n, ShapeFamily::Ellipsoid), n)?;
            let l = StarBody::from_expr(&random_body(&mut rng, n, ShapeFamily::Ball), n)?;
            let phi = random_orlicz(&mut rng);
            let a = random_sl(&mut rng, n, DEFAULT_MAX_CONDITION);
            let ak = StarBody::linear_image(a.clone(), k.clone())?;
            let al = StarBody::linear_image(a, l.clone())?;
            let value = |x: &StarBody, y: &StarBody, r: &SphereQuadrature| {
                kernel::orlicz_mixed(r, &x.half_chords_on(r)?, &y.half_chords_on(r)?, i, &phi)
            };
            let before = value(&k, &l, rule)?;
            let after = value(&ak, &al, rule)?;
            let after_fine = value(&ak, &al, &refined)?;
            Ok(DriftSample {
                trial,
                i,
                before,
                after,
                relative_drift: (after / before - 1.0).abs(),
                error_estimate: ((after - after_fine) / after).abs(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(checks: Vec<CheckName>, trials: usize) -> SearchSpec {
        SearchSpec {
            rule: "gauss3:16x32".into(),
            checks,
            trials,
            seed: 11,
            families: default_families(),
            keep: 10,
        }
    }

    #[test]
    fn small_search_finds_no_violation() {
        let out = falsification_search(&spec(CheckName::ALL.to_vec(), 6)).unwrap();
        assert!(out.errors.is_empty(), "{:?}", out.errors);
        assert_eq!(out.evaluated, 42);
        assert_eq!(out.violations, 0);
        assert_eq!(out.worst.len(), 10);
        assert!(out
            .worst
            .windows(2)
            .all(|w| w[0].relative_slack <= w[1].relative_slack));
        assert_eq!(out.worst[0].relative_slack, out.min_relative_slack);
    }

    #[test]
    fn search_is_deterministic_and_replayable() {
        let s = spec(vec![CheckName::OrliczBm, CheckName::LpMinkowski], 4);
        let a = falsification_search(&s).unwrap();
        let b = falsification_search(&s).unwrap();
        assert_eq!(a, b);
        let replay = CheckCase::from_digest(&a.worst[0].inputs_digest)
            .unwrap()
            .run()
            .unwrap();
        assert_eq!(replay.slack.to_bits(), a.worst[0].slack.to_bits());
    }

    #[test]
    fn empty_search_is_rejected() {
        assert!(falsification_search(&spec(vec![], 3)).is_err());
        assert!(falsification_search(&spec(vec![CheckName::LpBm], 0)).is_err());
    }

    #[test]
    fn drift_probe_at_zero_index_is_within_error() {
        let rule = SphereQuadrature::gauss_product(32, 64).unwrap();
        for s in sl_drift_probe(&rule, 3, 5, &[0]).unwrap() {
            assert!(
                s.relative_drift < (3.0 * s.error_estimate).max(1e-9),
                "{s:?}"
            );
        }
    }
}
