//! Task execution for `run`.

use std::time::Instant;

use chord_core::chord_integrals::{variational_estimate, IntegralResult};
use chord_core::inequality_suite::RulePair;
use chord_core::{
    chord_integral, falsification_search, ith_mixed_chord, lp_mixed_chord, mixed_chord_integral,
    orlicz_mixed_chord, BodyExpr, OrliczFunction, StarBody,
};
use serde::Serialize;

use crate::config::{Functional, Scene, Task};
use crate::report::{ReportRow, Status};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

#[derive(Serialize)]
struct IntegrateDigest<'a> {
    functional: &'static str,
    bodies: &'a [BodyExpr],
    i: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    phi: Option<OrliczFunction>,
    rule: String,
}

fn build(exprs: &[BodyExpr], n: usize) -> chord_core::Result<Vec<StarBody>> {
    exprs.iter().map(|e| StarBody::from_expr(e, n)).collect()
}

fn integrate(
    scene: &Scene,
    functional: Functional,
    bodies: &[StarBody],
    i: usize,
    p: Option<f64>,
    phi: Option<&OrliczFunction>,
) -> chord_core::Result<IntegralResult> {
    let rule = &scene.rule;
    match functional {
        Functional::ChordIntegral => chord_integral(&bodies[0], i, rule),
        Functional::Mixed => mixed_chord_integral(&bodies.iter().collect::<Vec<_>>(), rule),
        Functional::IthMixed => ith_mixed_chord(&bodies[0], &bodies[1], i, rule),
        Functional::LpMixed => {
            lp_mixed_chord(&bodies[0], &bodies[1], i, p.expect("resolved"), rule)
        }
        Functional::OrliczMixed => {
            orlicz_mixed_chord(&bodies[0], &bodies[1], i, phi.expect("resolved"), rule)
        }
    }
}

fn run_task(
    scene: &Scene,
    id: &str,
    task: &Task,
    rules: &chord_core::Result<RulePair>,
) -> Vec<ReportRow> {
    let n = scene.dimension;
    let rule_id = scene.rule.rule_id();
    let mut row = ReportRow::new(id, task.kind(), "", &rule_id);
    match task {
        Task::Integrate {
            functional,
            bodies,
            i,
            p,
            phi,
        } => {
            row.functional = functional.name().to_string();
            row.i = (*functional != Functional::Mixed).then_some(*i);
            row.parameter = match (p, phi) {
                (Some(p), _) => format!("p={p}"),
                (_, Some(phi)) => phi.label(),
                _ => String::new(),
            };
            row.inputs_digest = serde_json::to_string(&IntegrateDigest {
                functional: functional.name(),
                bodies,
                i: *i,
                p: *p,
                phi: *phi,
                rule: rule_id.clone(),
            })
            .expect("digest serializes");
            match build(bodies, n)
                .and_then(|b| integrate(scene, *functional, &b, *i, *p, phi.as_ref()))
            {
                Ok(r) => {
                    row.value = Some(r.value);
                    row.error_estimate = Some(r.error_estimate);
                    vec![row]
                }
                Err(e) => vec![row.failed(e)],
            }
        }
        Task::Add { body, i } => {
            row.functional = "chord_integral_of_sum".into();
            row.i = Some(*i);
            row.inputs_digest = serde_json::to_string(body).expect("digest serializes");
            match StarBody::from_expr(body, n).and_then(|b| chord_integral(&b, *i, &scene.rule)) {
                Ok(r) => {
                    row.value = Some(r.value);
                    row.error_estimate = Some(r.error_estimate);
                    vec![row]
                }
                Err(e) => vec![row.failed(e)],
            }
        }
        Task::Check(case) => {
            row.i = Some(case.i);
            row.functional = case.check.name().to_string();
            row.parameter = case.check.parameter_label();
            row.inputs_digest = case.digest();
            let result = match rules {
                Ok(r) => case.run_on(r),
                Err(e) => Err(e.clone()),
            };
            match result {
                Ok(report) => vec![row.with_check(&report)],
                Err(e) => vec![row.failed(e)],
            }
        }
        Task::Search(spec) => {
            row.functional = "falsification_search".into();
            row.parameter = format!(
                "trials={} seed={} keep={}",
                spec.trials, spec.seed, spec.keep
            );
            row.inputs_digest = serde_json::to_string(spec).expect("digest serializes");
            match falsification_search(spec) {
                Ok(out) => {
                    row.slack = Some(out.min_slack);
                    row.relative_slack = Some(out.min_relative_slack);
                    row.value = Some(out.evaluated as f64);
                    row.message = format!(
                        "evaluated={} violations={} errors={}",
                        out.evaluated,
                        out.violations,
                        out.errors.len()
                    );
                    if let Some(first) = out.errors.first() {
                        row.message.push_str(&format!(
                            "; trial {} {:?}: {}",
                            first.trial, first.check, first.message
                        ));
                    }
                    row.status = if !out.errors.is_empty() {
                        Status::Error
                    } else if out.violations > 0 {
                        Status::Violated
                    } else {
                        Status::Ok
                    };
                    let mut rows = vec![row];
                    for (k, report) in out.worst.iter().enumerate() {
                        let mut worst =
                            ReportRow::new(&format!("{id}#{}", k + 1), "search", "", &rule_id)
                                .with_check(report);
                        if let Ok(case) = chord_core::CheckCase::from_digest(&report.inputs_digest)
                        {
                            worst.i = Some(case.i);
                            worst.parameter = case.check.parameter_label();
                        }
                        rows.push(worst);
                    }
                    rows
                }
                Err(e) => vec![row.failed(e)],
            }
        }
        Task::Variational {
            k,
            l,
            i,
            phi1,
            phi2,
            schedule,
        } => {
            row.functional = "variational_derivative".into();
            row.i = Some(*i);
            row.parameter = format!("{};{}", phi1.label(), phi2.label());
            row.inputs_digest = serde_json::json!({
                "k": k, "l": l, "i": i, "phi1": phi1, "phi2": phi2, "schedule": schedule, "rule": rule_id,
            })
            .to_string();
            let result = build(&[k.clone(), l.clone()], n).and_then(|b| {
                let est =
                    variational_estimate(&b[0], &b[1], *i, phi1, phi2, &scene.rule, schedule)?;
                let direct = orlicz_mixed_chord(&b[0], &b[1], *i, phi2, &scene.rule)?;
                Ok((est.value, direct.value))
            });
            match result {
                Ok((estimate, direct)) => {
                    row.value = Some(estimate);
                    row.lhs = Some(estimate);
                    row.rhs = Some(direct);
                    row.error_estimate = Some(((estimate - direct) / direct).abs());
                    row.message =
                        "rhs is the integral representation; error_estimate is the relative gap"
                            .into();
                    vec![row]
                }
                Err(e) => vec![row.failed(e)],
            }
        }
    }
}

/// Runs every task in order. Task failures become `error` rows.
pub fn run_scene(scene: &Scene) -> Vec<ReportRow> {
    let rules = RulePair::new(scene.rule.clone());
    let mut rows = Vec::new();
    for (id, task) in &scene.tasks {
        let start = Instant::now();
        let mut produced = run_task(scene, id, task, &rules);
        let elapsed = start.elapsed().as_secs_f64();
        for r in &mut produced {
            r.wall_time_s = elapsed;
        }
        rows.extend(produced);
    }
    rows
}

/// 1 if any row errored, else 2 if any check was violated, else 0.
pub fn exit_code(rows: &[ReportRow]) -> i32 {
    if rows.iter().any(|r| r.status == Status::Error) {
        EXIT_ERROR
    } else if rows.iter().any(|r| r.status == Status::Violated) {
        EXIT_VIOLATION
    } else {
        EXIT_OK
    }
}
