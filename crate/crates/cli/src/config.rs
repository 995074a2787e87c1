//! Scene configuration: a TOML file naming bodies, gauges and tasks.
//!
//! Bodies and gauges live in named tables; internal body nodes and tasks refer
//! to them by name. Resolution turns every reference into a self-contained
//! [`BodyExpr`] so each task can be replayed on its own.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use chord_core::chord_integrals::DEFAULT_EPS_SCHEDULE;
use chord_core::falsification::{CheckName, SearchSpec};
use chord_core::generators::ShapeFamily;
use chord_core::star_body::RidgeTerm;
use chord_core::{
    BodyExpr, CheckCase, CheckKind, OrliczFunction, OrliczGauge, SphereQuadrature, StarBody,
};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// Syntax and schema errors; the message carries line and column.
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.to_string(),
    }
}

fn one() -> f64 {
    1.0
}

fn ten() -> usize {
    10
}

/// A body definition; child bodies and gauges are referenced by name.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodySpec {
    Ball {
        radius: f64,
        center: Option<Vec<f64>>,
    },
    Ellipsoid {
        semi_axes: Vec<f64>,
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
        body: String,
    },
    Dilate {
        factor: f64,
        body: String,
    },
    LpAdd {
        p: f64,
        #[serde(default = "one")]
        alpha: f64,
        #[serde(default = "one")]
        beta: f64,
        left: String,
        right: String,
    },
    OrliczAdd {
        parts: Vec<String>,
        coefficients: Option<Vec<f64>>,
        gauges: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    ChordIntegral,
    Mixed,
    IthMixed,
    LpMixed,
    OrliczMixed,
}

impl Functional {
    pub fn name(self) -> &'static str {
        match self {
            Functional::ChordIntegral => "chord_integral",
            Functional::Mixed => "mixed",
            Functional::IthMixed => "ith_mixed",
            Functional::LpMixed => "lp_mixed",
            Functional::OrliczMixed => "orlicz_mixed",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSpec {
    Integrate {
        id: Option<String>,
        functional: Functional,
        bodies: Vec<String>,
        #[serde(default)]
        i: usize,
        p: Option<f64>,
        phi: Option<String>,
    },
    Add {
        id: Option<String>,
        body: String,
        #[serde(default)]
        i: usize,
    },
    Check {
        id: Option<String>,
        check: CheckName,
        k: String,
        l: String,
        #[serde(default)]
        i: usize,
        p: Option<f64>,
        phi: Option<String>,
        gauges: Option<Vec<String>>,
    },
    Search {
        id: Option<String>,
        checks: Vec<CheckName>,
        trials: usize,
        families: Option<Vec<ShapeFamily>>,
        #[serde(default = "ten")]
        keep: usize,
    },
    Variational {
        id: Option<String>,
        k: String,
        l: String,
        #[serde(default)]
        i: usize,
        phi1: String,
        phi2: String,
        schedule: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub dimension: usize,
    pub rule: String,
    #[serde(default)]
    pub seed: u64,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub bodies: BTreeMap<String, BodySpec>,
    #[serde(default)]
    pub gauges: BTreeMap<String, OrliczFunction>,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
}

/// Command-line overrides applied before validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub rule: Option<String>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub enum Task {
    Integrate {
        functional: Functional,
        bodies: Vec<BodyExpr>,
        i: usize,
        p: Option<f64>,
        phi: Option<OrliczFunction>,
    },
    Add {
        body: BodyExpr,
        i: usize,
    },
    Check(CheckCase),
    Search(SearchSpec),
    Variational {
        k: BodyExpr,
        l: BodyExpr,
        i: usize,
        phi1: OrliczFunction,
        phi2: OrliczFunction,
        schedule: Vec<f64>,
    },
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::Integrate { .. } => "integrate",
            Task::Add { .. } => "add",
            Task::Check(_) => "check",
            Task::Search(_) => "search",
            Task::Variational { .. } => "variational",
        }
    }
}

/// A validated scene with every reference resolved.
#[derive(Debug, Clone)]
pub struct Scene {
    pub dimension: usize,
    pub rule: SphereQuadrature,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub tasks: Vec<(String, Task)>,
}

impl SceneConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string().trim_end().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn resolve(mut self, overrides: &Overrides) -> Result<Scene, ConfigError> {
        if let Some(rule) = &overrides.rule {
            self.rule = rule.clone();
        }
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(out) = &overrides.out {
            self.output = Some(out.clone());
        }
        let rule = SphereQuadrature::from_id(&self.rule).map_err(|e| invalid("rule", e))?;
        if rule.dimension() != self.dimension {
            return Err(invalid(
                "rule",
                format!(
                    "rule `{}` is for dimension {}, scene dimension is {}",
                    self.rule,
                    rule.dimension(),
                    self.dimension
                ),
            ));
        }
        let mut resolver = Resolver {
            config: &self,
            done: BTreeMap::new(),
        };
        for name in self.bodies.keys() {
            let expr = resolver.body(name, &format!("bodies.{name}"), &mut BTreeSet::new())?;
            StarBody::from_expr(&expr, self.dimension)
                .map_err(|e| invalid(format!("bodies.{name}"), e))?;
        }
        let mut tasks = Vec::with_capacity(self.tasks.len());
        let mut ids = BTreeSet::new();
        for (index, spec) in self.tasks.iter().enumerate() {
            let field = format!("tasks[{index}]");
            let (id, task) = resolver.task(spec, &field, index)?;
            if !ids.insert(id.clone()) {
                return Err(invalid(
                    format!("{field}.id"),
                    format!("duplicate task id `{id}`"),
                ));
            }
            tasks.push((id, task));
        }
        Ok(Scene {
            dimension: self.dimension,
            rule,
            seed: self.seed,
            output: self.output.clone(),
            tasks,
        })
    }
}

struct Resolver<'a> {
    config: &'a SceneConfig,
    done: BTreeMap<String, BodyExpr>,
}

impl Resolver<'_> {
    fn gauge(&self, name: &str, field: &str) -> Result<OrliczFunction, ConfigError> {
        self.config
            .gauges
            .get(name)
            .copied()
            .ok_or_else(|| invalid(field, format!("unknown gauge `{name}`")))
    }

    fn body(
        &mut self,
        name: &str,
        field: &str,
        stack: &mut BTreeSet<String>,
    ) -> Result<BodyExpr, ConfigError> {
        if let Some(expr) = self.done.get(name) {
            return Ok(expr.clone());
        }
        let spec = self
            .config
            .bodies
            .get(name)
            .ok_or_else(|| invalid(field, format!("unknown body `{name}`")))?;
        if !stack.insert(name.to_string()) {
            return Err(invalid(
                field,
                format!("cyclic reference through body `{name}`"),
            ));
        }
        let here = format!("bodies.{name}");
        let mut child = |s: &mut Self, child: &str, key: &str| {
            s.body(child, &format!("{here}.{key}"), stack).map(Box::new)
        };
        let expr = match spec {
            BodySpec::Ball { radius, center } => BodyExpr::Ball {
                radius: *radius,
                center: center.clone(),
            },
            BodySpec::Ellipsoid {
                semi_axes,
                rotation,
            } => BodyExpr::Ellipsoid {
                semi_axes: semi_axes.clone(),
                rotation: rotation.clone(),
            },
            BodySpec::PerturbedSphere { base_radius, terms } => BodyExpr::PerturbedSphere {
                base_radius: *base_radius,
                terms: terms.clone(),
            },
            BodySpec::Tabulated { rule, values } => BodyExpr::Tabulated {
                rule: rule.clone(),
                values: values.clone(),
            },
            BodySpec::LinearImage { matrix, body } => BodyExpr::LinearImage {
                matrix: matrix.clone(),
                body: child(self, body, "body")?,
            },
            BodySpec::Dilate { factor, body } => BodyExpr::Dilate {
                factor: *factor,
                body: child(self, body, "body")?,
            },
            BodySpec::LpAdd {
                p,
                alpha,
                beta,
                left,
                right,
            } => BodyExpr::LpAdd {
                p: *p,
                alpha: *alpha,
                beta: *beta,
                left: child(self, left, "left")?,
                right: child(self, right, "right")?,
            },
            BodySpec::OrliczAdd {
                parts,
                coefficients,
                gauges,
            } => {
                let mut resolved = Vec::with_capacity(parts.len());
                for (k, part) in parts.iter().enumerate() {
                    resolved.push(*child(self, part, &format!("parts[{k}]"))?);
                }
                let gauges = gauges
                    .iter()
                    .enumerate()
                    .map(|(k, g)| self.gauge(g, &format!("{here}.gauges[{k}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                BodyExpr::OrliczAdd {
                    parts: resolved,
                    coefficients: coefficients.clone(),
                    gauges,
                }
            }
        };
        stack.remove(name);
        self.done.insert(name.to_string(), expr.clone());
        Ok(expr)
    }

    fn named(&mut self, name: &str, field: &str) -> Result<BodyExpr, ConfigError> {
        self.body(name, field, &mut BTreeSet::new())
    }

    fn task(
        &mut self,
        spec: &TaskSpec,
        field: &str,
        index: usize,
    ) -> Result<(String, Task), ConfigError> {
        let default_id = || format!("task{}", index + 1);
        let need = |value: Option<f64>, key: &str| {
            value.ok_or_else(|| invalid(format!("{field}.{key}"), "missing parameter"))
        };
        let rule_id = self.config.rule.clone();
        Ok(match spec {
            TaskSpec::Integrate {
                id,
                functional,
                bodies,
                i,
                p,
                phi,
            } => {
                let exprs = bodies
                    .iter()
                    .enumerate()
                    .map(|(k, b)| self.named(b, &format!("{field}.bodies[{k}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                let expected = match functional {
                    Functional::ChordIntegral => Some(1),
                    Functional::Mixed => None,
                    _ => Some(2),
                };
                if let Some(m) = expected {
                    if exprs.len() != m {
                        return Err(invalid(
                            format!("{field}.bodies"),
                            format!(
                                "{} takes {m} bodies, got {}",
                                functional.name(),
                                exprs.len()
                            ),
                        ));
                    }
                }
                let p = match functional {
                    Functional::LpMixed => Some(need(*p, "p")?),
                    _ => None,
                };
                let phi = match functional {
                    Functional::OrliczMixed => {
                        let name = phi
                            .as_deref()
                            .ok_or_else(|| invalid(format!("{field}.phi"), "missing gauge"))?;
                        Some(self.gauge(name, &format!("{field}.phi"))?)
                    }
                    _ => None,
                };
                (
                    id.clone().unwrap_or_else(default_id),
                    Task::Integrate {
                        functional: *functional,
                        bodies: exprs,
                        i: *i,
                        p,
                        phi,
                    },
                )
            }
            TaskSpec::Add { id, body, i } => (
                id.clone().unwrap_or_else(default_id),
                Task::Add {
                    body: self.named(body, &format!("{field}.body"))?,
                    i: *i,
                },
            ),
            TaskSpec::Check {
                id,
                check,
                k,
                l,
                i,
                p,
                phi,
                gauges,
            } => {
                let phi_field = format!("{field}.phi");
                let gauges_field = format!("{field}.gauges");
                let single = |s: &Self| -> Result<OrliczFunction, ConfigError> {
                    let name = phi
                        .as_deref()
                        .ok_or_else(|| invalid(&phi_field, "missing gauge"))?;
                    s.gauge(name, &phi_field)
                };
                let pair = |s: &Self| -> Result<(OrliczFunction, OrliczFunction), ConfigError> {
                    match gauges.as_deref() {
                        Some([a, b]) => {
                            Ok((s.gauge(a, &gauges_field)?, s.gauge(b, &gauges_field)?))
                        }
                        _ => Err(invalid(&gauges_field, "expected a list of two gauge names")),
                    }
                };
                let kind = match check {
                    CheckName::MinkowskiIth => CheckKind::MinkowskiIth,
                    CheckName::LpMinkowski => CheckKind::LpMinkowski { p: need(*p, "p")? },
                    CheckName::LpBm => CheckKind::LpBm { p: need(*p, "p")? },
                    CheckName::OrliczMinkowski => CheckKind::OrliczMinkowski { phi: single(self)? },
                    CheckName::JensenBound => CheckKind::JensenBound { phi: single(self)? },
                    CheckName::OrliczBm => {
                        let gauge = match (p, gauges) {
                            (Some(p), None) => OrliczGauge::power_sum(*p, 2),
                            (None, Some(_)) => {
                                let (a, b) = pair(self)?;
                                OrliczGauge::sum(vec![a, b])
                            }
                            _ => {
                                return Err(invalid(
                                    field,
                                    "orlicz_bm needs either `p` or `gauges`",
                                ))
                            }
                        }
                        .map_err(|e| invalid(field, e))?;
                        CheckKind::OrliczBm { gauge }
                    }
                    CheckName::Decomposition => {
                        let (phi1, phi2) = pair(self)?;
                        CheckKind::Decomposition { phi1, phi2 }
                    }
                };
                if let CheckKind::LpMinkowski { p } | CheckKind::LpBm { p } = kind {
                    if !(p >= 1.0) {
                        return Err(invalid(
                            format!("{field}.p"),
                            format!("p must be ≥ 1, got {p}"),
                        ));
                    }
                }
                let case = CheckCase {
                    check: kind,
                    i: *i,
                    rule: rule_id,
                    k: self.named(k, &format!("{field}.k"))?,
                    l: self.named(l, &format!("{field}.l"))?,
                };
                (id.clone().unwrap_or_else(default_id), Task::Check(case))
            }
            TaskSpec::Search {
                id,
                checks,
                trials,
                families,
                keep,
            } => {
                if *trials == 0 || checks.is_empty() {
                    return Err(invalid(
                        field,
                        "search needs trials ≥ 1 and at least one check",
                    ));
                }
                let spec = SearchSpec {
                    rule: rule_id,
                    checks: checks.clone(),
                    trials: *trials,
                    seed: self.config.seed,
                    families: families
                        .clone()
                        .unwrap_or_else(|| ShapeFamily::ALL.to_vec()),
                    keep: *keep,
                };
                (id.clone().unwrap_or_else(default_id), Task::Search(spec))
            }
            TaskSpec::Variational {
                id,
                k,
                l,
                i,
                phi1,
                phi2,
                schedule,
            } => (
                id.clone().unwrap_or_else(default_id),
                Task::Variational {
                    k: self.named(k, &format!("{field}.k"))?,
                    l: self.named(l, &format!("{field}.l"))?,
                    i: *i,
                    phi1: self.gauge(phi1, &format!("{field}.phi1"))?,
                    phi2: self.gauge(phi2, &format!("{field}.phi2"))?,
                    schedule: schedule
                        .clone()
                        .unwrap_or_else(|| DEFAULT_EPS_SCHEDULE.to_vec()),
                },
            ),
        })
    }
}
