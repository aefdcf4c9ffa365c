//! Catalogue of worked constructions as data, and the machinery that turns a
//! [`ScenarioConfig`] into charts, forms, metrics and contact structures.

pub mod builtin;
pub mod config;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calculus::{Chart, ChartMap, DifferentialForm, Rule};
use crate::contact::{ContactReport, ContactStructure};
use crate::expr::{Definitions, Expression};
use crate::flow::{
    certify_monotone, find_closed_orbits, integrate, CertificateReport, Field, IntegrateOptions,
    OrbitSearch, OrbitSearchReport,
};
use crate::geodesics::{cogeodesic_reeb_compare, CogeodesicComparison, Metric, RadialProfile};
use crate::par::Execution;

pub use config::*;

#[derive(Clone, Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{id}` (known: {known})")]
    UnknownId { id: String, known: String },
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("parameter `{name}` = {value} outside [{min}, {max}]")]
    OutOfRange {
        name: String,
        value: f64,
        min: f64,
        max: f64,
    },
    /// Schema violation or a bad entry, with the path of the offending field.
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{0}")]
    Io(String),
}

fn schema_err(path: impl Into<String>, message: impl ToString) -> ScenarioError {
    ScenarioError::Schema {
        path: path.into(),
        message: message.to_string(),
    }
}

/// Which leaf a leaf-selector value picks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafState {
    pub parameter: String,
    pub value: f64,
    pub kind: LeafKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureReport {
    pub id: String,
    pub point: Vec<f64>,
    pub period: f64,
    pub residual: f64,
    pub residual_tol: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub id: String,
    pub kind: EnergyKind,
    pub value: f64,
    pub expected: Option<f64>,
    pub tol: Option<f64>,
    /// `None` when there is no expected value.
    pub pass: Option<bool>,
}

/// A fully instantiated scenario. Immutable once built.
#[derive(Clone, Debug)]
pub struct Scenario {
    config: ScenarioConfig,
    params: BTreeMap<String, f64>,
    leaf: Option<LeafState>,
    defs: Definitions,
    charts: BTreeMap<String, Arc<Chart>>,
    maps: BTreeMap<String, ChartMap>,
    forms: BTreeMap<String, DifferentialForm>,
    metrics: BTreeMap<String, Metric>,
    profiles: BTreeMap<String, Arc<RadialProfile>>,
    contacts: Vec<(String, Arc<ContactStructure>)>,
}

/// Built-in scenario with parameter overrides.
pub fn build_scenario(id: &str, overrides: &BTreeMap<String, f64>) -> Result<Scenario, ScenarioError> {
    let cfg = builtin::config(id).ok_or_else(|| ScenarioError::UnknownId {
        id: id.to_string(),
        known: builtin::IDS.join(", "),
    })?;
    Scenario::instantiate(cfg, overrides)
}

/// Parse a scenario file. Schema errors carry the path of the offending field.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        schema_err(if path == "." { "<root>".into() } else { path }, e.into_inner())
    })
}

pub fn load_config(path: &Path) -> Result<Scenario, ScenarioError> {
    load_config_with(path, &BTreeMap::new())
}

pub fn load_config_with(path: &Path, overrides: &BTreeMap<String, f64>) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
    Scenario::instantiate(parse_config(&text)?, overrides)
}

fn bounds_of(spec: &[CoordSpec]) -> Vec<(f64, f64)> {
    spec.iter()
        .map(|c| (c.min.unwrap_or(f64::NEG_INFINITY), c.max.unwrap_or(f64::INFINITY)))
        .collect()
}

fn build_chart(id: &str, coords: &[CoordSpec]) -> Result<Chart, String> {
    let names: Vec<&str> = coords.iter().map(|c| c.name.as_str()).collect();
    let mut b = bounds_of(coords);
    for (i, c) in coords.iter().enumerate() {
        if c.period.is_some() {
            b[i] = (c.min.unwrap_or(0.0), f64::INFINITY);
        }
    }
    let mut chart = Chart::new(id, &names, &b).map_err(|e| e.to_string())?;
    for (i, c) in coords.iter().enumerate() {
        if let Some(p) = c.period {
            if !(p > 0.0) {
                return Err(format!("period of `{}` must be positive", c.name));
            }
            chart = chart.periodic(i, c.min.unwrap_or(0.0), p);
        }
    }
    Ok(chart)
}

impl Scenario {
    pub fn instantiate(config: ScenarioConfig, overrides: &BTreeMap<String, f64>) -> Result<Scenario, ScenarioError> {
        if config.schema != SCHEMA {
            return Err(schema_err("schema", format!("expected `{SCHEMA}`, got `{}`", config.schema)));
        }
        let mut params = BTreeMap::new();
        for (k, p) in &config.parameters {
            params.insert(k.clone(), p.value);
        }
        for (k, &v) in overrides {
            let p = config
                .parameters
                .get(k)
                .ok_or_else(|| ScenarioError::UnknownParameter(k.clone()))?;
            let (min, max) = (p.min.unwrap_or(f64::NEG_INFINITY), p.max.unwrap_or(f64::INFINITY));
            if !(v >= min && v <= max) {
                return Err(ScenarioError::OutOfRange {
                    name: k.clone(),
                    value: v,
                    min,
                    max,
                });
            }
            params.insert(k.clone(), v);
        }
        let leaf = match &config.leaf {
            None => None,
            Some(l) => {
                let value = *params
                    .get(&l.parameter)
                    .ok_or_else(|| schema_err("leaf.parameter", format!("no parameter `{}`", l.parameter)))?;
                let same = |c: f64| match l.period {
                    Some(p) => {
                        let d = (value - c).rem_euclid(p);
                        d.min(p - d) <= 1e-12
                    }
                    None => (value - c).abs() <= 1e-12,
                };
                let kind = if l.compact.iter().any(|&c| same(c)) {
                    LeafKind::Compact
                } else {
                    LeafKind::Open
                };
                Some(LeafState {
                    parameter: l.parameter.clone(),
                    value,
                    kind,
                })
            }
        };

        let mut defs = Definitions::default();
        for (k, v) in &params {
            defs.constant(k, *v);
        }
        for (i, d) in config.definitions.iter().enumerate() {
            let over: Vec<&str> = d.over.iter().map(String::as_str).collect();
            if over.is_empty() {
                return Err(schema_err(format!("definitions[{i}].over"), "needs at least one coordinate"));
            }
            defs.define(&d.name, &d.expr, &over)
                .map_err(|e| schema_err(format!("definitions[{i}] `{}`", d.name), e))?;
        }

        let mut sc = Scenario {
            config: ScenarioConfig::clone(&config),
            params,
            leaf,
            defs,
            charts: BTreeMap::new(),
            maps: BTreeMap::new(),
            forms: BTreeMap::new(),
            metrics: BTreeMap::new(),
            profiles: BTreeMap::new(),
            contacts: Vec::new(),
        };

        for (i, c) in config.charts.iter().enumerate() {
            let mut chart = build_chart(&c.id, &c.coords).map_err(|e| schema_err(format!("charts[{i}]"), e))?;
            if let Some(p) = &c.predicate {
                let e = sc
                    .parse_on(&chart, p)
                    .map_err(|e| schema_err(format!("charts[{i}].predicate"), e))?;
                chart = chart.with_predicate(e);
            }
            if sc.charts.insert(c.id.clone(), Arc::new(chart)).is_some() {
                return Err(schema_err(format!("charts[{i}].id"), format!("duplicate chart `{}`", c.id)));
            }
        }

        for (i, m) in config.maps.iter().enumerate() {
            let path = format!("maps[{i}]");
            let src = sc.chart_at(&path, "source", &m.source)?;
            let tgt = sc.chart_at(&path, "target", &m.target)?;
            let comps = m
                .components
                .iter()
                .enumerate()
                .map(|(j, s)| sc.parse_on(&src, s).map_err(|e| schema_err(format!("{path}.components[{j}]"), e)))
                .collect::<Result<Vec<_>, _>>()?;
            let map = ChartMap::new(&src, &tgt, comps).map_err(|e| schema_err(&path, e))?;
            sc.maps.insert(m.id.clone(), map);
        }

        for (i, f) in config.forms.iter().enumerate() {
            let path = format!("forms[{i}]");
            let form = match (&f.chart, &f.components, &f.pullback) {
                (Some(c), Some(comps), None) => {
                    let chart = sc.chart_at(&path, "chart", c)?;
                    let e = comps
                        .iter()
                        .enumerate()
                        .map(|(j, s)| {
                            sc.parse_on(&chart, s)
                                .map_err(|e| schema_err(format!("{path}.components[{j}]"), e))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    DifferentialForm::one_form(&chart, e).map_err(|e| schema_err(&path, e))?
                }
                (None, None, Some(pb)) => {
                    let of = sc
                        .forms
                        .get(&pb.of)
                        .ok_or_else(|| schema_err(format!("{path}.pullback.of"), format!("no form `{}`", pb.of)))?;
                    let by = sc
                        .maps
                        .get(&pb.by)
                        .ok_or_else(|| schema_err(format!("{path}.pullback.by"), format!("no map `{}`", pb.by)))?;
                    of.pullback(by).map_err(|e| schema_err(&path, e))?
                }
                _ => return Err(schema_err(&path, "needs either `chart` + `components` or `pullback`")),
            };
            sc.forms.insert(f.id.clone(), form);
        }

        for (i, m) in config.metrics.iter().enumerate() {
            let path = format!("metrics[{i}]");
            let metric = match (&m.chart, &m.upper, &m.pullback, &m.radial_reparam) {
                (Some(c), Some(upper), None, None) => {
                    let chart = sc.chart_at(&path, "chart", c)?;
                    let e = upper
                        .iter()
                        .enumerate()
                        .map(|(j, s)| {
                            sc.parse_on(&chart, s).map_err(|e| schema_err(format!("{path}.upper[{j}]"), e))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Metric::from_upper(&chart, e).map_err(|e| schema_err(&path, e))?
                }
                (None, None, Some(pb), None) => {
                    let of = sc
                        .metrics
                        .get(&pb.of)
                        .ok_or_else(|| schema_err(format!("{path}.pullback.of"), format!("no metric `{}`", pb.of)))?;
                    let by = sc
                        .maps
                        .get(&pb.by)
                        .ok_or_else(|| schema_err(format!("{path}.pullback.by"), format!("no map `{}`", pb.by)))?;
                    of.pullback(by).map_err(|e| schema_err(&path, e))?
                }
                (None, None, None, Some(rr)) => {
                    let of = sc.metrics.get(&rr.of).ok_or_else(|| {
                        schema_err(format!("{path}.radial_reparam.of"), format!("no metric `{}`", rr.of))
                    })?;
                    let (metric, profile) = of.radial_reparam(rr.sigma_max).map_err(|e| schema_err(&path, e))?;
                    sc.charts.insert(format!("{}.chart", m.id), metric.chart().clone());
                    sc.profiles.insert(m.id.clone(), profile);
                    metric
                }
                _ => {
                    return Err(schema_err(
                        &path,
                        "needs exactly one of `chart` + `upper`, `pullback`, `radial_reparam`",
                    ))
                }
            };
            if let Some(check) = &m.check {
                let min = metric.min_eigenvalue(&check.grid()).map_err(|e| schema_err(&path, e))?;
                if !(min > 0.0) {
                    return Err(schema_err(
                        format!("{path}.check"),
                        format!("metric is not positive definite (smallest sampled eigenvalue {min:e})"),
                    ));
                }
            }
            sc.metrics.insert(m.id.clone(), metric);
        }

        for (i, c) in config.contact.iter().enumerate() {
            if !sc.applies(&c.applies) {
                continue;
            }
            let path = format!("contact[{i}]");
            let mut cs = match (&c.form, &c.liouville) {
                (Some(f), None) => {
                    let form = sc
                        .forms
                        .get(f)
                        .ok_or_else(|| schema_err(format!("{path}.form"), format!("no form `{f}`")))?;
                    ContactStructure::new(form.clone()).map_err(|e| schema_err(&path, e))?
                }
                (None, Some(m)) => {
                    let metric = sc
                        .metrics
                        .get(m)
                        .ok_or_else(|| schema_err(format!("{path}.liouville"), format!("no metric `{m}`")))?;
                    let cs = metric.liouville_unit_form().map_err(|e| schema_err(&path, e))?;
                    sc.charts
                        .insert(format!("{}.chart", c.id), cs.chart().clone());
                    cs
                }
                _ => return Err(schema_err(&path, "needs exactly one of `form`, `liouville`")),
            };
            if let Some(e) = c.eps_contact {
                cs.eps_contact = e;
            }
            let cs = cs.with_params(sc.params.clone());
            if sc.contacts.iter().any(|(id, _)| id == &c.id) {
                return Err(schema_err(format!("{path}.id"), format!("duplicate contact structure `{}`", c.id)));
            }
            sc.contacts.push((c.id.clone(), Arc::new(cs)));
        }
        Ok(sc)
    }

    fn chart_at(&self, path: &str, field: &str, id: &str) -> Result<Arc<Chart>, ScenarioError> {
        self.charts
            .get(id)
            .cloned()
            .ok_or_else(|| schema_err(format!("{path}.{field}"), format!("no chart `{id}`")))
    }

    fn parse_on(&self, chart: &Chart, src: &str) -> Result<Expression, crate::expr::ParseError> {
        Expression::parse_with(src, &chart.coord_names(), &self.defs)
    }

    /// Parse an expression over a chart with this scenario's parameters and
    /// definitions in scope.
    pub fn parse(&self, chart: &Chart, src: &str) -> Result<Expression, ScenarioError> {
        self.parse_on(chart, src).map_err(|e| schema_err(src, e))
    }

    pub fn applies(&self, a: &Applies) -> bool {
        let kind = self.leaf.as_ref().map_or(LeafKind::Open, |l| l.kind);
        if a.leaves.is_some_and(|k| k != kind) {
            return false;
        }
        if a.ranges.is_empty() {
            return true;
        }
        match &self.leaf {
            Some(l) => a.ranges.iter().any(|r| l.value >= r[0] && l.value <= r[1]),
            None => false,
        }
    }

    pub fn id(&self) -> &str {
        &self.config.id
    }

    pub fn description(&self) -> &str {
        &self.config.description
    }

    /// The configuration as given.
    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    /// The configuration with parameter defaults replaced by the values in
    /// use, so that reloading it reproduces this scenario.
    pub fn resolved_config(&self) -> ScenarioConfig {
        let mut c = self.config.clone();
        for (k, p) in c.parameters.iter_mut() {
            p.value = self.params[k];
        }
        c
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn leaf(&self) -> Option<&LeafState> {
        self.leaf.as_ref()
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.config.tolerances
    }

    pub fn chart(&self, id: &str) -> Option<&Arc<Chart>> {
        self.charts.get(id)
    }

    pub fn map(&self, id: &str) -> Option<&ChartMap> {
        self.maps.get(id)
    }

    pub fn form(&self, id: &str) -> Option<&DifferentialForm> {
        self.forms.get(id)
    }

    pub fn metric(&self, id: &str) -> Option<&Metric> {
        self.metrics.get(id)
    }

    pub fn metric_ids(&self) -> Vec<&str> {
        self.config
            .metrics
            .iter()
            .map(|m| m.id.as_str())
            .filter(|id| self.metrics.contains_key(*id))
            .collect()
    }

    pub fn radial_profile(&self, metric: &str) -> Option<&Arc<RadialProfile>> {
        self.profiles.get(metric)
    }

    pub fn contact(&self, id: &str) -> Option<&Arc<ContactStructure>> {
        self.contacts.iter().find(|(i, _)| i == id).map(|(_, c)| c)
    }

    /// Contact structures active on the selected leaf, in file order.
    pub fn contacts(&self) -> &[(String, Arc<ContactStructure>)] {
        &self.contacts
    }

    pub fn primary_contact(&self) -> Option<(&str, &Arc<ContactStructure>)> {
        self.contacts.first().map(|(i, c)| (i.as_str(), c))
    }

    fn contact_spec(&self, id: &str) -> Option<&ContactSpec> {
        self.config
            .contact
            .iter()
            .find(|c| c.id == id && self.applies(&c.applies))
    }

    pub fn field(&self, r: &FieldRef) -> Result<Arc<dyn Field>, ScenarioError> {
        match r {
            FieldRef::Reeb(id) => self
                .contact(id)
                .map(|c| Arc::new(c.reeb_field()) as Arc<dyn Field>)
                .ok_or_else(|| schema_err("field", format!("no active contact structure `{id}`"))),
            FieldRef::Geodesic(id) => self
                .metric(id)
                .map(|m| Arc::new(m.geodesic_field()) as Arc<dyn Field>)
                .ok_or_else(|| schema_err("field", format!("no metric `{id}`"))),
        }
    }

    /// `verify_contact` on the grid declared for the contact structure.
    pub fn verify_contact(
        &self,
        id: &str,
        counts: Option<&[usize]>,
        exec: Execution,
    ) -> Result<ContactReport, ScenarioError> {
        let cs = self
            .contact(id)
            .ok_or_else(|| schema_err("contact", format!("no active contact structure `{id}`")))?;
        let region = self
            .contact_spec(id)
            .and_then(|c| c.verify.clone())
            .ok_or_else(|| schema_err("contact", format!("`{id}` declares no verification grid")))?;
        let region = counts.map_or(region.clone(), |n| region.with_counts(n));
        Ok(cs.verify_contact(&region.grid(), exec))
    }

    /// Certificates that apply to the selected leaf.
    pub fn certificates(&self) -> Vec<&CertificateSpec> {
        self.config
            .certificates
            .iter()
            .filter(|c| self.applies(&c.applies))
            .collect()
    }

    pub fn run_certificate(&self, spec: &CertificateSpec, exec: Execution) -> Result<CertificateReport, ScenarioError> {
        let f = self.field(&spec.field)?;
        let w = self.parse(f.chart(), &spec.functional)?;
        certify_monotone(f.as_ref(), &w, &spec.region.grid(), spec.eps, exec)
            .map_err(|e| schema_err(format!("certificate `{}`", spec.id), e))
    }

    pub fn fixtures(&self) -> Vec<&FixtureSpec> {
        self.config
            .fixtures
            .iter()
            .filter(|c| self.applies(&c.applies))
            .collect()
    }

    /// Integrate one period from the fixture point and measure the closing gap.
    pub fn verify_fixture(&self, spec: &FixtureSpec) -> Result<FixtureReport, ScenarioError> {
        let f = self.field(&spec.field)?;
        let opts = IntegrateOptions::tol(self.tolerances().integrate);
        let tr = integrate(f.as_ref(), &spec.point, spec.period, &opts)
            .map_err(|e| schema_err(format!("fixture `{}`", spec.id), e))?;
        let residual = f.chart().distance(tr.end_state(), &spec.point);
        Ok(FixtureReport {
            id: spec.id.clone(),
            point: spec.point.clone(),
            period: spec.period,
            residual,
            residual_tol: spec.residual_tol,
            pass: residual <= spec.residual_tol,
        })
    }

    /// Expected orbit-search outcome on the selected leaf.
    pub fn expected_orbits(&self) -> Option<Expect> {
        let s = self.config.orbit_search.as_ref()?;
        Some(match self.leaf.as_ref().map(|l| l.kind) {
            Some(LeafKind::Compact) => s.expect_compact.unwrap_or(s.expect),
            _ => s.expect,
        })
    }

    /// Seeds of the declared orbit search, optionally with other counts.
    pub fn seeds(&self, counts: Option<&[usize]>) -> Option<Vec<Vec<f64>>> {
        let s = self.config.orbit_search.as_ref()?;
        let region = counts.map_or(s.seeds.clone(), |n| s.seeds.with_counts(n));
        Some(region.grid().points())
    }

    pub fn search_orbits(
        &self,
        counts: Option<&[usize]>,
        t_max: Option<f64>,
        exec: Execution,
    ) -> Result<OrbitSearchReport, ScenarioError> {
        let s = self
            .config
            .orbit_search
            .as_ref()
            .ok_or_else(|| schema_err("orbit_search", "scenario declares no orbit search"))?;
        let f = self.field(&s.field)?;
        let seeds = self.seeds(counts).unwrap_or_default();
        let opts = OrbitSearch {
            t_max: t_max.unwrap_or(s.t_max),
            exec,
            ..OrbitSearch::default()
        };
        Ok(find_closed_orbits(f.as_ref(), &seeds, &opts))
    }

    /// The map of an energy entry, with its contact structure.
    pub fn energy_map(&self, spec: &EnergySpec) -> Result<(ChartMap, Arc<ContactStructure>), ScenarioError> {
        let path = format!("energy `{}`", spec.id);
        let cs = self
            .contact(&spec.contact)
            .cloned()
            .ok_or_else(|| schema_err(&path, format!("no active contact structure `{}`", spec.contact)))?;
        let src = Arc::new(build_chart(&format!("{}.source", spec.id), &spec.source).map_err(|e| schema_err(&path, e))?);
        let tgt = if spec.target == "symplectisation" {
            cs.symplectisation().0
        } else {
            self.chart_at(&path, "target", &spec.target)?
        };
        let comps = spec
            .components
            .iter()
            .map(|s| self.parse(&src, s))
            .collect::<Result<Vec<_>, _>>()?;
        let map = ChartMap::new(&src, &tgt, comps).map_err(|e| schema_err(&path, e))?;
        Ok((map, cs))
    }

    pub fn run_energy(&self, spec: &EnergySpec, rule: Rule) -> Result<EnergyReport, ScenarioError> {
        let (map, cs) = self.energy_map(spec)?;
        let value = match spec.kind {
            EnergyKind::Horizontal => cs.horizontal_energy(&map, rule),
            EnergyKind::Boundary => cs.boundary_energy(&map, rule),
        }
        .map_err(|e| schema_err(format!("energy `{}`", spec.id), e))?;
        let pass = spec
            .expected
            .map(|x| (value - x).abs() <= spec.tol.unwrap_or(1e-9));
        Ok(EnergyReport {
            id: spec.id.clone(),
            kind: spec.kind,
            value,
            expected: spec.expected,
            tol: spec.tol,
            pass,
        })
    }

    pub fn energies(&self) -> Vec<&EnergySpec> {
        self.config.energy.iter().filter(|e| self.applies(&e.applies)).collect()
    }

    pub fn run_compare(&self, spec: &CompareSpec) -> Result<CogeodesicComparison, ScenarioError> {
        let g = self
            .metric(&spec.metric)
            .ok_or_else(|| schema_err(format!("compare `{}`", spec.id), format!("no metric `{}`", spec.metric)))?;
        cogeodesic_reeb_compare(g, &spec.point, spec.psi, spec.time, self.tolerances().integrate)
            .map_err(|e| schema_err(format!("compare `{}`", spec.id), e))
    }
}
