//! On-disk scenario format, schema `reeb-lab/scenario/v1`.
//!
//! Everything is plain data: expressions are strings over the coordinates of
//! the chart they live on, parameters and named sub-expressions are resolved
//! at parse time.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::sampling::{Grid, Layout};

pub const SCHEMA: &str = "reeb-lab/scenario/v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: String,
    pub id: String,
    pub description: String,
    /// Free-text pointer to the construction being modelled.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub reference: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, ParamSpec>,
    /// Named sub-expressions, in dependency order.
    #[serde(default)]
    pub definitions: Vec<DefinitionSpec>,
    pub charts: Vec<ChartSpec>,
    #[serde(default)]
    pub maps: Vec<MapSpec>,
    #[serde(default)]
    pub forms: Vec<FormSpec>,
    #[serde(default)]
    pub metrics: Vec<MetricSpec>,
    #[serde(default)]
    pub contact: Vec<ContactSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf: Option<LeafSpec>,
    #[serde(default)]
    pub certificates: Vec<CertificateSpec>,
    #[serde(default)]
    pub fixtures: Vec<FixtureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit_search: Option<OrbitSearchSpec>,
    #[serde(default)]
    pub energy: Vec<EnergySpec>,
    #[serde(default)]
    pub compare: Vec<CompareSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Free-form remarks carried into reports.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

impl ParamSpec {
    pub fn new(value: f64, min: f64, max: f64, description: &str) -> Self {
        ParamSpec {
            value,
            min: Some(min),
            max: Some(max),
            description: description.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefinitionSpec {
    pub name: String,
    /// Coordinate names the body may refer to; uses elsewhere bind by name.
    pub over: Vec<String>,
    pub expr: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub id: String,
    pub coords: Vec<CoordSpec>,
    /// Extra validity constraint, valid where `>= 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoordSpec {
    pub name: String,
    /// Omitted bounds are unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    /// Periodic coordinate on `[min, min + period)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
}

impl CoordSpec {
    pub fn interval(name: &str, min: f64, max: f64) -> Self {
        CoordSpec {
            name: name.into(),
            min: Some(min),
            max: Some(max),
            period: None,
        }
    }

    pub fn free(name: &str) -> Self {
        CoordSpec {
            name: name.into(),
            min: None,
            max: None,
            period: None,
        }
    }

    pub fn periodic(name: &str, min: f64, period: f64) -> Self {
        CoordSpec {
            name: name.into(),
            min: Some(min),
            max: None,
            period: Some(period),
        }
    }

    pub fn angle(name: &str) -> Self {
        Self::periodic(name, 0.0, std::f64::consts::TAU)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub id: String,
    pub source: String,
    pub target: String,
    pub components: Vec<String>,
}

/// A 1-form given by components, or the pullback of another form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pullback: Option<PullbackSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PullbackSpec {
    /// Form or metric id, depending on context.
    pub of: String,
    pub by: String,
}

/// Exactly one of `upper`, `pullback`, `radial_reparam`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<String>,
    /// Upper triangle row by row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pullback: Option<PullbackSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radial_reparam: Option<RadialReparamSpec>,
    /// Positive-definiteness is checked on this grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<RegionSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialReparamSpec {
    pub of: String,
    pub sigma_max: f64,
}

/// A contact structure from a 1-form, or the unit cotangent form of a metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub liouville: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_contact: Option<f64>,
    /// Grid for `verify-contact`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<RegionSpec>,
    #[serde(default, skip_serializing_if = "Applies::is_always")]
    pub applies: Applies,
}

/// Leaf selector: a parameter whose value picks a leaf of a foliation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeafSpec {
    pub parameter: String,
    /// Parameter values of compact leaves.
    #[serde(default)]
    pub compact: Vec<f64>,
    /// Leaf values are compared modulo this period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeafKind {
    Compact,
    Open,
}

/// Restricts an entry to some leaves. Empty means always.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Applies {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaves: Option<LeafKind>,
    /// Closed intervals of the leaf parameter.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ranges: Vec<[f64; 2]>,
}

impl Applies {
    pub fn is_always(&self) -> bool {
        self.leaves.is_none() && self.ranges.is_empty()
    }

    pub fn to(kind: LeafKind) -> Self {
        Applies {
            leaves: Some(kind),
            ranges: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldRef {
    /// Reeb field of a contact structure.
    Reeb(String),
    /// Geodesic spray of a metric on `(q, dq)`.
    Geodesic(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSpec {
    pub id: String,
    pub field: FieldRef,
    /// `W`, over the field's chart coordinates.
    pub functional: String,
    pub region: RegionSpec,
    /// PASS iff `inf dW(X) >= eps`.
    pub eps: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub role: String,
    #[serde(default, skip_serializing_if = "Applies::is_always")]
    pub applies: Applies,
}

/// A known closed orbit, re-verified by integrating one period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureSpec {
    pub id: String,
    pub field: FieldRef,
    pub point: Vec<f64>,
    pub period: f64,
    pub residual_tol: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
    #[serde(default, skip_serializing_if = "Applies::is_always")]
    pub applies: Applies,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expect {
    None,
    Orbits,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSearchSpec {
    pub field: FieldRef,
    pub seeds: RegionSpec,
    pub t_max: f64,
    /// Expected outcome on open leaves (or when there is no leaf selector).
    pub expect: Expect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_compact: Option<Expect>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyKind {
    /// `∫ F*dα` over a 2-dimensional source.
    Horizontal,
    /// `∮ γ*α` over a closed loop.
    Boundary,
}

/// A map for the energy functionals. `target` is a chart id or
/// `"symplectisation"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySpec {
    pub id: String,
    pub kind: EnergyKind,
    pub contact: String,
    pub source: Vec<CoordSpec>,
    pub target: String,
    pub components: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Applies::is_always")]
    pub applies: Applies,
}

/// Reeb flow of the unit cotangent form against the geodesic flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    pub id: String,
    pub metric: String,
    pub point: Vec<f64>,
    pub psi: f64,
    pub time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n: Vec<usize>,
    /// Cell-centred layout with the box centre on a node.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub centered: bool,
}

impl RegionSpec {
    pub fn new(lo: &[f64], hi: &[f64], n: &[usize]) -> Self {
        RegionSpec {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            n: n.to_vec(),
            centered: false,
        }
    }

    pub fn centered(mut self) -> Self {
        self.centered = true;
        self
    }

    pub fn grid(&self) -> Grid {
        let mut g = Grid::new(self.lo.clone(), self.hi.clone(), self.n.clone());
        if self.centered {
            g.layout = Layout::Centered;
        }
        g
    }

    pub fn with_counts(&self, n: &[usize]) -> Self {
        RegionSpec {
            n: n.to_vec(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Local error tolerance for trajectory integration.
    pub integrate: f64,
    /// Bound on `|α(R) - 1|` and `sup |i_R dα|` at sampled points.
    pub reeb_residual: f64,
    pub orbit_residual: f64,
    pub period: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            integrate: 1e-10,
            reeb_residual: 1e-9,
            orbit_residual: 1e-9,
            period: 1e-6,
        }
    }
}
