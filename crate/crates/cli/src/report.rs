use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "NO-ORBIT-FOUND")]
    NoOrbitFound,
    #[serde(rename = "ORBITS-FOUND")]
    OrbitsFound,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::NoOrbitFound => "NO-ORBIT-FOUND",
            Verdict::OrbitsFound => "ORBITS-FOUND",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub summary: String,
    pub details: Value,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ScenarioInfo {
    pub id: String,
    pub overrides: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_path: Option<String>,
    pub parameters: BTreeMap<String, f64>,
}

/// Machine-readable record of one command. Only `wall_time_s` varies
/// between identical invocations.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioInfo>,
    pub options: Value,
    pub tool_version: String,
    /// Worker threads available to data-parallel steps.
    pub workers: usize,
    pub wall_time_s: f64,
    pub verdict: Verdict,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str, scenario: Option<ScenarioInfo>, options: Value) -> Self {
        RunReport {
            command: command.to_string(),
            scenario,
            options,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            workers: reeb_lab::par::workers(),
            wall_time_s: 0.0,
            verdict: Verdict::Pass,
            checks: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn check(&mut self, name: impl Into<String>, verdict: Verdict, summary: impl Into<String>, details: Value) {
        self.checks.push(Check {
            name: name.into(),
            verdict,
            summary: summary.into(),
            details,
        });
    }

    pub fn artifact(&mut self, out: &Path, path: &Path) {
        let rel = path.strip_prefix(out).unwrap_or(path);
        self.artifacts.push(rel.to_string_lossy().into_owned());
    }

    pub fn failed(&self) -> bool {
        self.checks.iter().any(|c| c.verdict == Verdict::Fail)
    }

    /// Overall verdict: FAIL if any check failed, otherwise the orbit
    /// outcome if there is one, otherwise PASS.
    pub fn settle(&mut self) {
        self.verdict = if self.failed() {
            Verdict::Fail
        } else {
            self.checks
                .iter()
                .map(|c| c.verdict)
                .find(|v| matches!(v, Verdict::OrbitsFound | Verdict::NoOrbitFound))
                .unwrap_or(Verdict::Pass)
        };
    }

    pub fn write(&mut self, out: &Path) -> anyhow::Result<PathBuf> {
        let path = out.join("report.json");
        self.artifacts.push("report.json".into());
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}
