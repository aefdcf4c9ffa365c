//! Built-in scenarios. Each is an ordinary scenario file compiled into the
//! binary and instantiated through the same path as user configs.

use super::{parse_config, ScenarioConfig};

pub const IDS: &[&str] = &[
    "tight-r3",
    "ot-r3",
    "s2xr",
    "sharp-s2t2",
    "s3-reeb-leaf",
    "t3-linear",
    "flat-torus-unit-cotangent",
];

fn source(id: &str) -> Option<&'static str> {
    Some(match id {
        "tight-r3" => include_str!("../../scenarios/tight-r3.json"),
        "ot-r3" => include_str!("../../scenarios/ot-r3.json"),
        "s2xr" => include_str!("../../scenarios/s2xr.json"),
        "sharp-s2t2" => include_str!("../../scenarios/sharp-s2t2.json"),
        "s3-reeb-leaf" => include_str!("../../scenarios/s3-reeb-leaf.json"),
        "t3-linear" => include_str!("../../scenarios/t3-linear.json"),
        "flat-torus-unit-cotangent" => include_str!("../../scenarios/flat-torus-unit-cotangent.json"),
        _ => return None,
    })
}

/// The file text of a built-in scenario.
pub fn text(id: &str) -> Option<&'static str> {
    source(id)
}

pub fn config(id: &str) -> Option<ScenarioConfig> {
    source(id).map(|s| parse_config(s).unwrap_or_else(|e| panic!("built-in scenario `{id}` is malformed: {e}")))
}
