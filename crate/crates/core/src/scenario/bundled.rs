//! Scenario library compiled into the binary.

use serde::{Deserialize, Serialize};

use super::{ScenarioConfig, SweepSpec};
use crate::error::{Error, Result};

const SCENARIOS: [(&str, &str); 10] = [
    (
        "raman-anchor",
        include_str!("../../scenarios/raman-anchor.json"),
    ),
    ("N", include_str!("../../scenarios/N.json")),
    ("L", include_str!("../../scenarios/L.json")),
    ("C", include_str!("../../scenarios/C.json")),
    ("W", include_str!("../../scenarios/W.json")),
    ("US-1", include_str!("../../scenarios/US-1.json")),
    ("US-2", include_str!("../../scenarios/US-2.json")),
    ("US-4", include_str!("../../scenarios/US-4.json")),
    ("US-20", include_str!("../../scenarios/US-20.json")),
    ("b2b", include_str!("../../scenarios/b2b.json")),
];

const SWEEPS: [(&str, &str); 4] = [
    (
        "b2b-budget",
        include_str!("../../scenarios/sweeps/b2b-budget.json"),
    ),
    ("reach", include_str!("../../scenarios/sweeps/reach.json")),
    ("split", include_str!("../../scenarios/sweeps/split.json")),
    (
        "upstream",
        include_str!("../../scenarios/sweeps/upstream.json"),
    ),
];

/// A named sweep over one of the bundled scenarios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundledSweep {
    pub name: String,
    pub description: String,
    pub scenario: String,
    #[serde(flatten)]
    pub spec: SweepSpec,
}

/// All bundled scenarios in library order.
pub fn bundled_scenarios() -> Vec<ScenarioConfig> {
    SCENARIOS
        .iter()
        .map(|(name, text)| {
            ScenarioConfig::from_json(text)
                .unwrap_or_else(|e| panic!("bundled scenario {name}: {e}"))
        })
        .collect()
}

pub fn bundled_scenario(name: &str) -> Result<ScenarioConfig> {
    let (_, text) = SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Lookup {
            kind: "bundled scenario",
            name: name.to_string(),
        })?;
    ScenarioConfig::from_json(text)
}

pub fn bundled_sweeps() -> Vec<BundledSweep> {
    SWEEPS
        .iter()
        .map(|(name, text)| {
            serde_json::from_str(text).unwrap_or_else(|e| panic!("bundled sweep {name}: {e}"))
        })
        .collect()
}

pub fn bundled_sweep(name: &str) -> Result<BundledSweep> {
    bundled_sweeps()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::Lookup {
            kind: "bundled sweep",
            name: name.to_string(),
        })
}
