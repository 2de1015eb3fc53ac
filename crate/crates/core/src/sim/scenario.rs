use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// True per-dose DLT probabilities under one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub p_target: f64,
    pub true_tox: Vec<f64>,
}

impl Scenario {
    pub fn new(id: impl Into<String>, p_target: f64, true_tox: Vec<f64>) -> Result<Self> {
        let s = Scenario {
            id: id.into(),
            p_target,
            true_tox,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn n_doses(&self) -> usize {
        self.true_tox.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.true_tox.is_empty() {
            return Err(Error::ScenarioFormat(format!("scenario {}: no doses", self.id)));
        }
        if let Some(p) = self.true_tox.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::ScenarioFormat(format!(
                "scenario {}: probability {p} outside [0, 1]",
                self.id
            )));
        }
        if !(self.p_target > 0.0 && self.p_target < 1.0) {
            return Err(Error::ScenarioFormat(format!(
                "scenario {}: p_target {} outside (0, 1)",
                self.id, self.p_target
            )));
        }
        Ok(())
    }
}

const BUILTIN: [(f64, [f64; 6]); 42] = [
    (0.1, [0.04, 0.05, 0.06, 0.07, 0.08, 0.09]),
    (0.1, [0.15, 0.2, 0.25, 0.3, 0.35, 0.4]),
    (0.1, [0.01, 0.1, 0.2, 0.25, 0.3, 0.35]),
    (0.1, [0.01, 0.02, 0.03, 0.04, 0.1, 0.25]),
    (0.1, [0.05, 0.4, 0.5, 0.6, 0.65, 0.7]),
    (0.1, [0.01, 0.03, 0.05, 0.4, 0.5, 0.6]),
    (0.1, [0.01, 0.02, 0.03, 0.04, 0.05, 0.4]),
    (0.1, [0.09, 0.11, 0.13, 0.15, 0.17, 0.19]),
    (0.1, [0.05, 0.07, 0.09, 0.11, 0.13, 0.15]),
    (0.1, [0.01, 0.03, 0.05, 0.07, 0.09, 0.11]),
    (0.1, [0.02, 0.04, 0.08, 0.12, 0.17, 0.25]),
    (0.1, [0.02, 0.04, 0.07, 0.1, 0.15, 0.2]),
    (0.1, [0.1, 0.15, 0.2, 0.25, 0.3, 0.35]),
    (0.1, [0.01, 0.03, 0.05, 0.06, 0.08, 0.1]),
    (0.17, [0.0, 0.02, 0.05, 0.08, 0.11, 0.14]),
    (0.17, [0.22, 0.32, 0.37, 0.47, 0.57, 0.67]),
    (0.17, [0.0, 0.17, 0.37, 0.57, 0.77, 0.92]),
    (0.17, [0.01, 0.03, 0.05, 0.07, 0.17, 0.47]),
    (0.17, [0.02, 0.47, 0.77, 0.87, 0.92, 0.96]),
    (0.17, [0.0, 0.02, 0.07, 0.47, 0.67, 0.87]),
    (0.17, [0.0, 0.0, 0.04, 0.07, 0.12, 0.67]),
    (0.17, [0.16, 0.18, 0.2, 0.22, 0.24, 0.26]),
    (0.17, [0.12, 0.14, 0.16, 0.18, 0.2, 0.22]),
    (0.17, [0.08, 0.1, 0.12, 0.14, 0.16, 0.18]),
    (0.17, [0.02, 0.08, 0.14, 0.2, 0.26, 0.32]),
    (0.17, [0.02, 0.07, 0.12, 0.17, 0.27, 0.34]),
    (0.17, [0.17, 0.22, 0.27, 0.32, 0.37, 0.42]),
    (0.17, [0.02, 0.05, 0.08, 0.11, 0.14, 0.17]),
    (0.3, [0.02, 0.05, 0.1, 0.15, 0.2, 0.25]),
    (0.3, [0.35, 0.45, 0.5, 0.6, 0.7, 0.8]),
    (0.3, [0.01, 0.3, 0.55, 0.65, 0.8, 0.95]),
    (0.3, [0.04, 0.06, 0.08, 0.1, 0.3, 0.6]),
    (0.3, [0.05, 0.6, 0.8, 0.9, 0.95, 0.99]),
    (0.3, [0.01, 0.05, 0.1, 0.6, 0.7, 0.9]),
    (0.3, [0.01, 0.03, 0.07, 0.1, 0.15, 0.75]),
    (0.3, [0.29, 0.31, 0.33, 0.35, 0.37, 0.39]),
    (0.3, [0.25, 0.27, 0.29, 0.31, 0.33, 0.35]),
    (0.3, [0.21, 0.23, 0.25, 0.27, 0.29, 0.31]),
    (0.3, [0.05, 0.2, 0.27, 0.33, 0.39, 0.45]),
    (0.3, [0.05, 0.1, 0.2, 0.3, 0.4, 0.4]),
    (0.3, [0.3, 0.35, 0.4, 0.45, 0.5, 0.55]),
    (0.3, [0.15, 0.18, 0.21, 0.24, 0.27, 0.3]),
];

/// The 42 benchmark scenarios, numbered 1..=42: 1-14 at target 0.1,
/// 15-28 at 0.17 and 29-42 at 0.3.
pub fn builtin_scenarios() -> Vec<Scenario> {
    BUILTIN
        .iter()
        .enumerate()
        .map(|(i, (p, tox))| Scenario {
            id: (i + 1).to_string(),
            p_target: *p,
            true_tox: tox.to_vec(),
        })
        .collect()
}

/// Built-in scenarios at one target rate.
pub fn builtin_for_target(p_target: f64) -> Vec<Scenario> {
    builtin_scenarios()
        .into_iter()
        .filter(|s| (s.p_target - p_target).abs() < 1e-9)
        .collect()
}

/// Resolves `builtin:all`, `builtin:pt0.1`, `builtin:pt0.17` or `builtin:pt0.3`.
pub fn builtin_selector(sel: &str) -> Option<Vec<Scenario>> {
    match sel.strip_prefix("builtin:")? {
        "all" => Some(builtin_scenarios()),
        rest => {
            let p: f64 = rest.strip_prefix("pt")?.parse().ok()?;
            let v = builtin_for_target(p);
            (!v.is_empty()).then_some(v)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    #[serde(rename = "scenario")]
    scenarios: Vec<Scenario>,
}

/// TOML with one `[[scenario]]` table per record.
pub fn scenarios_to_toml(scenarios: &[Scenario]) -> String {
    toml::to_string(&ScenarioFile {
        scenarios: scenarios.to_vec(),
    })
    .expect("scenarios serialize")
}

pub fn scenarios_from_toml(text: &str) -> Result<Vec<Scenario>> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| Error::ScenarioFormat(e.message().to_string()))?;
    if file.scenarios.is_empty() {
        return Err(Error::ScenarioFormat("file holds no scenarios".into()));
    }
    for s in &file.scenarios {
        s.validate()?;
    }
    Ok(file.scenarios)
}
