use serde::{Deserialize, Serialize};

use super::engine::{run_simulation_with, CohortSize, SimConfig};
use super::metrics::OperatingCharacteristics;
use super::scenario::Scenario;
use crate::design::DesignRegistry;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Symmetric half-widths `k * 0.05 * pT` for `k = 0..=4`.
    EiWidth,
    /// Cohorts of 2, 3, 4 (N = 28 and 32), 5, 6 and random 2-5.
    CohortSize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSetting {
    pub label: String,
    pub eps: Option<f64>,
    pub cohort: CohortSize,
    pub max_patients: u32,
}

impl SweepAxis {
    pub fn settings(&self, base: &SimConfig) -> Vec<SweepSetting> {
        let pt = base.design.p_target;
        match self {
            SweepAxis::EiWidth => (0..=4)
                .map(|k| {
                    let eps = k as f64 * 0.05 * pt;
                    SweepSetting {
                        label: format!("{:.3}-{:.3}", pt - eps, pt + eps),
                        eps: Some(eps),
                        cohort: base.cohort,
                        max_patients: base.max_patients,
                    }
                })
                .collect(),
            SweepAxis::CohortSize => {
                let fixed = |label: &str, n: u32, max: u32| SweepSetting {
                    label: label.to_string(),
                    eps: None,
                    cohort: CohortSize::Fixed(n),
                    max_patients: max,
                };
                vec![
                    fixed("2", 2, 30),
                    fixed("3", 3, 30),
                    fixed("4-", 4, 28),
                    fixed("4+", 4, 32),
                    fixed("5", 5, 30),
                    fixed("6", 6, 30),
                    SweepSetting {
                        label: "random".into(),
                        eps: None,
                        cohort: CohortSize::Random { min: 2, max: 5 },
                        max_patients: 30,
                    },
                ]
            }
        }
    }
}

/// Mean and sample standard deviation across scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> MeanSd {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanSd { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub safety: MeanSd,
    pub reliability: MeanSd,
    pub pct_toxicity: MeanSd,
    pub results: Vec<OperatingCharacteristics>,
}

/// Runs every setting of `axis` over `scenarios`. `base` supplies the
/// design, seed, trial count and any setting the axis leaves alone.
pub fn sensitivity_sweep(
    axis: SweepAxis,
    base: &SimConfig,
    scenarios: &[Scenario],
) -> Result<Vec<SweepRow>> {
    if scenarios.is_empty() {
        return Err(Error::param("scenarios", "sweep needs at least one scenario"));
    }
    let registry = DesignRegistry::standard();
    axis.settings(base)
        .into_iter()
        .map(|setting| {
            let mut cfg = base.clone();
            cfg.cohort = setting.cohort;
            cfg.max_patients = setting.max_patients;
            if let Some(eps) = setting.eps {
                cfg.design.eps_lo = eps;
                cfg.design.eps_hi = eps;
            }
            let results = scenarios
                .iter()
                .map(|s| run_simulation_with(&registry, s, &cfg))
                .collect::<Result<Vec<_>>>()?;
            let col = |f: fn(&OperatingCharacteristics) -> f64| {
                MeanSd::of(&results.iter().map(f).collect::<Vec<_>>())
            };
            Ok(SweepRow {
                label: setting.label,
                safety: col(|r| r.safety),
                reliability: col(|r| r.pcs),
                pct_toxicity: col(|r| r.pct_toxicity),
                results,
            })
        })
        .collect()
}
