use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{aggregate, OperatingCharacteristics};
use super::scenario::Scenario;
use crate::bayes::MtdSelection;
use crate::design::{Design, DesignRegistry, DesignSpec};
use crate::error::{Error, Result};
use crate::rules::{Decision, DoseOutcome};
use crate::state::{ConductLimits, StopReason, TrialState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CohortSize {
    Fixed(u32),
    /// Uniform on `min..=max`, drawn per cohort.
    Random { min: u32, max: u32 },
}

impl Default for CohortSize {
    fn default() -> Self {
        CohortSize::Fixed(3)
    }
}

impl CohortSize {
    fn draw(&self, rng: &mut ChaCha8Rng) -> u32 {
        match *self {
            CohortSize::Fixed(n) => n,
            CohortSize::Random { min, max } => rng.random_range(min..=max),
        }
    }

    fn largest(&self) -> u32 {
        match *self {
            CohortSize::Fixed(n) => n,
            CohortSize::Random { max, .. } => max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub design: DesignSpec,
    #[serde(default = "default_max_patients")]
    pub max_patients: u32,
    #[serde(default)]
    pub cohort: CohortSize,
    #[serde(default = "default_n_trials")]
    pub n_trials: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub consecutive_stop: Option<u32>,
    /// Let the last fixed-size cohort shrink to fit `max_patients`.
    /// Random cohort sizes are always truncated.
    #[serde(default)]
    pub truncate_final_cohort: bool,
}

fn default_max_patients() -> u32 {
    30
}

fn default_n_trials() -> u32 {
    1000
}

impl SimConfig {
    pub fn new(design: DesignSpec) -> Self {
        SimConfig {
            design,
            max_patients: default_max_patients(),
            cohort: CohortSize::default(),
            n_trials: default_n_trials(),
            seed: 0,
            consecutive_stop: None,
            truncate_final_cohort: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::param("n_trials", "must be at least 1"));
        }
        match self.cohort {
            CohortSize::Fixed(0) => return Err(Error::param("cohort", "size must be at least 1")),
            CohortSize::Fixed(n) if !self.truncate_final_cohort && self.max_patients % n != 0 => {
                return Err(Error::param(
                    "max_patients",
                    format!("{} is not a multiple of cohort size {n}", self.max_patients),
                ))
            }
            CohortSize::Random { min, max } if min == 0 || min > max => {
                return Err(Error::param("cohort", "random sizes need 1 <= min <= max"))
            }
            _ => {}
        }
        if self.max_patients == 0
            || (matches!(self.cohort, CohortSize::Fixed(_)) && self.max_patients < self.cohort.largest())
        {
            return Err(Error::param("max_patients", "must be at least one cohort"));
        }
        if self.consecutive_stop == Some(0) {
            return Err(Error::param("consecutive_stop", "must be at least 1"));
        }
        Ok(())
    }

    fn limits(&self) -> ConductLimits {
        ConductLimits {
            max_patients: Some(self.max_patients),
            consecutive_stop: self.consecutive_stop,
        }
    }
}

/// One cohort as logged by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialEvent {
    pub dose: usize,
    pub size: u32,
    pub dlt: u32,
    /// Cumulative patients and DLTs at `dose` once this cohort is in.
    pub n_at_dose: u32,
    pub x_at_dose: u32,
    /// The dose was the lowest or highest, or the next dose was closed, so
    /// the design could not move freely in both directions.
    pub constrained: bool,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub outcomes: Vec<DoseOutcome>,
    pub events: Vec<TrialEvent>,
    pub stop: StopReason,
    pub terminated_early: bool,
    pub selected: MtdSelection,
}

impl TrialRecord {
    pub fn total_patients(&self) -> u32 {
        self.outcomes.iter().map(|o| o.n_treated).sum()
    }

    pub fn total_dlts(&self) -> u32 {
        self.outcomes.iter().map(|o| o.n_dlt).sum()
    }

    /// Re-runs the logged cohorts through `design` and checks every decision.
    pub fn replay(&self, design: &dyn Design, limits: ConductLimits) -> Result<TrialState> {
        let mut state = TrialState::new(self.outcomes.len(), limits)?;
        for (i, ev) in self.events.iter().enumerate() {
            if state.current().value() != ev.dose {
                return Err(Error::param("events", format!("cohort {i} logged at the wrong dose")));
            }
            let (next, step) = state.advance(design, ev.size, ev.dlt)?;
            if step.decision != ev.decision {
                return Err(Error::param("events", format!("cohort {i} decision differs on replay")));
            }
            state = next;
        }
        Ok(state)
    }
}

fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

/// Simulates one trial. The random stream depends only on `(cfg.seed, trial_index)`.
pub fn run_trial(
    scenario: &Scenario,
    design: &dyn Design,
    cfg: &SimConfig,
    trial_index: u64,
) -> Result<TrialRecord> {
    if scenario.n_doses() != design.n_doses() {
        return Err(Error::LengthMismatch {
            expected: design.n_doses(),
            actual: scenario.n_doses(),
        });
    }
    let mut rng = trial_rng(cfg.seed, trial_index);
    let truncate = cfg.truncate_final_cohort || matches!(cfg.cohort, CohortSize::Random { .. });
    let mut state = TrialState::new(scenario.n_doses(), cfg.limits())?;
    let mut events = Vec::new();
    while state.is_active() {
        let remaining = state.remaining().unwrap_or(u32::MAX);
        let mut size = cfg.cohort.draw(&mut rng);
        if size > remaining {
            if !truncate {
                break;
            }
            size = remaining;
        }
        let dose = state.current().value();
        let constrained = dose == 1 || dose >= state.highest_allowed();
        let p = scenario.true_tox[dose - 1];
        let dlt = Binomial::new(size as u64, p)
            .map_err(|e| Error::ScenarioFormat(e.to_string()))?
            .sample(&mut rng) as u32;
        let (next, step) = state.advance(design, size, dlt)?;
        state = next;
        let o = state.outcome(dose);
        events.push(TrialEvent {
            dose,
            size,
            dlt,
            n_at_dose: o.n_treated,
            x_at_dose: o.n_dlt,
            constrained,
            decision: step.decision,
        });
    }
    let stop = state.stop_reason().unwrap_or(StopReason::SampleSizeReached);
    Ok(TrialRecord {
        outcomes: state.outcomes().to_vec(),
        selected: design.select_mtd(&state),
        events,
        stop,
        terminated_early: stop.is_toxicity_stop(),
    })
}

/// All trial records, in trial-index order.
pub fn simulate_records(
    scenario: &Scenario,
    design: &dyn Design,
    cfg: &SimConfig,
) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    scenario.validate()?;
    (0..cfg.n_trials as u64)
        .into_par_iter()
        .map(|i| run_trial(scenario, design, cfg, i))
        .collect()
}

pub fn run_simulation(scenario: &Scenario, cfg: &SimConfig) -> Result<OperatingCharacteristics> {
    run_simulation_with(&DesignRegistry::standard(), scenario, cfg)
}

pub fn run_simulation_with(
    registry: &DesignRegistry,
    scenario: &Scenario,
    cfg: &SimConfig,
) -> Result<OperatingCharacteristics> {
    let design = registry.build(&cfg.design)?;
    let records = simulate_records(scenario, design.as_ref(), cfg)?;
    let ei = cfg.design.interval()?;
    Ok(aggregate(scenario, design.name(), &ei, &records))
}
