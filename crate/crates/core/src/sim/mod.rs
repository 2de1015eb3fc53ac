//! Monte Carlo trial simulation and operating characteristics.

mod engine;
mod frequency;
mod metrics;
pub mod report;
mod scenario;
mod sweep;

pub use engine::{
    run_simulation, run_simulation_with, run_trial, simulate_records, CohortSize, SimConfig,
    TrialEvent, TrialRecord,
};
pub use frequency::{decision_frequency, FrequencyCell};
pub use metrics::{aggregate, true_mtd_set, OperatingCharacteristics, TrueMtdSet};
pub use scenario::{
    builtin_for_target, builtin_scenarios, builtin_selector, scenarios_from_toml,
    scenarios_to_toml, Scenario,
};
pub use sweep::{sensitivity_sweep, MeanSd, SweepAxis, SweepRow, SweepSetting};
