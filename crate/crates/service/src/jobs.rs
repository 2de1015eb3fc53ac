use dosefind_core::sim::{run_simulation, OperatingCharacteristics, Scenario, SimConfig};
use serde::{Deserialize, Serialize};

/// Body of `POST /simulations`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationRequest {
    pub scenario: Scenario,
    pub config: SimConfig,
}

impl SimulationRequest {
    pub fn run(&self) -> Result<OperatingCharacteristics, String> {
        self.scenario.validate().map_err(|e| e.to_string())?;
        run_simulation(&self.scenario, &self.config).map_err(|e| e.to_string())
    }
}

/// The result exists only in the `Done` variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done { result: OperatingCharacteristics },
    Failed { error: String },
}

impl JobState {
    pub fn is_finished(&self) -> bool {
        matches!(self, JobState::Done { .. } | JobState::Failed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationJob {
    pub id: String,
    pub submitted_at_ms: u64,
    pub request: SimulationRequest,
    #[serde(flatten)]
    pub state: JobState,
}
