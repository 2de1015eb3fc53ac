use crate::bayes::MtdSelection;
use crate::error::{Error, Result};
use crate::rules::{
    three_plus_three_decision, three_plus_three_raw, Decision, DoseIndex, DoseOutcome, RawDecision,
    Verdict,
};
use crate::state::{Cohort, Step, StopReason, TrialState};

use super::{open_next, Design, DesignSpec};

/// Classic 3+3 in cohorts of three.
///
/// A dose that exceeds the MTD (2+ DLTs) is dropped with every dose above
/// it. The trial stops with an MTD once a dose is cleared with six patients
/// and nothing above it is open, or once the top dose clears its first
/// three. The MTD is the highest open dose with at most one DLT in six.
#[derive(Debug, Clone)]
pub struct ThreePlusThreeDesign {
    n_doses: usize,
}

impl ThreePlusThreeDesign {
    pub fn new(n_doses: usize) -> Self {
        ThreePlusThreeDesign { n_doses }
    }

    pub fn from_spec(spec: &DesignSpec) -> Result<Self> {
        spec.check_doses()?;
        spec.interval()?;
        Ok(ThreePlusThreeDesign::new(spec.n_doses))
    }
}

impl Design for ThreePlusThreeDesign {
    fn name(&self) -> &'static str {
        "3p3"
    }

    fn n_doses(&self) -> usize {
        self.n_doses
    }

    fn decide(&self, state: &TrialState, last: Option<&Cohort>) -> Result<Step> {
        if let Some(c) = last {
            if c.size != 3 {
                return Err(Error::param("cohort_size", "3+3 enrolls cohorts of exactly 3"));
            }
        }
        let d = state.current().value();
        let outcome = state.outcome(d);
        let raw = three_plus_three_raw(outcome)?;
        Ok(match raw {
            RawDecision::Escalate if d == self.n_doses => {
                Step::stop(Decision::stay(d), StopReason::MtdDetermined)
            }
            RawDecision::Escalate if !open_next(state, d) => {
                if outcome.n_treated >= 6 {
                    Step::stop(Decision::stay(d), StopReason::MtdDetermined)
                } else {
                    Step::go(Decision::stay(d))
                }
            }
            RawDecision::Escalate => Step::go(Decision::escalate(d + 1)),
            RawDecision::Stay => Step::go(Decision::stay(d)),
            RawDecision::DeEscalate if d == 1 => Step::stop(
                Decision {
                    verdict: Verdict::Terminate,
                    target_dose: None,
                    exclude_from: Some(1),
                },
                StopReason::SafetyTermination,
            ),
            RawDecision::DeEscalate => {
                let decision = Decision {
                    verdict: Verdict::DeEscalate,
                    target_dose: Some(d - 1),
                    exclude_from: Some(d),
                };
                if state.outcome(d - 1).n_treated >= 6 {
                    Step::stop(decision, StopReason::MtdDetermined)
                } else {
                    Step::go(decision)
                }
            }
        })
    }

    fn select_mtd(&self, state: &TrialState) -> MtdSelection {
        if state.stop_reason().is_some_and(|r| r.is_toxicity_stop()) {
            return MtdSelection::NoSelection;
        }
        (1..=state.highest_allowed())
            .rev()
            .find(|&d| {
                let o = state.outcome(d);
                o.n_treated > 0 && 6 * o.n_dlt <= o.n_treated
            })
            .map_or(MtdSelection::NoSelection, MtdSelection::Dose)
    }

    fn table_decision(&self, outcome: DoseOutcome, dose: DoseIndex) -> Result<Decision> {
        three_plus_three_decision(outcome, dose)
    }

    fn tabulates(&self, n: u32) -> bool {
        n == 3 || n == 6
    }
}
