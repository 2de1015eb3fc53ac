use crate::bayes::{
    apply_safety_rules, decision_with_safety, dose_estimates, select_mtd_up_to, MtdSelection,
    MtdSelectionConfig, SafetyConfig, ESTIMATION_PRIOR,
};
use crate::error::Result;
use crate::interval::EquivalenceInterval;
use crate::rules::{apply_dose_boundaries, i3p3_raw, Decision, DoseIndex, DoseOutcome, Verdict};
use crate::state::{Cohort, Step, StopReason, TrialState};

use super::{open_next, Design, DesignSpec};

#[derive(Debug, Clone)]
pub struct I3p3Design {
    ei: EquivalenceInterval,
    n_doses: usize,
    safety: SafetyConfig,
    selection: MtdSelectionConfig,
}

impl I3p3Design {
    pub fn new(ei: EquivalenceInterval, n_doses: usize, safety: SafetyConfig) -> Self {
        I3p3Design {
            ei,
            n_doses,
            safety,
            selection: MtdSelectionConfig::default(),
        }
    }

    pub fn from_spec(spec: &DesignSpec) -> Result<Self> {
        spec.check_doses()?;
        spec.options.safety.validate()?;
        let mut d = I3p3Design::new(spec.interval()?, spec.n_doses, spec.options.safety);
        d.selection.weighting = spec.options.pava_weighting;
        Ok(d)
    }

    pub fn interval(&self) -> &EquivalenceInterval {
        &self.ei
    }
}

impl Design for I3p3Design {
    fn name(&self) -> &'static str {
        "i3p3"
    }

    fn n_doses(&self) -> usize {
        self.n_doses
    }

    fn decide(&self, state: &TrialState, _last: Option<&Cohort>) -> Result<Step> {
        let dose = state.current();
        let d = dose.value();
        let outcome = state.outcome(d);
        let next = (d < self.n_doses).then(|| state.outcome(d + 1));
        let mut decision = decision_with_safety(outcome, dose, &self.ei, &self.safety, next)?;
        if decision.verdict == Verdict::Escalate && !open_next(state, d) {
            decision = Decision::stay(d);
        }
        Ok(match decision.verdict {
            Verdict::Terminate => Step::stop(decision, StopReason::SafetyTermination),
            _ => Step::go(decision),
        })
    }

    fn select_mtd(&self, state: &TrialState) -> MtdSelection {
        if state.stop_reason().is_some_and(|r| r.is_toxicity_stop()) {
            return MtdSelection::NoSelection;
        }
        let est = dose_estimates(state.outcomes(), ESTIMATION_PRIOR);
        select_mtd_up_to(&est, &self.ei, &self.selection, state.highest_allowed())
    }

    fn table_decision(&self, outcome: DoseOutcome, dose: DoseIndex) -> Result<Decision> {
        let bounded = apply_dose_boundaries(i3p3_raw(outcome, &self.ei)?, dose);
        Ok(apply_safety_rules(
            bounded,
            dose,
            outcome,
            None,
            self.ei.p_target(),
            &self.safety,
        ))
    }
}
