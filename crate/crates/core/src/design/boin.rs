use crate::bayes::{
    apply_safety_rules, dose_estimates, select_mtd_up_to, MtdSelection, MtdSelectionConfig,
    SafetyConfig, ESTIMATION_PRIOR,
};
use crate::error::Result;
use crate::interval::EquivalenceInterval;
use crate::rules::{boin_decision, BoinBoundaries, Decision, DoseIndex, DoseOutcome, Verdict};
use crate::state::{Cohort, Step, StopReason, TrialState};

use super::{open_next, Design, DesignSpec};

/// BOIN with its usual elimination rule (the same posterior tail test as
/// the i3+3 safety rules). The MTD is the dose whose isotonic estimate is
/// closest to target among doses still in play, with no upper cap.
#[derive(Debug, Clone)]
pub struct BoinDesign {
    ei: EquivalenceInterval,
    bounds: BoinBoundaries,
    n_doses: usize,
    safety: SafetyConfig,
    selection: MtdSelectionConfig,
}

impl BoinDesign {
    pub fn from_spec(spec: &DesignSpec) -> Result<Self> {
        spec.check_doses()?;
        spec.options.safety.validate()?;
        let ei = spec.interval()?;
        let bounds = match (spec.options.boin_lambda_e, spec.options.boin_lambda_d) {
            (None, None) => BoinBoundaries::from_interval(&ei)?,
            (e, d) => BoinBoundaries::new(e.unwrap_or(ei.lower()), d.unwrap_or(ei.upper()))?,
        };
        Ok(BoinDesign {
            ei,
            bounds,
            n_doses: spec.n_doses,
            safety: spec.options.safety,
            selection: MtdSelectionConfig {
                weighting: spec.options.pava_weighting,
                cap_at_upper: false,
            },
        })
    }

    pub fn boundaries(&self) -> &BoinBoundaries {
        &self.bounds
    }

    fn full_decision(
        &self,
        outcome: DoseOutcome,
        dose: DoseIndex,
        next: Option<DoseOutcome>,
    ) -> Result<Decision> {
        let bounded = boin_decision(outcome, &self.bounds, dose)?;
        Ok(apply_safety_rules(
            bounded,
            dose,
            outcome,
            next,
            self.ei.p_target(),
            &self.safety,
        ))
    }
}

impl Design for BoinDesign {
    fn name(&self) -> &'static str {
        "boin"
    }

    fn n_doses(&self) -> usize {
        self.n_doses
    }

    fn decide(&self, state: &TrialState, _last: Option<&Cohort>) -> Result<Step> {
        let dose = state.current();
        let d = dose.value();
        let next = (d < self.n_doses).then(|| state.outcome(d + 1));
        let mut decision = self.full_decision(state.outcome(d), dose, next)?;
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
        self.full_decision(outcome, dose, None)
    }
}
