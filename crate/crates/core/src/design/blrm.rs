use crate::bayes::{dose_estimates, select_mtd, MtdSelection, ESTIMATION_PRIOR};
use crate::error::{Error, Result};
use crate::interval::EquivalenceInterval;
use crate::model::{BlrmConfig, BlrmModel};
use crate::rules::Verdict;
use crate::state::{Cohort, Step, StopReason, TrialState};

use super::{Design, DesignSpec};

#[derive(Debug, Clone)]
pub struct BlrmDesign {
    model: BlrmModel,
    ei: EquivalenceInterval,
}

impl BlrmDesign {
    pub fn new(cfg: BlrmConfig, ei: EquivalenceInterval) -> Result<Self> {
        Ok(BlrmDesign {
            model: BlrmModel::new(cfg)?,
            ei,
        })
    }

    pub fn from_spec(spec: &DesignSpec) -> Result<Self> {
        spec.check_doses()?;
        let ei = spec.interval()?;
        let o = &spec.options;
        let mut cfg = BlrmConfig::default_for(spec.n_doses, spec.p_target, spec.eps_lo, spec.eps_hi);
        if let Some(doses) = &o.blrm_raw_doses {
            if doses.len() != spec.n_doses {
                return Err(Error::LengthMismatch {
                    expected: spec.n_doses,
                    actual: doses.len(),
                });
            }
            cfg.ref_dose = doses[(spec.n_doses + 2) / 2 - 1];
            cfg.raw_doses = doses.clone();
        }
        if let Some(h) = o.blrm_hyper {
            cfg.hyper = h;
        }
        if let Some(p) = o.blrm_p_ewoc {
            cfg.p_ewoc = p;
        }
        cfg.literal_interval = o.blrm_literal_interval;
        cfg.safety = o.safety;
        BlrmDesign::new(cfg, ei)
    }

    pub fn model(&self) -> &BlrmModel {
        &self.model
    }
}

impl Design for BlrmDesign {
    fn name(&self) -> &'static str {
        "blrm"
    }

    fn n_doses(&self) -> usize {
        self.model.n_doses()
    }

    fn decide(&self, state: &TrialState, _last: Option<&Cohort>) -> Result<Step> {
        let data = state.data();
        let dose = state.current();
        let decision = self.model.recommend(&data, dose, state.highest_allowed())?;
        if decision.verdict != Verdict::Terminate {
            return Ok(Step::go(decision));
        }
        // terminated by the dose-1 safety rule or by overdose control
        let reason = if crate::bayes::safety_veto(
            data.get(0),
            self.model.config().p_target,
            &self.model.config().safety,
        ) && dose.is_lowest()
        {
            StopReason::SafetyTermination
        } else {
            StopReason::AllDosesOverdosed
        };
        Ok(Step::stop(decision, reason))
    }

    fn select_mtd(&self, state: &TrialState) -> MtdSelection {
        if state.stop_reason().is_some_and(|r| r.is_toxicity_stop()) {
            return MtdSelection::NoSelection;
        }
        select_mtd(&dose_estimates(state.outcomes(), ESTIMATION_PRIOR), &self.ei)
    }
}
