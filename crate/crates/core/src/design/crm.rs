use crate::bayes::{dose_estimates, select_mtd, MtdSelection, ESTIMATION_PRIOR};
use crate::error::Result;
use crate::interval::EquivalenceInterval;
use crate::model::{CrmConfig, CrmModel};
use crate::rules::{DoseOutcome, Verdict};
use crate::state::{Cohort, Step, StopReason, TrialState};

use super::{Design, DesignSpec};

#[derive(Debug, Clone)]
pub struct CrmDesign {
    model: CrmModel,
    ei: EquivalenceInterval,
}

impl CrmDesign {
    pub fn new(cfg: CrmConfig, ei: EquivalenceInterval) -> Result<Self> {
        Ok(CrmDesign {
            model: CrmModel::new(cfg)?,
            ei,
        })
    }

    pub fn from_spec(spec: &DesignSpec) -> Result<Self> {
        spec.check_doses()?;
        let ei = spec.interval()?;
        let mut cfg = match &spec.options.crm_skeleton {
            Some(s) => CrmConfig::new(s.clone(), spec.p_target),
            None => CrmConfig::with_default_skeleton(spec.p_target, spec.n_doses)?,
        };
        if cfg.skeleton.len() != spec.n_doses {
            return Err(crate::Error::LengthMismatch {
                expected: spec.n_doses,
                actual: cfg.skeleton.len(),
            });
        }
        if let Some(v) = spec.options.crm_prior_var {
            cfg.log_theta_prior_var = v;
        }
        cfg.safety = spec.options.safety;
        CrmDesign::new(cfg, ei)
    }

    pub fn model(&self) -> &CrmModel {
        &self.model
    }
}

impl Design for CrmDesign {
    fn name(&self) -> &'static str {
        "crm"
    }

    fn n_doses(&self) -> usize {
        self.model.n_doses()
    }

    fn decide(&self, state: &TrialState, last: Option<&Cohort>) -> Result<Step> {
        let last = last.map(|c| DoseOutcome {
            n_treated: c.size,
            n_dlt: c.dlt,
        });
        let decision =
            self.model
                .recommend(&state.data(), state.current(), last, state.highest_allowed())?;
        Ok(match decision.verdict {
            Verdict::Terminate => Step::stop(decision, StopReason::SafetyTermination),
            _ => Step::go(decision),
        })
    }

    fn select_mtd(&self, state: &TrialState) -> MtdSelection {
        if state.stop_reason().is_some_and(|r| r.is_toxicity_stop()) {
            return MtdSelection::NoSelection;
        }
        select_mtd(&dose_estimates(state.outcomes(), ESTIMATION_PRIOR), &self.ei)
    }
}
