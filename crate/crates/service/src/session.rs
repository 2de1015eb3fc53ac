use std::time::{SystemTime, UNIX_EPOCH};

use dosefind_core::bayes::MtdSelection;
use dosefind_core::rules::{Decision, Verdict};
use dosefind_core::{ConductLimits, Design, DesignRegistry, DesignSpec, StopReason, TrialState};
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, FieldError};

/// Body of `POST /trials`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    pub spec: DesignSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_patients: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consecutive_stop: Option<u32>,
}

impl TrialConfig {
    fn limits(&self) -> ConductLimits {
        ConductLimits {
            max_patients: self.max_patients,
            consecutive_stop: self.consecutive_stop,
        }
    }

    /// Builds the design, collecting field-level problems first.
    pub fn build(&self, registry: &DesignRegistry) -> Result<Box<dyn Design>, ApiError> {
        let mut errors = Vec::new();
        let mut field = |f: &str, m: &str| {
            errors.push(FieldError {
                field: f.into(),
                message: m.into(),
            })
        };
        if self.spec.n_doses == 0 {
            field("spec.n_doses", "need at least one dose");
        }
        if !(self.spec.p_target > 0.0 && self.spec.p_target < 1.0) {
            field("spec.p_target", "must lie in (0, 1)");
        }
        if !(self.spec.eps_lo >= 0.0) {
            field("spec.eps_lo", "must be non-negative");
        }
        if !(self.spec.eps_hi >= 0.0) {
            field("spec.eps_hi", "must be non-negative");
        }
        if self.spec.p_target - self.spec.eps_lo < 0.0 {
            field("spec.eps_lo", "interval lower bound is below 0");
        }
        if self.spec.p_target + self.spec.eps_hi > 1.0 {
            field("spec.eps_hi", "interval upper bound is above 1");
        }
        if self.max_patients == Some(0) {
            field("max_patients", "must be at least 1");
        }
        if self.consecutive_stop == Some(0) {
            field("consecutive_stop", "must be at least 1");
        }
        if !errors.is_empty() {
            let message = errors
                .iter()
                .map(|e| format!("{}: {}", e.field, e.message))
                .collect::<Vec<_>>()
                .join("; ");
            return Err(ApiError::InvalidConfig { message, errors });
        }
        registry.build(&self.spec).map_err(ApiError::config)
    }
}

/// One line of a trial's event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TrialEvent {
    Created {
        at_ms: u64,
        id: String,
        config: TrialConfig,
    },
    Cohort {
        at_ms: u64,
        seq: u32,
        dose: usize,
        cohort_size: u32,
        dlt_count: u32,
        decision: Decision,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stop: Option<StopReason>,
    },
    Finalized {
        at_ms: u64,
        operator_override: bool,
        selection: MtdSelection,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Active,
    Terminated,
    Completed,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Active => "active",
            Status::Terminated => "terminated",
            Status::Completed => "completed",
        }
    }
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug)]
pub struct Session {
    id: String,
    config: TrialConfig,
    design: Box<dyn Design>,
    state: TrialState,
    events: Vec<TrialEvent>,
    selection: Option<MtdSelection>,
}

/// A state change computed but not yet applied.
pub struct Pending {
    state: TrialState,
    selection: Option<MtdSelection>,
    pub event: TrialEvent,
}

impl Session {
    pub fn create(
        registry: &DesignRegistry,
        id: String,
        config: TrialConfig,
    ) -> Result<Session, ApiError> {
        let design = config.build(registry)?;
        let state =
            TrialState::new(design.n_doses(), config.limits()).map_err(ApiError::config)?;
        let created = TrialEvent::Created {
            at_ms: now_ms(),
            id: id.clone(),
            config: config.clone(),
        };
        Ok(Session {
            id,
            config,
            design,
            state,
            events: vec![created],
            selection: None,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn events(&self) -> &[TrialEvent] {
        &self.events
    }

    pub fn state(&self) -> &TrialState {
        &self.state
    }

    pub fn status(&self) -> Status {
        if self.selection.is_some() {
            Status::Completed
        } else if self.state.is_active() {
            Status::Active
        } else {
            Status::Terminated
        }
    }

    /// Computes the outcome of entering a cohort without touching the session.
    pub fn plan_cohort(&self, cohort_size: u32, dlt_count: u32) -> Result<Pending, ApiError> {
        let status = self.status();
        if status != Status::Active {
            return Err(ApiError::SessionClosed {
                id: self.id.clone(),
                status: status.as_str(),
            });
        }
        if cohort_size == 0 {
            return Err(ApiError::InvalidOutcome("cohort_size must be at least 1".into()));
        }
        if dlt_count > cohort_size {
            return Err(ApiError::InvalidOutcome(format!(
                "dlt_count {dlt_count} exceeds cohort_size {cohort_size}"
            )));
        }
        if let Some(rem) = self.state.remaining() {
            if cohort_size > rem {
                return Err(ApiError::InvalidOutcome(format!(
                    "cohort_size {cohort_size} exceeds the {rem} remaining patients"
                )));
            }
        }
        let dose = self.state.current().value();
        let (state, step) = self
            .state
            .advance(self.design.as_ref(), cohort_size, dlt_count)
            .map_err(|e| ApiError::InvalidOutcome(e.to_string()))?;
        Ok(Pending {
            state,
            selection: None,
            event: TrialEvent::Cohort {
                at_ms: now_ms(),
                seq: self.cohort_count() + 1,
                dose,
                cohort_size,
                dlt_count,
                decision: step.decision,
                stop: step.stop,
            },
        })
    }

    /// `None` when the session is already completed.
    pub fn plan_finalize(&self, operator_override: bool) -> Result<Option<Pending>, ApiError> {
        match self.status() {
            Status::Completed => return Ok(None),
            Status::Active if !operator_override => {
                return Err(ApiError::SessionActive(self.id.clone()))
            }
            _ => {}
        }
        let mut state = self.state.clone();
        state.close();
        let selection = self.design.select_mtd(&state);
        Ok(Some(Pending {
            state,
            selection: Some(selection),
            event: TrialEvent::Finalized {
                at_ms: now_ms(),
                operator_override: self.status() == Status::Active,
                selection,
            },
        }))
    }

    pub fn commit(&mut self, pending: Pending) {
        self.state = pending.state;
        if pending.selection.is_some() {
            self.selection = pending.selection;
        }
        self.events.push(pending.event);
    }

    pub fn selection(&self) -> Option<MtdSelection> {
        self.selection
    }

    fn cohort_count(&self) -> u32 {
        self.events
            .iter()
            .filter(|e| matches!(e, TrialEvent::Cohort { .. }))
            .count() as u32
    }

    /// Rebuilds a session from its log, recomputing every decision and
    /// rejecting the log if any stored decision differs.
    pub fn replay(registry: &DesignRegistry, events: Vec<TrialEvent>) -> Result<Session, String> {
        let mut iter = events.into_iter();
        let created = iter.next();
        let Some(TrialEvent::Created { id, config, .. }) = created.clone() else {
            return Err("log does not start with a created event".into());
        };
        let mut session = Session::create(registry, id, config).map_err(|e| e.to_string())?;
        session.events[0] = created.unwrap();
        for ev in iter {
            match &ev {
                TrialEvent::Cohort {
                    seq,
                    dose,
                    cohort_size,
                    dlt_count,
                    decision,
                    stop,
                    ..
                } => {
                    if session.state.current().value() != *dose {
                        return Err(format!("cohort {seq} logged at dose {dose}, state is elsewhere"));
                    }
                    let p = session
                        .plan_cohort(*cohort_size, *dlt_count)
                        .map_err(|e| format!("cohort {seq}: {e}"))?;
                    let TrialEvent::Cohort { decision: d2, stop: s2, .. } = p.event else {
                        unreachable!()
                    };
                    if d2 != *decision || s2 != *stop {
                        return Err(format!("cohort {seq}: stored decision differs on replay"));
                    }
                    session.commit(Pending { event: ev.clone(), ..p });
                }
                TrialEvent::Finalized {
                    operator_override,
                    selection,
                    ..
                } => {
                    let p = session
                        .plan_finalize(*operator_override)
                        .map_err(|e| e.to_string())?
                        .ok_or("finalized twice")?;
                    if p.selection != Some(*selection) {
                        return Err("stored MTD selection differs on replay".into());
                    }
                    session.commit(Pending { event: ev.clone(), ..p });
                }
                TrialEvent::Created { .. } => return Err("second created event".into()),
            }
        }
        Ok(session)
    }

    pub fn view(&self) -> TrialView {
        let highest = self.state.highest_allowed();
        let doses = self
            .state
            .outcomes()
            .iter()
            .enumerate()
            .map(|(i, o)| DoseView {
                dose: i + 1,
                n: o.n_treated,
                x: o.n_dlt,
                excluded: i + 1 > highest,
            })
            .collect();
        let mut totals = vec![(0u32, 0u32); self.state.n_doses()];
        let history = self
            .events
            .iter()
            .filter_map(|e| match *e {
                TrialEvent::Cohort {
                    at_ms,
                    seq,
                    dose,
                    cohort_size,
                    dlt_count,
                    decision,
                    stop,
                } => {
                    let t = &mut totals[dose - 1];
                    t.0 += cohort_size;
                    t.1 += dlt_count;
                    Some(CohortView {
                        seq,
                        at_ms,
                        dose,
                        cohort_size,
                        dlt_count,
                        n_at_dose: t.0,
                        x_at_dose: t.1,
                        decision: DecisionView::from(decision),
                        stop_reason: stop,
                    })
                }
                _ => None,
            })
            .collect();
        TrialView {
            id: self.id.clone(),
            status: self.status(),
            config: self.config.clone(),
            current_dose: self.state.current().value(),
            highest_allowed: highest,
            patients: self.state.patients(),
            stop_reason: self.state.stop_reason(),
            doses,
            history,
            selection: self.selection,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionView {
    /// `E`, `S`, `D`, `DU` or `T`.
    pub code: String,
    pub verdict: Verdict,
    pub next_dose: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclude_from: Option<usize>,
    /// Short form such as `D → dose 3`.
    pub text: String,
    /// Sentence for display, such as `De-escalate to dose 3`.
    pub message: String,
}

impl From<Decision> for DecisionView {
    fn from(d: Decision) -> Self {
        let message = match (d.verdict, d.target_dose) {
            (Verdict::Escalate, Some(t)) => format!("Escalate to dose {t}"),
            (Verdict::Stay, Some(t)) => format!("Stay at dose {t}"),
            (Verdict::DeEscalate, Some(t)) => format!("De-escalate to dose {t}"),
            (Verdict::DeEscalateUnacceptable, Some(t)) => format!(
                "De-escalate to dose {t}; dose {} and above are excluded",
                d.exclude_from.unwrap_or(t + 1)
            ),
            _ => "Terminate the trial".to_string(),
        };
        DecisionView {
            code: d.verdict.code().to_string(),
            verdict: d.verdict,
            next_dose: d.target_dose,
            exclude_from: d.exclude_from,
            text: d.to_string(),
            message,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseView {
    pub dose: usize,
    pub n: u32,
    pub x: u32,
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortView {
    pub seq: u32,
    pub at_ms: u64,
    pub dose: usize,
    pub cohort_size: u32,
    pub dlt_count: u32,
    pub n_at_dose: u32,
    pub x_at_dose: u32,
    pub decision: DecisionView,
    pub stop_reason: Option<StopReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialView {
    pub id: String,
    pub status: Status,
    pub config: TrialConfig,
    pub current_dose: usize,
    pub highest_allowed: usize,
    pub patients: u32,
    pub stop_reason: Option<StopReason>,
    pub doses: Vec<DoseView>,
    pub history: Vec<CohortView>,
    pub selection: Option<MtdSelection>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> TrialConfig {
        TrialConfig {
            spec: DesignSpec::new("i3p3", 0.3, 0.05, 0.05, 6),
            max_patients: Some(30),
            consecutive_stop: None,
        }
    }

    fn enter(s: &mut Session, size: u32, dlt: u32) -> Decision {
        let p = s.plan_cohort(size, dlt).unwrap();
        let TrialEvent::Cohort { decision, .. } = p.event else { unreachable!() };
        s.commit(p);
        decision
    }

    #[test]
    fn table_two_case_one_sequence() {
        let reg = DesignRegistry::standard();
        let mut s = Session::create(&reg, "t".into(), config()).unwrap();
        for _ in 0..3 {
            assert_eq!(enter(&mut s, 3, 0).verdict, Verdict::Escalate);
        }
        assert_eq!(s.state().current().value(), 4);
        assert_eq!(enter(&mut s, 3, 0), Decision::escalate(5));
        // back at dose 4 with 0/3, then 3/3 makes 3/6
        assert_eq!(enter(&mut s, 3, 2).verdict, Verdict::DeEscalate);
        assert_eq!(enter(&mut s, 3, 3), Decision::de_escalate(3));
    }

    #[test]
    fn three_of_three_at_dose_one_terminates() {
        let reg = DesignRegistry::standard();
        let mut s = Session::create(&reg, "t".into(), config()).unwrap();
        assert_eq!(enter(&mut s, 3, 3).verdict, Verdict::Terminate);
        assert_eq!(s.status(), Status::Terminated);
        assert!(matches!(s.plan_cohort(3, 0), Err(ApiError::SessionClosed { .. })));
        let p = s.plan_finalize(false).unwrap().unwrap();
        s.commit(p);
        assert_eq!(s.selection(), Some(MtdSelection::NoSelection));
        assert!(s.plan_finalize(false).unwrap().is_none());
    }

    #[test]
    fn bad_outcome_leaves_state_alone() {
        let reg = DesignRegistry::standard();
        let s = Session::create(&reg, "t".into(), config()).unwrap();
        assert!(matches!(s.plan_cohort(3, 4), Err(ApiError::InvalidOutcome(_))));
        assert_eq!(s.events().len(), 1);
        assert_eq!(s.state().patients(), 0);
    }

    #[test]
    fn replay_reproduces_state_and_rejects_tampering() {
        let reg = DesignRegistry::standard();
        let mut s = Session::create(&reg, "t".into(), config()).unwrap();
        enter(&mut s, 3, 0);
        enter(&mut s, 3, 1);
        enter(&mut s, 3, 2);
        let back = Session::replay(&reg, s.events().to_vec()).unwrap();
        assert_eq!(back.state(), s.state());
        let mut forged = s.events().to_vec();
        if let TrialEvent::Cohort { decision, .. } = &mut forged[2] {
            *decision = Decision::escalate(3);
        }
        assert!(Session::replay(&reg, forged).is_err());
    }

    #[test]
    fn field_errors_name_the_field() {
        let mut c = config();
        c.spec.eps_hi = 0.8;
        let err = c.build(&DesignRegistry::standard()).unwrap_err();
        let ApiError::InvalidConfig { errors, .. } = err else { panic!() };
        assert_eq!(errors[0].field, "spec.eps_hi");
    }
}
