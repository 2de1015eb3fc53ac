//! Trial state and the cohort-by-cohort conduct loop shared by the
//! simulator and the live-trial service.

use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::model::TrialData;
use crate::rules::{Decision, DoseIndex, DoseOutcome, Verdict};

/// One cohort's outcome at the dose it was treated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cohort {
    pub dose: usize,
    pub size: u32,
    pub dlt: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Planned sample size used up.
    SampleSizeReached,
    /// The lowest dose is too toxic.
    SafetyTermination,
    /// Every dose breaks overdose control.
    AllDosesOverdosed,
    /// The design has settled on its MTD (3+3).
    MtdDetermined,
    /// Too many consecutive patients at one dose.
    ConsecutiveAssignments,
    /// Closed by an operator.
    Operator,
}

impl StopReason {
    /// Whether the stop is a toxicity-driven early termination.
    pub fn is_toxicity_stop(&self) -> bool {
        matches!(self, StopReason::SafetyTermination | StopReason::AllDosesOverdosed)
    }
}

/// Trial-level limits enforced by the conduct loop, not by designs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConductLimits {
    #[serde(default)]
    pub max_patients: Option<u32>,
    #[serde(default)]
    pub consecutive_stop: Option<u32>,
}

/// A design's answer to one cohort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<StopReason>,
}

impl Step {
    pub fn go(decision: Decision) -> Self {
        Step {
            decision,
            stop: None,
        }
    }

    pub fn stop(decision: Decision, reason: StopReason) -> Self {
        Step {
            decision,
            stop: Some(reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialState {
    outcomes: Vec<DoseOutcome>,
    current: usize,
    excluded_from: Option<usize>,
    stop: Option<StopReason>,
    patients: u32,
    /// Patients treated back to back at the current dose.
    run_length: u32,
    limits: ConductLimits,
}

impl TrialState {
    /// Fresh trial at dose 1.
    pub fn new(n_doses: usize, limits: ConductLimits) -> Result<Self> {
        if n_doses == 0 {
            return Err(Error::param("n_doses", "need at least one dose"));
        }
        Ok(TrialState {
            outcomes: vec![DoseOutcome::default(); n_doses],
            current: 1,
            excluded_from: None,
            stop: None,
            patients: 0,
            run_length: 0,
            limits,
        })
    }

    /// A snapshot at `current` with the given per-dose data, for one-off queries.
    pub fn from_history(outcomes: Vec<DoseOutcome>, current: usize) -> Result<Self> {
        DoseIndex::new(current, outcomes.len())?;
        let patients = outcomes.iter().map(|o| o.n_treated).sum();
        let run_length = outcomes[current - 1].n_treated;
        Ok(TrialState {
            outcomes,
            current,
            excluded_from: None,
            stop: None,
            patients,
            run_length,
            limits: ConductLimits::default(),
        })
    }

    pub fn n_doses(&self) -> usize {
        self.outcomes.len()
    }

    pub fn current(&self) -> DoseIndex {
        DoseIndex::new(self.current, self.outcomes.len()).expect("current dose is in range")
    }

    pub fn outcome(&self, dose: usize) -> DoseOutcome {
        self.outcomes[dose - 1]
    }

    pub fn outcomes(&self) -> &[DoseOutcome] {
        &self.outcomes
    }

    pub fn data(&self) -> TrialData {
        TrialData::new(self.outcomes.clone()).expect("state outcomes are valid")
    }

    pub fn excluded_from(&self) -> Option<usize> {
        self.excluded_from
    }

    /// Highest dose that may still be assigned.
    pub fn highest_allowed(&self) -> usize {
        self.excluded_from.map_or(self.n_doses(), |e| e - 1)
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stop
    }

    pub fn is_active(&self) -> bool {
        self.stop.is_none()
    }

    pub fn patients(&self) -> u32 {
        self.patients
    }

    pub fn limits(&self) -> ConductLimits {
        self.limits
    }

    /// Patients the next cohort may enroll before `max_patients` is hit.
    pub fn remaining(&self) -> Option<u32> {
        self.limits.max_patients.map(|m| m.saturating_sub(self.patients))
    }

    /// Treats a cohort at the current dose and asks `design` for the next
    /// assignment. Returns the new state; `self` is left untouched so a
    /// failure changes nothing.
    pub fn advance(&self, design: &dyn Design, size: u32, dlt: u32) -> Result<(TrialState, Step)> {
        if let Some(reason) = self.stop {
            return Err(Error::param(
                "trial",
                format!("trial is stopped ({reason:?}); no further cohorts"),
            ));
        }
        if size == 0 {
            return Err(Error::param("cohort_size", "must be at least 1"));
        }
        let observed = DoseOutcome::new(size, dlt)?;
        if design.n_doses() != self.n_doses() {
            return Err(Error::LengthMismatch {
                expected: design.n_doses(),
                actual: self.n_doses(),
            });
        }
        let cohort = Cohort {
            dose: self.current,
            size,
            dlt,
        };
        let mut next = self.clone();
        next.outcomes[self.current - 1] = next.outcomes[self.current - 1].add(observed);
        next.patients += size;
        next.run_length += size;

        let step = design.decide(&next, Some(&cohort))?;
        let step = next.apply(step);
        Ok((next, step))
    }

    /// Applies exclusions, moves the current dose and records any stop.
    /// Returns the step as enforced.
    fn apply(&mut self, step: Step) -> Step {
        let Step { mut decision, mut stop } = step;
        if let Some(e) = decision.exclude_from {
            self.excluded_from = Some(self.excluded_from.map_or(e, |x| x.min(e)));
        }
        if let Some(t) = decision.target_dose {
            let allowed = self.highest_allowed();
            if allowed == 0 {
                decision = Decision {
                    verdict: Verdict::Terminate,
                    target_dose: None,
                    exclude_from: decision.exclude_from,
                };
            } else if t > allowed {
                let verdict = Decision::toward(self.current, allowed).verdict;
                decision = Decision {
                    verdict,
                    target_dose: Some(allowed),
                    exclude_from: decision.exclude_from,
                };
            }
        }
        match decision.target_dose {
            None => {
                stop = Some(stop.unwrap_or(StopReason::SafetyTermination));
            }
            Some(t) => {
                if t != self.current {
                    self.run_length = 0;
                }
                self.current = t;
            }
        }
        if stop.is_none() {
            if let Some(m) = self.limits.consecutive_stop {
                if self.run_length >= m {
                    stop = Some(StopReason::ConsecutiveAssignments);
                }
            }
        }
        if stop.is_none() && self.remaining() == Some(0) {
            stop = Some(StopReason::SampleSizeReached);
        }
        self.stop = stop;
        Step { decision, stop }
    }

    /// Closes an active trial by operator request.
    pub fn close(&mut self) {
        if self.stop.is_none() {
            self.stop = Some(StopReason::Operator);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{DesignRegistry, DesignSpec};

    fn i3p3() -> Box<dyn Design> {
        DesignRegistry::standard()
            .build(&DesignSpec::new("i3p3", 0.3, 0.05, 0.05, 6))
            .unwrap()
    }

    #[test]
    fn starts_at_dose_one() {
        let s = TrialState::new(6, ConductLimits::default()).unwrap();
        assert_eq!(s.current().value(), 1);
        assert!(s.is_active());
        assert!(TrialState::new(0, ConductLimits::default()).is_err());
    }

    #[test]
    fn escalates_and_accumulates() {
        let d = i3p3();
        let s = TrialState::new(6, ConductLimits::default()).unwrap();
        let (s, step) = s.advance(d.as_ref(), 3, 0).unwrap();
        assert_eq!(step.decision, Decision::escalate(2));
        assert_eq!(s.current().value(), 2);
        assert_eq!(s.outcome(1), DoseOutcome::new(3, 0).unwrap());
        assert_eq!(s.patients(), 3);
    }

    #[test]
    fn failure_leaves_state_unchanged() {
        let d = i3p3();
        let s = TrialState::new(6, ConductLimits::default()).unwrap();
        let before = s.clone();
        assert!(s.advance(d.as_ref(), 3, 4).is_err());
        assert!(s.advance(d.as_ref(), 0, 0).is_err());
        assert_eq!(s, before);
    }

    #[test]
    fn safety_stop_at_dose_one() {
        let d = i3p3();
        let s = TrialState::new(6, ConductLimits::default()).unwrap();
        let (s, step) = s.advance(d.as_ref(), 3, 3).unwrap();
        assert_eq!(step.decision.verdict, Verdict::Terminate);
        assert_eq!(s.stop_reason(), Some(StopReason::SafetyTermination));
        assert!(s.advance(d.as_ref(), 3, 0).is_err());
    }

    #[test]
    fn sample_size_stop() {
        let d = i3p3();
        let limits = ConductLimits {
            max_patients: Some(6),
            consecutive_stop: None,
        };
        let s = TrialState::new(6, limits).unwrap();
        let (s, _) = s.advance(d.as_ref(), 3, 0).unwrap();
        assert!(s.is_active());
        assert_eq!(s.remaining(), Some(3));
        let (s, step) = s.advance(d.as_ref(), 3, 0).unwrap();
        assert_eq!(step.stop, Some(StopReason::SampleSizeReached));
        assert!(!s.is_active());
    }

    #[test]
    fn consecutive_rule_stops_on_long_runs() {
        let d = i3p3();
        let limits = ConductLimits {
            max_patients: None,
            consecutive_stop: Some(6),
        };
        let s = TrialState::new(6, limits).unwrap();
        // 1/3 stays, 2/6 stays: six back to back at dose 1
        let (s, step) = s.advance(d.as_ref(), 3, 1).unwrap();
        assert_eq!(step.stop, None);
        let (_, step) = s.advance(d.as_ref(), 3, 1).unwrap();
        assert_eq!(step.decision, Decision::stay(1));
        assert_eq!(step.stop, Some(StopReason::ConsecutiveAssignments));
    }

    #[test]
    fn exclusions_are_enforced() {
        let d = i3p3();
        let s = TrialState::new(6, ConductLimits::default()).unwrap();
        let (s, _) = s.advance(d.as_ref(), 3, 0).unwrap();
        // 3/3 at dose 2 is unacceptable
        let (s, step) = s.advance(d.as_ref(), 3, 3).unwrap();
        assert_eq!(step.decision.verdict, Verdict::DeEscalateUnacceptable);
        assert_eq!(s.excluded_from(), Some(2));
        assert_eq!(s.highest_allowed(), 1);
        // clean data at dose 1 would escalate, but dose 2 is still vetoed
        let (s, step) = s.advance(d.as_ref(), 3, 0).unwrap();
        assert_eq!(step.decision.verdict, Verdict::Stay);
        assert_eq!(step.decision.target_dose, Some(1));
        assert_eq!(s.current().value(), 1);
    }

    #[test]
    fn operator_close() {
        let mut s = TrialState::new(3, ConductLimits::default()).unwrap();
        s.close();
        assert_eq!(s.stop_reason(), Some(StopReason::Operator));
    }
}
