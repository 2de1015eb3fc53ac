//! Stateless dose-assignment rules for the rule and interval designs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{to_fixed, EquivalenceInterval, Region, SCALE};

/// Patients treated and DLTs observed at one dose.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DoseOutcome {
    pub n_treated: u32,
    pub n_dlt: u32,
}

impl DoseOutcome {
    pub fn new(n_treated: u32, n_dlt: u32) -> Result<Self> {
        if n_dlt > n_treated {
            return Err(Error::InvalidOutcome {
                treated: n_treated,
                dlt: n_dlt,
            });
        }
        Ok(DoseOutcome { n_treated, n_dlt })
    }

    pub fn is_empty(&self) -> bool {
        self.n_treated == 0
    }

    pub fn add(&self, other: DoseOutcome) -> DoseOutcome {
        DoseOutcome {
            n_treated: self.n_treated + other.n_treated,
            n_dlt: self.n_dlt + other.n_dlt,
        }
    }
}

/// A 1-based dose level out of `total` ascending doses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DoseIndex {
    value: usize,
    total: usize,
}

impl DoseIndex {
    pub fn new(value: usize, total: usize) -> Result<Self> {
        if total == 0 || value == 0 || value > total {
            return Err(Error::InvalidDose { value, total });
        }
        Ok(DoseIndex { value, total })
    }

    pub fn value(&self) -> usize {
        self.value
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn is_lowest(&self) -> bool {
        self.value == 1
    }

    pub fn is_highest(&self) -> bool {
        self.value == self.total
    }
}

/// Verdict of a rule table before dose boundaries or safety rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RawDecision {
    Escalate,
    Stay,
    DeEscalate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Escalate,
    Stay,
    DeEscalate,
    DeEscalateUnacceptable,
    Terminate,
}

impl Verdict {
    /// Short code used in decision tables: `E`, `S`, `D`, `DU`, `T`.
    pub fn code(&self) -> &'static str {
        match self {
            Verdict::Escalate => "E",
            Verdict::Stay => "S",
            Verdict::DeEscalate => "D",
            Verdict::DeEscalateUnacceptable => "DU",
            Verdict::Terminate => "T",
        }
    }

    pub fn from_code(code: &str) -> Option<Verdict> {
        Some(match code {
            "E" => Verdict::Escalate,
            "S" => Verdict::Stay,
            "D" => Verdict::DeEscalate,
            "DU" => Verdict::DeEscalateUnacceptable,
            "T" => Verdict::Terminate,
            _ => return None,
        })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Dose assignment for the next cohort.
///
/// `target_dose` is absent only for `Terminate`. `exclude_from`, when set,
/// permanently removes that dose and every higher dose from the trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Decision {
    pub verdict: Verdict,
    pub target_dose: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclude_from: Option<usize>,
}

impl Decision {
    pub fn escalate(to: usize) -> Self {
        Decision {
            verdict: Verdict::Escalate,
            target_dose: Some(to),
            exclude_from: None,
        }
    }

    pub fn stay(at: usize) -> Self {
        Decision {
            verdict: Verdict::Stay,
            target_dose: Some(at),
            exclude_from: None,
        }
    }

    pub fn de_escalate(to: usize) -> Self {
        Decision {
            verdict: Verdict::DeEscalate,
            target_dose: Some(to),
            exclude_from: None,
        }
    }

    pub fn terminate() -> Self {
        Decision {
            verdict: Verdict::Terminate,
            target_dose: None,
            exclude_from: None,
        }
    }

    /// Decision moving from `current` to `target`, verdict inferred from direction.
    pub fn toward(current: usize, target: usize) -> Self {
        match target.cmp(&current) {
            std::cmp::Ordering::Greater => Decision::escalate(target),
            std::cmp::Ordering::Equal => Decision::stay(current),
            std::cmp::Ordering::Less => Decision::de_escalate(target),
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.target_dose {
            Some(d) => write!(f, "{} → dose {}", self.verdict, d),
            None => write!(f, "{}", self.verdict),
        }
    }
}

/// Escalation and de-escalation boundaries of the BOIN design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoundarySpec", into = "BoundarySpec")]
pub struct BoinBoundaries {
    lambda_e: f64,
    lambda_d: f64,
    e_fx: i64,
    d_fx: i64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct BoundarySpec {
    lambda_e: f64,
    lambda_d: f64,
}

impl TryFrom<BoundarySpec> for BoinBoundaries {
    type Error = Error;

    fn try_from(s: BoundarySpec) -> Result<Self> {
        BoinBoundaries::new(s.lambda_e, s.lambda_d)
    }
}

impl From<BoinBoundaries> for BoundarySpec {
    fn from(b: BoinBoundaries) -> Self {
        BoundarySpec {
            lambda_e: b.lambda_e,
            lambda_d: b.lambda_d,
        }
    }
}

impl BoinBoundaries {
    pub fn new(lambda_e: f64, lambda_d: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda_e) || !(0.0..=1.0).contains(&lambda_d) {
            return Err(Error::param("lambda", "boundaries must lie in [0, 1]"));
        }
        let (e_fx, d_fx) = (to_fixed(lambda_e), to_fixed(lambda_d));
        if e_fx >= d_fx {
            return Err(Error::param("lambda", "lambda_e must be below lambda_d"));
        }
        Ok(BoinBoundaries {
            lambda_e,
            lambda_d,
            e_fx,
            d_fx,
        })
    }

    /// Boundaries equal to the interval bounds, so BOIN and the interval
    /// designs decide on the same intervals.
    pub fn from_interval(ei: &EquivalenceInterval) -> Result<Self> {
        Self::new(ei.lower(), ei.upper())
    }

    pub fn lambda_e(&self) -> f64 {
        self.lambda_e
    }

    pub fn lambda_d(&self) -> f64 {
        self.lambda_d
    }
}

fn require_patients(outcome: DoseOutcome) -> Result<()> {
    if outcome.n_dlt > outcome.n_treated {
        return Err(Error::InvalidOutcome {
            treated: outcome.n_treated,
            dlt: outcome.n_dlt,
        });
    }
    if outcome.n_treated == 0 {
        return Err(Error::NoPatients);
    }
    Ok(())
}

/// The i3+3 rule table: compares `x/n` and `(x-1)/n` to the interval.
pub fn i3p3_raw(outcome: DoseOutcome, ei: &EquivalenceInterval) -> Result<RawDecision> {
    require_patients(outcome)?;
    let (x, n) = (outcome.n_dlt as i64, outcome.n_treated);
    Ok(match ei.classify_ratio(x, n) {
        Region::Below => RawDecision::Escalate,
        Region::Inside => RawDecision::Stay,
        Region::Above => match ei.classify_ratio(x - 1, n) {
            Region::Below => RawDecision::Stay,
            Region::Inside | Region::Above => RawDecision::DeEscalate,
        },
    })
}

/// Turns escalation at the top dose and de-escalation at the bottom dose into stays.
pub fn apply_dose_boundaries(raw: RawDecision, dose: DoseIndex) -> Decision {
    let d = dose.value();
    match raw {
        RawDecision::Escalate if dose.is_highest() => Decision::stay(d),
        RawDecision::Escalate => Decision::escalate(d + 1),
        RawDecision::Stay => Decision::stay(d),
        RawDecision::DeEscalate if dose.is_lowest() => Decision::stay(d),
        RawDecision::DeEscalate => Decision::de_escalate(d - 1),
    }
}

/// Classic 3+3 table at 3 or 6 patients, before dose boundaries.
pub fn three_plus_three_raw(outcome: DoseOutcome) -> Result<RawDecision> {
    require_patients(outcome)?;
    Ok(match (outcome.n_treated, outcome.n_dlt) {
        (3, 0) => RawDecision::Escalate,
        (3, 1) => RawDecision::Stay,
        (3, _) => RawDecision::DeEscalate,
        (6, 0..=1) => RawDecision::Escalate,
        (6, _) => RawDecision::DeEscalate,
        (n, _) => return Err(Error::ThreePlusThreeCount(n)),
    })
}

pub fn three_plus_three_decision(outcome: DoseOutcome, dose: DoseIndex) -> Result<Decision> {
    Ok(apply_dose_boundaries(three_plus_three_raw(outcome)?, dose))
}

/// BOIN: escalate when `x/n <= lambda_e`, de-escalate when `x/n >= lambda_d`.
pub fn boin_raw(outcome: DoseOutcome, bounds: &BoinBoundaries) -> Result<RawDecision> {
    require_patients(outcome)?;
    let lhs = outcome.n_dlt as i128 * SCALE as i128;
    let n = outcome.n_treated as i128;
    Ok(if lhs <= bounds.e_fx as i128 * n {
        RawDecision::Escalate
    } else if lhs >= bounds.d_fx as i128 * n {
        RawDecision::DeEscalate
    } else {
        RawDecision::Stay
    })
}

pub fn boin_decision(
    outcome: DoseOutcome,
    bounds: &BoinBoundaries,
    dose: DoseIndex,
) -> Result<Decision> {
    Ok(apply_dose_boundaries(boin_raw(outcome, bounds)?, dose))
}
