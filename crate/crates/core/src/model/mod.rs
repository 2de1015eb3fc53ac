//! Model-based comparator designs evaluated by grid quadrature.

pub mod blrm;
pub mod crm;
pub mod grid;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rules::DoseOutcome;

pub use blrm::{blrm_posterior, blrm_recommend, BlrmConfig, BlrmHyper, BlrmModel, IntervalProbs};
pub use crm::{crm_posterior, crm_recommend, default_skeleton, CrmConfig, CrmModel, PriorSpread};
pub use grid::GridPosterior;

/// Per-dose patient and DLT counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialData {
    doses: Vec<DoseOutcome>,
}

impl TrialData {
    pub fn empty(n_doses: usize) -> Self {
        TrialData {
            doses: vec![DoseOutcome::default(); n_doses],
        }
    }

    pub fn new(doses: Vec<DoseOutcome>) -> Result<Self> {
        for d in &doses {
            DoseOutcome::new(d.n_treated, d.n_dlt)?;
        }
        Ok(TrialData { doses })
    }

    /// From `(n_treated, n_dlt)` pairs.
    pub fn from_pairs(pairs: &[(u32, u32)]) -> Result<Self> {
        let doses = pairs
            .iter()
            .map(|&(n, y)| DoseOutcome::new(n, y))
            .collect::<Result<_>>()?;
        Ok(TrialData { doses })
    }

    pub fn len(&self) -> usize {
        self.doses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doses.is_empty()
    }

    /// Outcome at a 0-based dose position.
    pub fn get(&self, i: usize) -> DoseOutcome {
        self.doses[i]
    }

    pub fn as_slice(&self) -> &[DoseOutcome] {
        &self.doses
    }

    pub fn outcomes(&self) -> impl Iterator<Item = (usize, DoseOutcome)> + '_ {
        self.doses.iter().copied().enumerate()
    }

    /// Highest 1-based dose with any patients, 0 when nobody is treated.
    pub fn highest_tried(&self) -> usize {
        self.doses
            .iter()
            .rposition(|d| d.n_treated > 0)
            .map_or(0, |i| i + 1)
    }

    pub(crate) fn check_len(&self, expected: usize) -> Result<()> {
        if self.doses.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: self.doses.len(),
            });
        }
        Ok(())
    }
}
