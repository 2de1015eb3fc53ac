use serde::{Deserialize, Serialize};

use super::engine::TrialRecord;
use super::scenario::Scenario;
use crate::interval::EquivalenceInterval;

/// Doses counted as a correct MTD pick. May be empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrueMtdSet {
    pub doses: Vec<usize>,
}

impl TrueMtdSet {
    pub fn contains(&self, dose: usize) -> bool {
        self.doses.contains(&dose)
    }

    pub fn max(&self) -> Option<usize> {
        self.doses.iter().copied().max()
    }

    pub fn is_empty(&self) -> bool {
        self.doses.is_empty()
    }
}

/// Doses whose true rate is inside the interval; failing that the highest
/// dose below target; failing that nothing.
pub fn true_mtd_set(scenario: &Scenario, ei: &EquivalenceInterval) -> TrueMtdSet {
    let inside: Vec<usize> = scenario
        .true_tox
        .iter()
        .enumerate()
        .filter(|(_, &p)| ei.contains(p))
        .map(|(i, _)| i + 1)
        .collect();
    if !inside.is_empty() {
        return TrueMtdSet { doses: inside };
    }
    let below = scenario
        .true_tox
        .iter()
        .rposition(|&p| p < ei.p_target())
        .map(|i| i + 1);
    TrueMtdSet {
        doses: below.into_iter().collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingCharacteristics {
    pub scenario_id: String,
    pub design: String,
    pub p_target: f64,
    pub true_tox: Vec<f64>,
    pub true_mtd: Vec<usize>,
    pub n_trials: u32,
    pub selection_prob: Vec<f64>,
    pub mean_patients: Vec<f64>,
    pub mean_toxicities: Vec<f64>,
    /// Probability of correct selection (reliability).
    pub pcs: f64,
    /// Mean share of patients treated at or below the highest true MTD.
    pub safety: f64,
    /// Pooled DLTs over pooled patients.
    pub pct_toxicity: f64,
    pub prob_over_mtd: f64,
    pub prob_no_selection: f64,
    pub prob_early_termination: f64,
}

/// Summaries over trial records. With an empty true-MTD set every pick is
/// wrong: correct selection means selecting nothing, and safety is the
/// early-termination rate.
pub fn aggregate(
    scenario: &Scenario,
    design: &str,
    ei: &EquivalenceInterval,
    records: &[TrialRecord],
) -> OperatingCharacteristics {
    let n_doses = scenario.n_doses();
    let truth = true_mtd_set(scenario, ei);
    let n = records.len() as f64;
    let mut selected = vec![0u32; n_doses];
    let mut patients = vec![0u64; n_doses];
    let mut toxicities = vec![0u64; n_doses];
    let (mut none, mut correct, mut over, mut early) = (0u32, 0u32, 0u32, 0u32);
    let mut safe_share = 0.0;
    for r in records {
        for (i, o) in r.outcomes.iter().enumerate() {
            patients[i] += o.n_treated as u64;
            toxicities[i] += o.n_dlt as u64;
        }
        if r.terminated_early {
            early += 1;
        }
        match (r.selected.dose(), truth.max()) {
            (None, _) => none += 1,
            (Some(d), Some(top)) => {
                selected[d - 1] += 1;
                correct += truth.contains(d) as u32;
                over += (d > top) as u32;
            }
            (Some(d), None) => {
                selected[d - 1] += 1;
                over += 1;
            }
        }
        if let Some(top) = truth.max() {
            let total = r.total_patients();
            if total > 0 {
                let at_or_below: u32 = r.outcomes[..top].iter().map(|o| o.n_treated).sum();
                safe_share += at_or_below as f64 / total as f64;
            }
        }
    }
    let total_patients: u64 = patients.iter().sum();
    let total_dlts: u64 = toxicities.iter().sum();
    let (pcs, safety) = if truth.is_empty() {
        (none as f64 / n, early as f64 / n)
    } else {
        (correct as f64 / n, safe_share / n)
    };
    OperatingCharacteristics {
        scenario_id: scenario.id.clone(),
        design: design.to_string(),
        p_target: ei.p_target(),
        true_tox: scenario.true_tox.clone(),
        true_mtd: truth.doses,
        n_trials: records.len() as u32,
        selection_prob: selected.iter().map(|&c| c as f64 / n).collect(),
        mean_patients: patients.iter().map(|&c| c as f64 / n).collect(),
        mean_toxicities: toxicities.iter().map(|&c| c as f64 / n).collect(),
        pcs,
        safety,
        pct_toxicity: if total_patients > 0 {
            total_dlts as f64 / total_patients as f64
        } else {
            0.0
        },
        prob_over_mtd: over as f64 / n,
        prob_no_selection: none as f64 / n,
        prob_early_termination: early as f64 / n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ei(p: f64) -> EquivalenceInterval {
        EquivalenceInterval::symmetric(p, 0.05).unwrap()
    }

    fn sc(p: f64, tox: &[f64]) -> Scenario {
        Scenario::new("t", p, tox.to_vec()).unwrap()
    }

    #[test]
    fn true_sets() {
        let s1 = sc(0.1, &[0.04, 0.05, 0.06, 0.07, 0.08, 0.09]);
        assert_eq!(true_mtd_set(&s1, &ei(0.1)).doses, vec![2, 3, 4, 5, 6]);
        let s5 = sc(0.1, &[0.05, 0.4, 0.5, 0.6, 0.65, 0.7]);
        assert_eq!(true_mtd_set(&s5, &ei(0.1)).doses, vec![1]);
        let above = sc(0.1, &[0.5; 6]);
        assert!(true_mtd_set(&above, &ei(0.1)).is_empty());
        // closed interval: 0.35 is inside at target 0.3
        let s30 = sc(0.3, &[0.35, 0.45, 0.5, 0.6, 0.7, 0.8]);
        assert_eq!(true_mtd_set(&s30, &ei(0.3)).doses, vec![1]);
    }
}
