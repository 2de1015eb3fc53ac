use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::engine::TrialRecord;
use crate::rules::Verdict;

/// Share of E, S and D taken at one `(n, x)` cell. `DU` and `T` count as D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyCell {
    pub n: u32,
    pub x: u32,
    pub count: u32,
    pub escalate: f64,
    pub stay: f64,
    pub de_escalate: f64,
}

/// Empirical decision shares per cumulative `(n, x)` at the dose just
/// treated. Only unconstrained decisions count, so boundary stays do not
/// blur the design's own choice.
pub fn decision_frequency(records: &[TrialRecord]) -> Vec<FrequencyCell> {
    let mut tally: BTreeMap<(u32, u32), [u32; 3]> = BTreeMap::new();
    for ev in records.iter().flat_map(|r| &r.events).filter(|e| !e.constrained) {
        let slot = match ev.decision.verdict {
            Verdict::Escalate => 0,
            Verdict::Stay => 1,
            Verdict::DeEscalate | Verdict::DeEscalateUnacceptable | Verdict::Terminate => 2,
        };
        tally.entry((ev.n_at_dose, ev.x_at_dose)).or_default()[slot] += 1;
    }
    tally
        .into_iter()
        .map(|((n, x), [e, s, d])| {
            let count = e + s + d;
            let c = count as f64;
            FrequencyCell {
                n,
                x,
                count,
                escalate: e as f64 / c,
                stay: s as f64 / c,
                de_escalate: d as f64 / c,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{DesignRegistry, DesignSpec};
    use crate::sim::{simulate_records, Scenario, SimConfig};
    use crate::table::DecisionTable;

    #[test]
    fn i3p3_cells_are_degenerate_and_match_the_table() {
        let spec = DesignSpec::new("i3p3", 0.3, 0.05, 0.05, 6);
        let mut cfg = SimConfig::new(spec.clone());
        cfg.n_trials = 300;
        cfg.seed = 3;
        let design = DesignRegistry::standard().build(&spec).unwrap();
        let s = Scenario::new("s", 0.3, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let records = simulate_records(&s, design.as_ref(), &cfg).unwrap();
        let table = DecisionTable::build(&spec, 30).unwrap();
        for cell in decision_frequency(&records) {
            assert!((cell.escalate + cell.stay + cell.de_escalate - 1.0).abs() < 1e-9);
            let shares = [cell.escalate, cell.stay, cell.de_escalate];
            assert!(shares.iter().any(|&p| p == 1.0), "cell ({}, {}) mixed", cell.n, cell.x);
            let code = table.get(cell.n, cell.x).unwrap();
            let expected = match code {
                "E" => cell.escalate,
                "S" => cell.stay,
                _ => cell.de_escalate,
            };
            assert_eq!(expected, 1.0, "cell ({}, {}) vs {code}", cell.n, cell.x);
        }
    }
}
