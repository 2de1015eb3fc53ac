use dosefind_core::sim::{run_simulation, CohortSize, Scenario, SimConfig};
use dosefind_core::DesignSpec;

fn cfg(design: &str, n_trials: u32) -> SimConfig {
    let mut c = SimConfig::new(DesignSpec::new(design, 0.3, 0.05, 0.05, 6));
    c.n_trials = n_trials;
    c.seed = 99;
    c
}

#[test]
fn flat_curve_toxicity_rate_matches_truth() {
    // every dose carries the same risk, so pooled DLTs / patients estimates it
    let s = Scenario::new("flat", 0.3, vec![0.2; 6]).unwrap();
    for design in ["i3p3", "boin", "crm"] {
        let oc = run_simulation(&s, &cfg(design, 2000)).unwrap();
        assert!((oc.pct_toxicity - 0.2).abs() < 0.01, "{design}: {}", oc.pct_toxicity);
    }
}

#[test]
fn allocation_and_selection_are_consistent() {
    let s = Scenario::new("s", 0.3, vec![0.05, 0.1, 0.3, 0.45, 0.6, 0.7]).unwrap();
    let oc = run_simulation(&s, &cfg("i3p3", 1000)).unwrap();
    let picked: f64 = oc.selection_prob.iter().sum::<f64>() + oc.prob_no_selection;
    assert!((picked - 1.0).abs() < 1e-9);
    let patients: f64 = oc.mean_patients.iter().sum();
    assert!(patients <= 30.0 + 1e-9);
    let tox: f64 = oc.mean_toxicities.iter().sum();
    assert!((tox / patients - oc.pct_toxicity).abs() < 1e-9);
    assert_eq!(oc.true_mtd, vec![3]);
    assert!((oc.pcs - oc.selection_prob[2]).abs() < 1e-12);
}

#[test]
fn toxic_curve_stops_early() {
    let s = Scenario::new("hot", 0.3, vec![0.8, 0.85, 0.9, 0.92, 0.95, 0.97]).unwrap();
    let oc = run_simulation(&s, &cfg("i3p3", 500)).unwrap();
    assert!(oc.true_mtd.is_empty());
    assert!(oc.prob_early_termination > 0.9);
    assert_eq!(oc.pcs, oc.prob_no_selection);
}

#[test]
fn random_cohorts_fill_the_sample() {
    let s = Scenario::new("cool", 0.3, vec![0.01; 6]).unwrap();
    let mut c = cfg("i3p3", 200);
    c.cohort = CohortSize::Random { min: 2, max: 5 };
    let oc = run_simulation(&s, &c).unwrap();
    let patients: f64 = oc.mean_patients.iter().sum();
    assert!((patients - 30.0).abs() < 1e-9);
}
