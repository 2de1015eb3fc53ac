//! Plain-text and CSV renderings of operating characteristics.

use std::fmt::Write as _;

use super::metrics::OperatingCharacteristics;
use super::sweep::SweepRow;

/// One scenario block: per-dose selection, patients and toxicities with a
/// column per design, then the summary rows.
pub fn scenario_block(results: &[OperatingCharacteristics]) -> String {
    let Some(first) = results.first() else {
        return String::new();
    };
    let mut out = String::new();
    writeln!(out, "Scenario {}", first.scenario_id).unwrap();
    writeln!(out, "Target Toxicity Prob. = {}", first.p_target).unwrap();
    let names: Vec<&str> = results.iter().map(|r| r.design.as_str()).collect();
    let group = |title: &str| {
        let mut s = format!("{title:<24}");
        for n in &names {
            write!(s, "{n:>8}").unwrap();
        }
        s
    };
    writeln!(
        out,
        "{:<6}{:>8}  {}  {}  {}",
        "Dose",
        "True",
        group("Selection Prob."),
        group("# of Patients Treated"),
        group("# of Toxicities")
    )
    .unwrap();
    for d in 0..first.true_tox.len() {
        write!(out, "{:<6}{:>8.3}  {:<24}", d + 1, first.true_tox[d], "").unwrap();
        for r in results {
            write!(out, "{:>8.3}", r.selection_prob[d]).unwrap();
        }
        write!(out, "  {:<24}", "").unwrap();
        for r in results {
            write!(out, "{:>8.3}", r.mean_patients[d]).unwrap();
        }
        write!(out, "  {:<24}", "").unwrap();
        for r in results {
            write!(out, "{:>8.3}", r.mean_toxicities[d]).unwrap();
        }
        out.push('\n');
    }
    let summary: [(&str, fn(&OperatingCharacteristics) -> f64); 5] = [
        ("Prob. of Select MTD", |r| r.pcs),
        ("Prob. of Toxicity", |r| r.pct_toxicity),
        ("Prob. of Select Dose-over-MTD", |r| r.prob_over_mtd),
        ("Prob. of No Selection", |r| r.prob_no_selection),
        ("Safety", |r| r.safety),
    ];
    for (label, f) in summary {
        write!(out, "{:<40}", label).unwrap();
        for r in results {
            write!(out, "{:>8.3}", f(r)).unwrap();
        }
        out.push('\n');
    }
    out
}

/// One row per (scenario, design) with per-dose columns and summaries.
pub fn results_csv(results: &[OperatingCharacteristics]) -> String {
    let n_doses = results.iter().map(|r| r.true_tox.len()).max().unwrap_or(0);
    let mut out = String::from("scenario,design,p_target");
    for prefix in ["true_tox", "selection", "patients", "toxicities"] {
        for d in 1..=n_doses {
            write!(out, ",{prefix}_{d}").unwrap();
        }
    }
    out.push_str(",pcs,pct_toxicity,prob_over_mtd,prob_no_selection,safety,prob_early_termination\n");
    for r in results {
        write!(out, "{},{},{}", r.scenario_id, r.design, r.p_target).unwrap();
        for col in [&r.true_tox, &r.selection_prob, &r.mean_patients, &r.mean_toxicities] {
            for d in 0..n_doses {
                match col.get(d) {
                    Some(v) => write!(out, ",{v:.4}").unwrap(),
                    None => out.push(','),
                }
            }
        }
        writeln!(
            out,
            ",{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            r.pcs,
            r.pct_toxicity,
            r.prob_over_mtd,
            r.prob_no_selection,
            r.safety,
            r.prob_early_termination
        )
        .unwrap();
    }
    out
}

/// `label, safety, reliability, %toxicity` with standard deviations.
pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = format!(
        "{:<14}{:>18}{:>18}{:>18}\n",
        "setting", "safety", "reliability", "pct_toxicity"
    );
    for r in rows {
        let cell = |m: f64, s: f64| format!("{m:.3} ({s:.3})");
        writeln!(
            out,
            "{:<14}{:>18}{:>18}{:>18}",
            r.label,
            cell(r.safety.mean, r.safety.sd),
            cell(r.reliability.mean, r.reliability.sd),
            cell(r.pct_toxicity.mean, r.pct_toxicity.sd)
        )
        .unwrap();
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "setting,safety_mean,safety_sd,reliability_mean,reliability_sd,pct_toxicity_mean,pct_toxicity_sd\n",
    );
    for r in rows {
        writeln!(
            out,
            "{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            r.label,
            r.safety.mean,
            r.safety.sd,
            r.reliability.mean,
            r.reliability.sd,
            r.pct_toxicity.mean,
            r.pct_toxicity.sd
        )
        .unwrap();
    }
    out
}
