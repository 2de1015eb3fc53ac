//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! A failing criterion only passes the run when the failure is exactly its
//! documented one.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use dosefind_core::bayes::{exceed_probability, pava, posterior, SafetyConfig};
use dosefind_core::model::{BlrmConfig, BlrmModel, CrmConfig, CrmModel, TrialData};
use dosefind_core::rules::{DoseIndex, DoseOutcome, Verdict};
use dosefind_core::sim::report::{results_csv, scenario_block};
use dosefind_core::sim::{
    builtin_for_target, builtin_scenarios, decision_frequency, run_simulation, sensitivity_sweep,
    simulate_records, Scenario, SimConfig, SweepAxis,
};
use dosefind_core::table::DecisionTable;
use dosefind_core::{DesignRegistry, DesignSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// `known` names the documented cause when a criterion fails for that
/// cause alone. Any other failure makes the run exit non-zero.
struct Outcome {
    pass: bool,
    known: Option<&'static str>,
    detail: String,
}

fn pass(detail: impl Into<String>) -> Outcome {
    check(true, detail)
}

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass: ok, known: None, detail: detail.into() }
}

// ---------------------------------------------------------------- tables

/// Reference codes for pT = 0.3, EI [0.25, 0.35], indexed by (n, x).
fn reference_code(n: u32, x: u32) -> &'static str {
    match x {
        0 => "E",
        1 => if n <= 4 { "S" } else { "E" },
        2 => match n {
            2 => "DU",
            3 | 4 => "D",
            5..=8 => "S",
            _ => "E",
        },
        3 => match n {
            3 | 4 => "DU",
            5..=8 => "D",
            9..=12 => "S",
            _ => "E",
        },
        4 => match n {
            4..=6 => "DU",
            7..=10 => "D",
            _ => "S",
        },
        5 => if n <= 9 { "DU" } else if n <= 14 { "D" } else { "S" },
        6 => if n <= 11 { "DU" } else { "D" },
        7 => if n <= 13 { "DU" } else { "D" },
        _ => "DU",
    }
}

fn table_mismatches(table: &DecisionTable, max_n: u32) -> Vec<String> {
    let mut out = Vec::new();
    for n in 1..=max_n {
        for x in 0..=n {
            let want = reference_code(n, x);
            let got = table.get(n, x).unwrap_or("?");
            if got != want {
                out.push(format!("mismatch at (n={n}, x={x}): expected {want}, got {got}"));
            }
        }
    }
    out
}

fn decision_table_full() -> Outcome {
    let start = Instant::now();
    let spec = DesignSpec::new("i3p3", 0.3, 0.05, 0.05, 6);
    let table = DecisionTable::build(&spec, 15).unwrap();
    let elapsed = start.elapsed();
    let bad = table_mismatches(&table, 15);
    if elapsed >= Duration::from_secs(1) {
        return check(false, format!("took {elapsed:?}"));
    }
    if bad.is_empty() {
        return pass(format!("120 cells in {elapsed:?}"));
    }
    let mut out = check(false, bad.join("; "));
    if bad == ["mismatch at (n=11, x=4): expected S, got D"] {
        // 4/11 is above the interval and 3/11 inside it, which the rule maps to D
        out.known = Some("reference cell contradicts the rule");
    }
    out
}

fn decision_table_small() -> Outcome {
    let spec = DesignSpec::new("i3p3", 0.3, 0.05, 0.05, 6);
    let table = DecisionTable::build(&spec, 9).unwrap();
    let mut bad = table_mismatches(&table, 9);
    for (n, x, want) in [(2, 1, "S"), (6, 3, "D")] {
        if table.get(n, x) != Some(want) {
            bad.push(format!("(n={n}, x={x}) is not {want}"));
        }
    }
    check(bad.is_empty(), if bad.is_empty() { "45 cells".into() } else { bad.join("; ") })
}

fn movement_cases() -> Outcome {
    // movement relative to d: E up, S stay, D or DU down
    let cases: [(f64, f64, u32, &[&str]); 2] = [
        (0.3, 0.05, 6, &["E", "E", "S", "D", "D", "D", "D"]),
        (0.17, 0.05, 3, &["E", "S", "D", "D"]),
    ];
    let mut bad = Vec::new();
    for (pt, eps, n, want) in cases {
        let spec = DesignSpec::new("i3p3", pt, eps, eps, 6);
        let table = DecisionTable::build(&spec, n).unwrap();
        for (x, w) in want.iter().enumerate() {
            let got = table.get(n, x as u32).unwrap();
            let moved = if got == "DU" { "D" } else { got };
            if moved != *w {
                bad.push(format!("pT={pt} n={n} x={x}: expected {w}, got {got}"));
            }
        }
    }
    check(bad.is_empty(), if bad.is_empty() { "11 cells".into() } else { bad.join("; ") })
}

// ----------------------------------------------------------- simulations

fn scenario(id: &str) -> Scenario {
    builtin_scenarios().into_iter().find(|s| s.id == id).unwrap()
}

fn pcs(design: &str, s: &Scenario) -> (f64, Duration) {
    let mut cfg = SimConfig::new(DesignSpec::new(design, s.p_target, 0.05, 0.05, s.n_doses()));
    cfg.seed = 20_181_001;
    let start = Instant::now();
    let oc = run_simulation(s, &cfg).unwrap();
    (oc.pcs, start.elapsed())
}

/// (builtin id, label, i3+3, BOIN, 3+3 PCS, i3+3 tolerance)
const FIXTURE_TRIALS: [(&str, &str, f64, f64, f64, f64); 4] = [
    ("1", "pT=0.1 #1", 0.885, 0.875, 0.96, 0.04),
    ("5", "pT=0.1 #5", 0.937, 0.956, 0.742, 0.04),
    ("19", "pT=0.17 #5", 0.995, 0.934, 0.862, 0.02),
    ("34", "pT=0.3 #6", 0.963, 0.826, 0.814, 0.04),
];

fn fixture_pcs_i3p3() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (id, label, want, _, _, tol) in FIXTURE_TRIALS {
        let (got, t) = pcs("i3p3", &scenario(id));
        let good = (got - want).abs() <= tol && t < Duration::from_secs(5);
        ok &= good;
        parts.push(format!("{label} {got:.3} vs {want} ({:.2}s)", t.as_secs_f64()));
    }
    check(ok, parts.join(", "))
}

fn fixture_pcs_comparators() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (id, label, _, boin, tpt, _) in FIXTURE_TRIALS {
        let s = scenario(id);
        for (design, want) in [("boin", boin), ("3p3", tpt)] {
            let (got, _) = pcs(design, &s);
            ok &= (got - want).abs() <= 0.05;
            parts.push(format!("{design} {label} {got:.3} vs {want}"));
        }
    }
    check(ok, parts.join(", "))
}

fn ei_width_trend() -> Outcome {
    let mut base = SimConfig::new(DesignSpec::new("i3p3", 0.3, 0.05, 0.05, 6));
    base.seed = 7;
    let rows = sensitivity_sweep(SweepAxis::EiWidth, &base, &builtin_for_target(0.3)).unwrap();
    let rel: Vec<f64> = rows.iter().map(|r| r.reliability.mean).collect();
    let trend = rel.windows(2).all(|w| w[1] >= w[0]);
    let widest = *rel.last().unwrap();
    let shown: Vec<String> = rel.iter().map(|r| format!("{r:.3}")).collect();
    check(
        trend && (widest - 0.674).abs() <= 0.05,
        format!("reliability {} (widest vs 0.674)", shown.join(" ")),
    )
}

fn cohort_robustness() -> Outcome {
    let mut base = SimConfig::new(DesignSpec::new("i3p3", 0.3, 0.06, 0.06, 6));
    base.seed = 11;
    let rows = sensitivity_sweep(SweepAxis::CohortSize, &base, &builtin_for_target(0.3)).unwrap();
    let picked: Vec<(String, f64)> = rows
        .iter()
        .filter(|r| ["2", "3", "5", "6", "random"].contains(&r.label.as_str()))
        .map(|r| (r.label.clone(), r.reliability.mean))
        .collect();
    let hi = picked.iter().map(|p| p.1).fold(f64::MIN, f64::max);
    let lo = picked.iter().map(|p| p.1).fold(f64::MAX, f64::min);
    let shown: Vec<String> = picked.iter().map(|(l, r)| format!("{l}:{r:.3}")).collect();
    let mut out = check(hi - lo <= 0.06, format!("{} spread {:.3}", shown.join(" "), hi - lo));
    // five cohorts of six starting at dose 1 never treat dose 6
    let rest: Vec<f64> = picked.iter().filter(|p| p.0 != "6").map(|p| p.1).collect();
    let rest_spread = rest.iter().fold(f64::MIN, |a, &b| a.max(b)) - rest.iter().fold(f64::MAX, |a, &b| a.min(b));
    let six = rows.iter().find(|r| r.label == "6").unwrap();
    let unreachable = six.results.iter().any(|oc| oc.true_mtd == [6] && oc.pcs == 0.0);
    if !out.pass && rest_spread <= 0.06 && unreachable {
        out.known = Some("cohort 6 cannot reach dose 6 within 30 patients");
    }
    out
}

fn determinism() -> Outcome {
    let run = || {
        let mut text = String::new();
        let mut all = Vec::new();
        for s in builtin_scenarios() {
            let ocs: Vec<_> = ["i3p3", "boin", "3p3"]
                .iter()
                .map(|d| {
                    let mut cfg =
                        SimConfig::new(DesignSpec::new(d, s.p_target, 0.05, 0.05, s.n_doses()));
                    cfg.seed = 42;
                    run_simulation(&s, &cfg).unwrap()
                })
                .collect();
            text.push_str(&scenario_block(&ocs));
            all.extend(ocs);
        }
        text + &results_csv(&all)
    };
    let start = Instant::now();
    let a = run();
    let b = run();
    let t = start.elapsed();
    check(
        a == b && t < Duration::from_secs(60),
        format!("{} bytes identical: {}, two runs in {:.1}s", a.len(), a == b, t.as_secs_f64()),
    )
}

// --------------------------------------------------------------- oracles

/// Adaptive Simpson on `[a, b]`.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

fn ln_factorial(k: u32) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

fn tail_oracle(x: u32, n: u32, pt: f64) -> f64 {
    // Beta(1 + x, 1 + n - x) density with an exact factorial constant
    let ln_c = ln_factorial(n + 1) - ln_factorial(x) - ln_factorial(n - x);
    let f = move |p: f64| {
        if p <= 0.0 || p >= 1.0 {
            let at_edge = (p <= 0.0 && x == 0) || (p >= 1.0 && x == n);
            return if at_edge { ln_c.exp() } else { 0.0 };
        }
        (ln_c + x as f64 * p.ln() + (n - x) as f64 * (1.0 - p).ln()).exp()
    };
    simpson(&f, pt, 1.0, 1e-12)
}

fn oracle_exceed() -> (bool, String) {
    let prior = SafetyConfig::default().prior;
    let mut worst: f64 = 0.0;
    for pt in [0.1, 0.17, 0.3] {
        for n in 0..=15 {
            for x in 0..=n {
                let got = exceed_probability(posterior(DoseOutcome::new(n, x).unwrap(), prior), pt);
                worst = worst.max((got - tail_oracle(x, n, pt)).abs());
            }
        }
    }
    (worst <= 1e-6, format!("tail max err {worst:.1e}"))
}

/// Min-max formula for weighted isotonic regression.
fn brute_isotonic(y: &[f64], w: &[f64]) -> Vec<f64> {
    let avg = |a: usize, b: usize| {
        let sw: f64 = w[a..=b].iter().sum();
        y[a..=b].iter().zip(&w[a..=b]).map(|(v, w)| v * w).sum::<f64>() / sw
    };
    (0..y.len())
        .map(|i| {
            (0..=i)
                .map(|a| (i..y.len()).map(|b| avg(a, b)).fold(f64::MAX, f64::min))
                .fold(f64::MIN, f64::max)
        })
        .collect()
}

fn oracle_pava() -> (bool, String) {
    let levels = [0.0, 0.25, 0.5, 0.75, 1.0];
    let weights = [1.0, 2.5];
    let mut cases = 0u64;
    let mut worst: f64 = 0.0;
    for len in 1..=5u32 {
        for vi in 0..5u32.pow(len) {
            for wi in 0..2u32.pow(len) {
                let y: Vec<f64> = (0..len).map(|k| levels[(vi / 5u32.pow(k) % 5) as usize]).collect();
                let w: Vec<f64> = (0..len).map(|k| weights[(wi >> k & 1) as usize]).collect();
                let got = pava(&y, &w).unwrap().values;
                for (g, b) in got.iter().zip(brute_isotonic(&y, &w)) {
                    worst = worst.max((g - b).abs());
                }
                cases += 1;
            }
        }
    }
    (worst <= 1e-12, format!("pava {cases} grids max err {worst:.1e}"))
}

fn random_data(rng: &mut ChaCha8Rng, n_doses: usize) -> TrialData {
    let tried = rng.random_range(1..=n_doses);
    let pairs: Vec<(u32, u32)> = (0..n_doses)
        .map(|i| {
            if i >= tried {
                return (0, 0);
            }
            let n = 3 * rng.random_range(1..=4u32);
            (n, rng.random_range(0..=n.min(4)))
        })
        .collect();
    TrialData::from_pairs(&pairs).unwrap()
}

fn oracle_grids() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let crm = CrmModel::new(CrmConfig::with_default_skeleton(0.3, 6).unwrap()).unwrap();
    let mut fine_cfg = CrmConfig::with_default_skeleton(0.3, 6).unwrap();
    fine_cfg.grid_points = 10 * crm.config().grid_points;
    let crm_fine = CrmModel::new(fine_cfg).unwrap();
    let blrm = BlrmModel::new(BlrmConfig::default_for(4, 0.3, 0.05, 0.05)).unwrap();
    let mut fine_b = BlrmConfig::default_for(4, 0.3, 0.05, 0.05);
    fine_b.grid_points = 5 * blrm.config().grid_points;
    let blrm_fine = BlrmModel::new(fine_b).unwrap();
    let (mut norm, mut crm_rel, mut blrm_rel) = (0f64, 0f64, 0f64);
    for _ in 0..40 {
        let d = random_data(&mut rng, 6);
        let post = crm.posterior(&d).unwrap();
        norm = norm.max((post.total_mass() - 1.0).abs());
        let (a, b) = (crm.theta_hat(&d).unwrap(), crm_fine.theta_hat(&d).unwrap());
        crm_rel = crm_rel.max(((a - b) / b).abs());
    }
    for _ in 0..8 {
        let d = random_data(&mut rng, 4);
        let (p, q) = (blrm.posterior(&d).unwrap(), blrm_fine.posterior(&d).unwrap());
        norm = norm.max((p.total_mass() - 1.0).abs());
        for ax in 0..2 {
            let (a, b) = (p.mean_of_axis(ax), q.mean_of_axis(ax));
            blrm_rel = blrm_rel.max(((a - b) / b.abs().max(1e-3)).abs());
        }
    }
    (
        norm <= 1e-10 && crm_rel <= 1e-4 && blrm_rel <= 1e-4,
        format!("mass err {norm:.1e}, crm refine {crm_rel:.1e}, blrm refine {blrm_rel:.1e}"),
    )
}

fn oracle_invariants() -> (bool, String) {
    let crm = CrmModel::new(CrmConfig::with_default_skeleton(0.3, 6).unwrap()).unwrap();
    let blrm = BlrmModel::new(BlrmConfig::default_for(6, 0.3, 0.05, 0.05)).unwrap();
    let bad_crm: usize = (0..10_000u64)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = ChaCha8Rng::seed_from_u64(i);
            let data = random_data(&mut rng, 6);
            let cur = rng.random_range(1..=6);
            let dec = crm
                .recommend(&data, DoseIndex::new(cur, 6).unwrap(), None, 6)
                .unwrap();
            dec.target_dose.is_some_and(|t| t > cur + 1)
        })
        .count();
    let bad_blrm: usize = (0..10_000u64)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = ChaCha8Rng::seed_from_u64(1 << 32 | i);
            let data = random_data(&mut rng, 6);
            let cur = data.highest_tried().max(1);
            let dec = blrm.recommend(&data, DoseIndex::new(cur, 6).unwrap(), 6).unwrap();
            let probs = blrm.interval_probs(&blrm.posterior(&data).unwrap());
            match dec.target_dose {
                Some(t) => !blrm.ewoc_ok(&probs[t - 1]),
                None => dec.verdict != Verdict::Terminate,
            }
        })
        .count();
    (
        bad_crm == 0 && bad_blrm == 0,
        format!("no-skip violations {bad_crm}/10000, EWOC violations {bad_blrm}/10000"),
    )
}

fn oracle_crm_frequency() -> (bool, String) {
    let mut records = Vec::new();
    for s in builtin_for_target(0.3) {
        let mut cfg = SimConfig::new(DesignSpec::new("crm", 0.3, 0.05, 0.05, 6));
        cfg.n_trials = 100;
        cfg.seed = 3;
        let design = DesignRegistry::standard().build(&cfg.design).unwrap();
        records.extend(simulate_records(&s, design.as_ref(), &cfg).unwrap());
    }
    let cell = decision_frequency(&records).into_iter().find(|c| c.n == 3 && c.x == 1);
    match cell {
        Some(c) => (c.stay > 0.5, format!("crm stay at (x=1, n=3) {:.3} over {}", c.stay, c.count)),
        None => (false, "no CRM decisions at (x=1, n=3)".into()),
    }
}

fn oracle_suites() -> Outcome {
    let parts = [oracle_exceed(), oracle_pava(), oracle_grids(), oracle_invariants(), oracle_crm_frequency()];
    check(
        parts.iter().all(|p| p.0),
        parts.iter().map(|p| p.1.as_str()).collect::<Vec<_>>().join("; "),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("decision table, n <= 15", decision_table_full),
        ("movement cases", movement_cases),
        ("decision table, n <= 9", decision_table_small),
        ("fixture trials, i3+3", fixture_pcs_i3p3),
        ("fixture trials, BOIN and 3+3", fixture_pcs_comparators),
        ("EI width trend", ei_width_trend),
        ("cohort-size robustness", cohort_robustness),
        ("oracle suites", oracle_suites),
        ("determinism", determinism),
    ];
    let mut unexpected = 0;
    for (name, run) in criteria {
        let o = run();
        match (o.pass, o.known) {
            (true, _) => println!("PASS  {name:<28} {}", o.detail),
            (false, Some(why)) => println!("FAIL  {name:<28} {} [known: {why}]", o.detail),
            (false, None) => {
                unexpected += 1;
                println!("FAIL  {name:<28} {}", o.detail);
            }
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
