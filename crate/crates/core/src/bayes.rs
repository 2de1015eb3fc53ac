//! Beta-binomial posterior machinery: safety rules, posterior means,
//! isotonic regression and MTD selection.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::interval::EquivalenceInterval;
use crate::rules::{apply_dose_boundaries, i3p3_raw, Decision, DoseIndex, DoseOutcome, Verdict};

/// Prior used for the posterior-mean MTD estimate.
pub const ESTIMATION_PRIOR: BetaParams = BetaParams {
    alpha: 0.005,
    beta: 0.005,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BetaSpec", into = "BetaSpec")]
pub struct BetaParams {
    alpha: f64,
    beta: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct BetaSpec {
    alpha: f64,
    beta: f64,
}

impl TryFrom<BetaSpec> for BetaParams {
    type Error = Error;

    fn try_from(s: BetaSpec) -> Result<Self> {
        BetaParams::new(s.alpha, s.beta)
    }
}

impl From<BetaParams> for BetaSpec {
    fn from(b: BetaParams) -> Self {
        BetaSpec {
            alpha: b.alpha,
            beta: b.beta,
        }
    }
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(Error::param("beta prior", "alpha and beta must be positive"));
        }
        Ok(BetaParams { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }
}

/// Threshold and prior for the posterior tail test behind both safety rules.
///
/// The default prior is Beta(1, 1). With it the tail test reproduces the
/// published i3+3 decision table exactly, including the `DU` cell at
/// 5 DLTs out of 9 (tail 0.953 under Beta(1, 1), 0.942 under Beta(0.005, 0.005)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyConfig {
    pub threshold: f64,
    pub prior: BetaParams,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        SafetyConfig {
            threshold: 0.95,
            prior: BetaParams {
                alpha: 1.0,
                beta: 1.0,
            },
        }
    }
}

impl SafetyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::param("safety.threshold", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

pub fn posterior(outcome: DoseOutcome, prior: BetaParams) -> BetaParams {
    BetaParams {
        alpha: prior.alpha + outcome.n_dlt as f64,
        beta: prior.beta + (outcome.n_treated - outcome.n_dlt) as f64,
    }
}

/// `Pr(p > p_target)` under a Beta law.
pub fn exceed_probability(post: BetaParams, p_target: f64) -> f64 {
    if p_target <= 0.0 {
        return 1.0;
    }
    if p_target >= 1.0 {
        return 0.0;
    }
    // upper tail of Beta(a, b) at t equals the lower tail of Beta(b, a) at 1 - t
    beta_reg(post.beta, post.alpha, 1.0 - p_target)
}

/// True when the dose has data and its posterior overdose probability
/// exceeds the configured threshold.
pub fn safety_veto(outcome: DoseOutcome, p_target: f64, cfg: &SafetyConfig) -> bool {
    outcome.n_treated > 0 && exceed_probability(posterior(outcome, cfg.prior), p_target) > cfg.threshold
}

/// `(x + 0.005) / (n + 0.01)`.
pub fn posterior_mean(outcome: DoseOutcome) -> f64 {
    posterior(outcome, ESTIMATION_PRIOR).mean()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoseEstimate {
    pub post_mean: f64,
    pub post_var: f64,
    pub n_treated: u32,
    pub n_dlt: u32,
}

impl DoseEstimate {
    pub fn from_outcome(outcome: DoseOutcome, prior: BetaParams) -> Self {
        let post = posterior(outcome, prior);
        DoseEstimate {
            post_mean: post.mean(),
            post_var: post.variance(),
            n_treated: outcome.n_treated,
            n_dlt: outcome.n_dlt,
        }
    }
}

pub fn dose_estimates(outcomes: &[DoseOutcome], prior: BetaParams) -> Vec<DoseEstimate> {
    outcomes
        .iter()
        .map(|&o| DoseEstimate::from_outcome(o, prior))
        .collect()
}

/// Non-decreasing sequence produced by [`pava`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicEstimate {
    pub values: Vec<f64>,
}

/// Weighted least-squares projection onto non-decreasing sequences.
pub fn pava(means: &[f64], weights: &[f64]) -> Result<IsotonicEstimate> {
    if means.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: means.len(),
            actual: weights.len(),
        });
    }
    if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::param("weights", "must be positive and finite"));
    }
    // blocks of (pooled value, total weight, member count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(means.len());
    for (&m, &w) in means.iter().zip(weights) {
        blocks.push((m, w, 1));
        while blocks.len() > 1 {
            let (v2, w2, c2) = blocks[blocks.len() - 1];
            let (v1, w1, c1) = blocks[blocks.len() - 2];
            if v1 <= v2 {
                break;
            }
            blocks.pop();
            let w = w1 + w2;
            *blocks.last_mut().unwrap() = ((v1 * w1 + v2 * w2) / w, w, c1 + c2);
        }
    }
    let values = blocks
        .into_iter()
        .flat_map(|(v, _, c)| std::iter::repeat_n(v, c))
        .collect();
    Ok(IsotonicEstimate { values })
}

/// How posterior variances become isotonic-regression weights.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PavaWeighting {
    /// Weight `1 / var`, the usual isotonic-regression estimator.
    #[default]
    InverseVariance,
    /// Weight `var`, the literal "weights are the posterior variance" reading.
    Variance,
}

impl PavaWeighting {
    fn weight(&self, var: f64) -> f64 {
        match self {
            PavaWeighting::InverseVariance => 1.0 / var,
            PavaWeighting::Variance => var,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "dose", rename_all = "snake_case")]
pub enum MtdSelection {
    Dose(usize),
    NoSelection,
}

impl MtdSelection {
    pub fn dose(&self) -> Option<usize> {
        match self {
            MtdSelection::Dose(d) => Some(*d),
            MtdSelection::NoSelection => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtdSelectionConfig {
    pub weighting: PavaWeighting,
    /// Drop doses whose isotonic estimate exceeds the interval's upper bound.
    pub cap_at_upper: bool,
}

impl Default for MtdSelectionConfig {
    fn default() -> Self {
        MtdSelectionConfig {
            weighting: PavaWeighting::InverseVariance,
            cap_at_upper: true,
        }
    }
}

pub fn select_mtd(estimates: &[DoseEstimate], ei: &EquivalenceInterval) -> MtdSelection {
    select_mtd_with(estimates, ei, &MtdSelectionConfig::default())
}

/// Isotonic regression over the treated doses, then the dose whose estimate
/// is closest to the target. Among doses sharing the closest estimate the
/// lowest is chosen when that estimate is above target, else the highest.
pub fn select_mtd_with(
    estimates: &[DoseEstimate],
    ei: &EquivalenceInterval,
    cfg: &MtdSelectionConfig,
) -> MtdSelection {
    select_mtd_up_to(estimates, ei, cfg, estimates.len())
}

/// As [`select_mtd_with`], with candidates limited to doses `1..=highest`.
/// Higher treated doses still take part in the isotonic fit.
pub fn select_mtd_up_to(
    estimates: &[DoseEstimate],
    ei: &EquivalenceInterval,
    cfg: &MtdSelectionConfig,
    highest: usize,
) -> MtdSelection {
    let treated: Vec<usize> = (0..estimates.len())
        .filter(|&i| estimates[i].n_treated > 0)
        .collect();
    if treated.is_empty() {
        return MtdSelection::NoSelection;
    }
    let means: Vec<f64> = treated.iter().map(|&i| estimates[i].post_mean).collect();
    let weights: Vec<f64> = treated
        .iter()
        .map(|&i| cfg.weighting.weight(estimates[i].post_var))
        .collect();
    let iso = match pava(&means, &weights) {
        Ok(iso) => iso.values,
        Err(_) => return MtdSelection::NoSelection,
    };
    let p_target = ei.p_target();
    const TIE: f64 = 1e-12;
    let mut best: Option<(usize, f64)> = None;
    for (k, &dose) in treated.iter().enumerate() {
        let v = iso[k];
        if dose >= highest || (cfg.cap_at_upper && v > ei.upper()) {
            continue;
        }
        let dist = (v - p_target).abs();
        best = match best {
            None => Some((dose, v)),
            Some((bd, bv)) => {
                let bdist = (bv - p_target).abs();
                if dist < bdist - TIE {
                    Some((dose, v))
                } else if (dist - bdist).abs() <= TIE && (v - bv).abs() <= TIE && bv <= p_target {
                    // same estimate at or below target: prefer the higher dose
                    Some((dose, v))
                } else {
                    Some((bd, bv))
                }
            }
        };
    }
    match best {
        Some((dose, _)) => MtdSelection::Dose(dose + 1),
        None => MtdSelection::NoSelection,
    }
}

/// Overlays both safety rules on a bounded decision at `dose`.
///
/// Rule 1: a vetoed lowest dose terminates the trial. A vetoed current dose
/// above the lowest becomes `DU`: de-escalate and exclude it and all higher
/// doses. Rule 2: an escalation into a vetoed dose stays put and excludes
/// the target and all higher doses.
pub fn apply_safety_rules(
    decision: Decision,
    dose: DoseIndex,
    current: DoseOutcome,
    next: Option<DoseOutcome>,
    p_target: f64,
    cfg: &SafetyConfig,
) -> Decision {
    let d = dose.value();
    if safety_veto(current, p_target, cfg) {
        if dose.is_lowest() {
            return Decision::terminate();
        }
        let to = decision.target_dose.map_or(d - 1, |t| t.min(d - 1));
        return Decision {
            verdict: Verdict::DeEscalateUnacceptable,
            target_dose: Some(to),
            exclude_from: Some(d),
        };
    }
    if decision.verdict == Verdict::Escalate {
        if let Some(next) = next {
            if safety_veto(next, p_target, cfg) {
                return Decision {
                    verdict: Verdict::Stay,
                    target_dose: Some(d),
                    exclude_from: Some(d + 1),
                };
            }
        }
    }
    decision
}

/// Full i3+3 decision: rule table, dose boundaries, then safety rules.
pub fn decision_with_safety(
    outcome: DoseOutcome,
    dose: DoseIndex,
    ei: &EquivalenceInterval,
    cfg: &SafetyConfig,
    next: Option<DoseOutcome>,
) -> Result<Decision> {
    let bounded = apply_dose_boundaries(i3p3_raw(outcome, ei)?, dose);
    Ok(apply_safety_rules(bounded, dose, outcome, next, ei.p_target(), cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn out(n: u32, x: u32) -> DoseOutcome {
        DoseOutcome::new(n, x).unwrap()
    }

    fn beta(a: f64, b: f64) -> BetaParams {
        BetaParams::new(a, b).unwrap()
    }

    fn est(mean: f64, n: u32) -> DoseEstimate {
        DoseEstimate {
            post_mean: mean,
            post_var: 0.01,
            n_treated: n,
            n_dlt: 0,
        }
    }

    fn ei(p: f64) -> EquivalenceInterval {
        EquivalenceInterval::symmetric(p, 0.05).unwrap()
    }

    #[test]
    fn posterior_examples() {
        assert_eq!(posterior(out(6, 3), ESTIMATION_PRIOR), beta(3.005, 3.005));
        assert_eq!(posterior(out(0, 0), ESTIMATION_PRIOR), ESTIMATION_PRIOR);
        assert_eq!(posterior(out(2, 2), ESTIMATION_PRIOR), beta(2.005, 0.005));
    }

    #[test]
    fn exceed_probability_examples() {
        assert!((exceed_probability(beta(1.0, 1.0), 0.3) - 0.7).abs() < 1e-12);
        assert!(exceed_probability(beta(3.005, 0.005), 0.3) > 0.95);
        assert!(exceed_probability(beta(2.005, 1.005), 0.3) <= 0.95);
        assert_eq!(exceed_probability(beta(2.0, 2.0), 0.0), 1.0);
        assert_eq!(exceed_probability(beta(2.0, 2.0), 1.0), 0.0);
    }

    #[test]
    fn veto_examples() {
        let cfg = SafetyConfig::default();
        assert!(safety_veto(out(3, 3), 0.3, &cfg));
        assert!(!safety_veto(out(3, 0), 0.3, &cfg));
        assert!(safety_veto(out(6, 4), 0.3, &cfg));
        assert!(!safety_veto(out(0, 0), 0.01, &cfg));
    }

    #[test]
    fn posterior_mean_examples() {
        assert!((posterior_mean(out(6, 3)) - 3.005 / 6.01).abs() < 1e-15);
        assert_eq!(posterior_mean(out(0, 0)), 0.5);
        assert!((posterior_mean(out(6, 6)) - 6.005 / 6.01).abs() < 1e-15);
    }

    #[test]
    fn pava_examples() {
        let v = pava(&[0.1, 0.2, 0.3], &[5.0, 1.0, 2.0]).unwrap().values;
        assert_eq!(v, vec![0.1, 0.2, 0.3]);
        let v = pava(&[0.3, 0.1], &[1.0, 1.0]).unwrap().values;
        assert!((v[0] - 0.2).abs() < 1e-15 && (v[1] - 0.2).abs() < 1e-15);
        let v = pava(&[0.3, 0.1], &[3.0, 1.0]).unwrap().values;
        assert!((v[0] - 0.25).abs() < 1e-15 && (v[1] - 0.25).abs() < 1e-15);
        assert!(matches!(
            pava(&[0.1], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(pava(&[0.1], &[0.0]).is_err());
    }

    #[test]
    fn select_examples() {
        let e = ei(0.3);
        let picks = |ms: &[f64]| {
            let v: Vec<_> = ms.iter().map(|&m| est(m, 3)).collect();
            select_mtd(&v, &e)
        };
        assert_eq!(picks(&[0.05, 0.28, 0.45]), MtdSelection::Dose(2));
        assert_eq!(picks(&[0.2, 0.2]), MtdSelection::Dose(2));
        assert_eq!(picks(&[0.32, 0.32]), MtdSelection::Dose(1));
        assert_eq!(picks(&[0.4, 0.5, 0.9]), MtdSelection::NoSelection);
    }

    #[test]
    fn select_ignores_untreated() {
        let e = ei(0.3);
        let v = vec![est(0.1, 3), est(0.3, 0), est(0.5, 0)];
        assert_eq!(select_mtd(&v, &e), MtdSelection::Dose(1));
        assert_eq!(select_mtd(&[est(0.3, 0)], &e), MtdSelection::NoSelection);
    }

    #[test]
    fn candidate_limit_keeps_higher_doses_in_the_fit() {
        let e = ei(0.3);
        let cfg = MtdSelectionConfig::default();
        let v = vec![est(0.1, 3), est(0.31, 3), est(0.2, 3)];
        // doses 2 and 3 pool to 0.255, so dose 2 is still the pick when 3 is barred
        assert_eq!(select_mtd_with(&v, &e, &cfg), MtdSelection::Dose(3));
        assert_eq!(select_mtd_up_to(&v, &e, &cfg, 2), MtdSelection::Dose(2));
        assert_eq!(select_mtd_up_to(&v, &e, &cfg, 1), MtdSelection::Dose(1));
    }

    #[test]
    fn uncapped_selection_can_pick_above_interval() {
        let e = ei(0.3);
        let v = vec![est(0.1, 12), est(0.5, 6)];
        assert_eq!(select_mtd(&v, &e), MtdSelection::Dose(1));
        let cfg = MtdSelectionConfig {
            cap_at_upper: false,
            ..Default::default()
        };
        let v = vec![est(0.05, 12), est(0.5, 6)];
        assert_eq!(select_mtd_with(&v, &e, &cfg), MtdSelection::Dose(2));
    }

    #[test]
    fn safety_examples() {
        let cfg = SafetyConfig::default();
        let e = ei(0.3);
        let d = |v| DoseIndex::new(v, 6).unwrap();
        assert_eq!(
            decision_with_safety(out(3, 3), d(1), &e, &cfg, Some(out(0, 0))),
            Ok(Decision::terminate())
        );
        let blocked = decision_with_safety(out(3, 0), d(2), &e, &cfg, Some(out(3, 3))).unwrap();
        assert_eq!(blocked.verdict, Verdict::Stay);
        assert_eq!(blocked.target_dose, Some(2));
        assert_eq!(blocked.exclude_from, Some(3));
        assert_eq!(
            decision_with_safety(out(3, 0), d(2), &e, &cfg, Some(out(0, 0))),
            Ok(Decision::escalate(3))
        );
        let du = decision_with_safety(out(6, 4), d(3), &e, &cfg, None).unwrap();
        assert_eq!(du.verdict, Verdict::DeEscalateUnacceptable);
        assert_eq!(du.target_dose, Some(2));
        assert_eq!(du.exclude_from, Some(3));
    }

    #[test]
    fn untreated_neighbour_tail_is_far_below_threshold() {
        let tail = exceed_probability(ESTIMATION_PRIOR, 0.3);
        assert!((tail - 0.5).abs() < 0.01, "{tail}");
        assert!(tail < 0.95);
    }

    /// Brute force: the monotone least-squares fit is constant on contiguous
    /// blocks at the block's weighted mean, so try every split into blocks
    /// and keep the best monotone candidate.
    fn brute_force(means: &[f64], weights: &[f64]) -> Vec<f64> {
        let n = means.len();
        let mut best = (f64::INFINITY, vec![]);
        for mask in 0u32..(1 << (n - 1)) {
            let mut fit = Vec::with_capacity(n);
            let mut start = 0;
            for i in 0..n {
                if i == n - 1 || mask & (1 << i) != 0 {
                    let w: f64 = weights[start..=i].iter().sum();
                    let m: f64 = (start..=i).map(|j| means[j] * weights[j]).sum::<f64>() / w;
                    fit.extend(std::iter::repeat_n(m, i + 1 - start));
                    start = i + 1;
                }
            }
            if fit.windows(2).any(|p| p[0] > p[1] + 1e-12) {
                continue;
            }
            let sse: f64 = (0..n).map(|i| weights[i] * (fit[i] - means[i]).powi(2)).sum();
            if sse < best.0 - 1e-15 {
                best = (sse, fit);
            }
        }
        best.1
    }

    proptest! {
        #[test]
        fn pava_is_monotone_and_idempotent(
            v in prop::collection::vec((0u32..=20, 1u32..=5), 1..=8)
        ) {
            let means: Vec<f64> = v.iter().map(|p| p.0 as f64 * 0.05).collect();
            let weights: Vec<f64> = v.iter().map(|p| p.1 as f64).collect();
            let once = pava(&means, &weights).unwrap().values;
            prop_assert!(once.windows(2).all(|w| w[0] <= w[1] + 1e-15));
            let twice = pava(&once, &weights).unwrap().values;
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn pava_matches_brute_force(
            v in prop::collection::vec((0u32..=20, 1u32..=4), 1..=6)
        ) {
            let means: Vec<f64> = v.iter().map(|p| p.0 as f64 * 0.05).collect();
            let weights: Vec<f64> = v.iter().map(|p| p.1 as f64).collect();
            let fit = pava(&means, &weights).unwrap().values;
            let oracle = brute_force(&means, &weights);
            for (a, b) in fit.iter().zip(&oracle) {
                prop_assert!((a - b).abs() < 1e-9, "{:?} vs {:?}", fit, oracle);
            }
        }

        #[test]
        fn posterior_mean_increases_in_x(n in 1u32..60) {
            for x in 0..n {
                prop_assert!(posterior_mean(out(n, x + 1)) > posterior_mean(out(n, x)));
            }
            let big = 10_000u32;
            prop_assert!((posterior_mean(out(big, big / 3)) - (big / 3) as f64 / big as f64).abs() < 1e-5);
        }

        #[test]
        fn selection_is_always_a_treated_dose(
            v in prop::collection::vec((0u32..=6, 0u32..=6), 1..=6),
            p in 5u32..60,
        ) {
            let outcomes: Vec<DoseOutcome> = v.iter().map(|&(n, x)| out(n, x.min(n))).collect();
            let e = ei(p as f64 / 100.0);
            if let MtdSelection::Dose(d) = select_mtd(&dose_estimates(&outcomes, ESTIMATION_PRIOR), &e) {
                prop_assert!(outcomes[d - 1].n_treated > 0);
            }
        }
    }
}
