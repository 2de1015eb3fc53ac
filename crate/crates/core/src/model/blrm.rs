//! Bayesian logistic regression model with escalation with overdose control.
//!
//! `logit p_i = log α + β log(d_i / d_ref)` with a bivariate normal prior on
//! `(log α, log β)`.

use serde::{Deserialize, Serialize};

use super::grid::{linspace, GridPosterior};
use super::TrialData;
use crate::bayes::{apply_safety_rules, SafetyConfig};
use crate::error::{Error, Result};
use crate::rules::{Decision, DoseIndex};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlrmHyper {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlrmConfig {
    pub raw_doses: Vec<f64>,
    pub ref_dose: f64,
    pub hyper: BlrmHyper,
    pub p_target: f64,
    pub eps_lo: f64,
    pub eps_hi: f64,
    #[serde(default = "default_ewoc")]
    pub p_ewoc: f64,
    #[serde(default)]
    pub safety: SafetyConfig,
    /// Use `(pT + eps_lo, pT + eps_hi]` as the target interval instead of
    /// `(pT - eps_lo, pT + eps_hi]`.
    #[serde(default)]
    pub literal_interval: bool,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
}

fn default_ewoc() -> f64 {
    0.5
}

fn default_grid() -> usize {
    201
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl BlrmConfig {
    /// Doses `5, 10, ..., 5I`, reference at dose `ceil((I+1)/2)`, and
    /// weakly informative hyperparameters centered on the target at the
    /// reference dose.
    pub fn default_for(n_doses: usize, p_target: f64, eps_lo: f64, eps_hi: f64) -> Self {
        let raw_doses: Vec<f64> = (1..=n_doses).map(|i| 5.0 * i as f64).collect();
        let ref_idx = (n_doses + 2) / 2;
        let ref_dose = raw_doses.get(ref_idx.max(1) - 1).copied().unwrap_or(5.0);
        BlrmConfig {
            raw_doses,
            ref_dose,
            hyper: BlrmHyper {
                mu1: logit(p_target),
                mu2: 0.0,
                sigma1: 2.0,
                sigma2: 1.0,
                rho: 0.0,
            },
            p_target,
            eps_lo,
            eps_hi,
            p_ewoc: default_ewoc(),
            safety: SafetyConfig::default(),
            literal_interval: false,
            grid_points: default_grid(),
        }
    }

    /// Bounds `(lo, hi]` of the target toxicity interval.
    pub fn target_interval(&self) -> (f64, f64) {
        let lo = if self.literal_interval {
            self.p_target + self.eps_lo
        } else {
            self.p_target - self.eps_lo
        };
        (lo, self.p_target + self.eps_hi)
    }

    pub fn validate(&self) -> Result<()> {
        if self.raw_doses.is_empty() {
            return Err(Error::param("raw_doses", "must not be empty"));
        }
        if self.raw_doses.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::param("raw_doses", "must be positive"));
        }
        if self.raw_doses.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("raw_doses", "must be strictly increasing"));
        }
        if !(self.ref_dose > 0.0 && self.ref_dose.is_finite()) {
            return Err(Error::param("ref_dose", "must be positive"));
        }
        let h = &self.hyper;
        if !(h.mu1.is_finite() && h.mu2.is_finite()) {
            return Err(Error::param("hyper.mu", "must be finite"));
        }
        if !(h.sigma1 > 0.0 && h.sigma2 > 0.0 && h.sigma1.is_finite() && h.sigma2.is_finite()) {
            return Err(Error::param("hyper.sigma", "must be positive"));
        }
        if !(h.rho.abs() < 1.0) {
            return Err(Error::param("hyper.rho", "must lie in (-1, 1)"));
        }
        if !(self.p_target > 0.0 && self.p_target < 1.0) {
            return Err(Error::param("p_target", "must lie in (0, 1)"));
        }
        if !(self.eps_lo >= 0.0 && self.eps_hi >= 0.0) {
            return Err(Error::param("eps", "must be non-negative"));
        }
        let (lo, hi) = self.target_interval();
        if !(lo < hi && hi < 1.0) {
            return Err(Error::param("eps", "target interval is empty or reaches 1"));
        }
        if !(self.p_ewoc > 0.0 && self.p_ewoc <= 1.0) {
            return Err(Error::param("p_ewoc", "must lie in (0, 1]"));
        }
        if self.grid_points < 3 {
            return Err(Error::param("grid_points", "need at least 3 points"));
        }
        self.safety.validate()
    }
}

/// Posterior probability that a dose's toxicity is under, inside or over
/// the target interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalProbs {
    pub under: f64,
    pub target: f64,
    pub over: f64,
}

/// A BLRM configuration with per-point, per-dose log-likelihood terms and
/// interval membership precomputed over the grid.
#[derive(Debug, Clone)]
pub struct BlrmModel {
    cfg: BlrmConfig,
    axes: [Vec<f64>; 2],
    log_prior: Vec<f64>,
    /// `[point * I + dose]` → `(ln p, ln(1 - p))`
    log_tox: Vec<(f64, f64)>,
    /// `[point * I + dose]` → 0 under, 1 target, 2 over
    region: Vec<u8>,
}

impl BlrmModel {
    pub fn new(cfg: BlrmConfig) -> Result<Self> {
        cfg.validate()?;
        let h = cfg.hyper;
        let n = cfg.grid_points;
        let a_axis = linspace(h.mu1, 6.0 * h.sigma1, n);
        let b_axis = linspace(h.mu2, 6.0 * h.sigma2, n);
        let log_ratio: Vec<f64> = cfg.raw_doses.iter().map(|d| (d / cfg.ref_dose).ln()).collect();
        let (lo, hi) = cfg.target_interval();
        let one_minus_r2 = 1.0 - h.rho * h.rho;
        let n_doses = log_ratio.len();

        let mut log_prior = Vec::with_capacity(n * n);
        let mut log_tox = Vec::with_capacity(n * n * n_doses);
        let mut region = Vec::with_capacity(n * n * n_doses);
        for &a in &a_axis {
            let za = (a - h.mu1) / h.sigma1;
            for &b in &b_axis {
                let zb = (b - h.mu2) / h.sigma2;
                log_prior.push(-(za * za - 2.0 * h.rho * za * zb + zb * zb) / (2.0 * one_minus_r2));
                let beta = b.exp();
                for &lr in &log_ratio {
                    let eta = a + beta * lr;
                    log_tox.push((-softplus(-eta), -softplus(eta)));
                    let p = 1.0 / (1.0 + (-eta).exp());
                    region.push(if p <= lo {
                        0
                    } else if p <= hi {
                        1
                    } else {
                        2
                    });
                }
            }
        }
        Ok(BlrmModel {
            cfg,
            axes: [a_axis, b_axis],
            log_prior,
            log_tox,
            region,
        })
    }

    pub fn config(&self) -> &BlrmConfig {
        &self.cfg
    }

    pub fn n_doses(&self) -> usize {
        self.cfg.raw_doses.len()
    }

    pub fn posterior(&self, data: &TrialData) -> Result<GridPosterior> {
        let n_doses = self.n_doses();
        data.check_len(n_doses)?;
        let treated: Vec<(usize, f64, f64)> = data
            .outcomes()
            .filter(|(_, o)| o.n_treated > 0)
            .map(|(i, o)| (i, o.n_dlt as f64, (o.n_treated - o.n_dlt) as f64))
            .collect();
        let log_w = self
            .log_prior
            .iter()
            .enumerate()
            .map(|(k, &lp)| {
                let row = &self.log_tox[k * n_doses..(k + 1) * n_doses];
                treated
                    .iter()
                    .fold(lp, |acc, &(i, y, rest)| acc + y * row[i].0 + rest * row[i].1)
            })
            .collect();
        GridPosterior::from_log_weights(self.axes.to_vec(), log_w)
    }

    /// Under/target/over probabilities for every dose.
    pub fn interval_probs(&self, post: &GridPosterior) -> Vec<IntervalProbs> {
        let n_doses = self.n_doses();
        let mut acc = vec![[0.0f64; 3]; n_doses];
        for (k, &m) in post.masses.iter().enumerate() {
            let row = &self.region[k * n_doses..(k + 1) * n_doses];
            for (i, &r) in row.iter().enumerate() {
                acc[i][r as usize] += m;
            }
        }
        acc.into_iter()
            .map(|[under, target, over]| IntervalProbs {
                under,
                target,
                over,
            })
            .collect()
    }

    /// Whether `probs` satisfies overdose control.
    pub fn ewoc_ok(&self, probs: &IntervalProbs) -> bool {
        probs.over < self.cfg.p_ewoc
    }

    /// Next-dose recommendation. Doses at or above `highest_allowed + 1`
    /// are excluded. Escalation is limited to one level above both the
    /// current dose and the highest dose tried so far.
    pub fn recommend(
        &self,
        data: &TrialData,
        current: DoseIndex,
        highest_allowed: usize,
    ) -> Result<Decision> {
        let post = self.posterior(data)?;
        let probs = self.interval_probs(&post);
        let best = probs
            .iter()
            .enumerate()
            .take(highest_allowed.max(1))
            .filter(|(_, p)| self.ewoc_ok(p))
            .fold(None::<(usize, f64)>, |best, (i, p)| match best {
                Some((_, t)) if p.target <= t => best,
                _ => Some((i, p.target)),
            });
        let Some((idx, _)) = best else {
            return Ok(Decision::terminate());
        };
        let d = current.value();
        let cap = (d + 1).min(data.highest_tried() + 1);
        let target = (idx + 1).min(cap);
        let decision = Decision::toward(d, target);
        Ok(apply_safety_rules(
            decision,
            current,
            data.get(d - 1),
            (d < data.len()).then(|| data.get(d)),
            self.cfg.p_target,
            &self.cfg.safety,
        ))
    }
}

pub fn blrm_posterior(data: &TrialData, cfg: &BlrmConfig) -> Result<GridPosterior> {
    BlrmModel::new(cfg.clone())?.posterior(data)
}

pub fn blrm_recommend(data: &TrialData, current: DoseIndex, cfg: &BlrmConfig) -> Result<Decision> {
    BlrmModel::new(cfg.clone())?.recommend(data, current, current.total())
}
