//! Continual reassessment method with the one-parameter power model
//! `p_i = c_i^θ` and a lognormal prior on `θ`.

use serde::{Deserialize, Serialize};

use super::grid::{linspace, GridPosterior};
use super::TrialData;
use crate::bayes::{apply_safety_rules, SafetyConfig};
use crate::error::{Error, Result};
use crate::rules::{Decision, DoseIndex, DoseOutcome};

const SKELETON_FILE: &str = include_str!("../../data/crm_skeletons.toml");

#[derive(Debug, Deserialize)]
struct SkeletonFile {
    skeleton: Vec<SkeletonEntry>,
}

#[derive(Debug, Deserialize)]
struct SkeletonEntry {
    p_target: f64,
    values: Vec<f64>,
}

/// Shipped six-dose skeleton for `p_target`, if one exists.
pub fn default_skeleton(p_target: f64, n_doses: usize) -> Result<Vec<f64>> {
    let file: SkeletonFile =
        toml::from_str(SKELETON_FILE).expect("bundled skeleton file is valid TOML");
    file.skeleton
        .into_iter()
        .find(|s| (s.p_target - p_target).abs() < 1e-9 && s.values.len() == n_doses)
        .map(|s| s.values)
        .ok_or(Error::NoDefaultSkeleton(p_target))
}

/// Whether the second lognormal parameter is a variance or a standard deviation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorSpread {
    #[default]
    Variance,
    StdDev,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrmConfig {
    pub skeleton: Vec<f64>,
    #[serde(default)]
    pub log_theta_prior_mean: f64,
    #[serde(default = "default_prior_var")]
    pub log_theta_prior_var: f64,
    #[serde(default)]
    pub spread_is: PriorSpread,
    pub p_target: f64,
    #[serde(default)]
    pub safety: SafetyConfig,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    /// Half-width used when the skeleton was built. Recorded, not used.
    #[serde(default = "default_half_width")]
    pub indifference_half_width: f64,
}

fn default_prior_var() -> f64 {
    1.34
}

fn default_grid() -> usize {
    2001
}

fn default_half_width() -> f64 {
    0.05
}

impl CrmConfig {
    pub fn new(skeleton: Vec<f64>, p_target: f64) -> Self {
        CrmConfig {
            skeleton,
            log_theta_prior_mean: 0.0,
            log_theta_prior_var: default_prior_var(),
            spread_is: PriorSpread::Variance,
            p_target,
            safety: SafetyConfig::default(),
            grid_points: default_grid(),
            indifference_half_width: default_half_width(),
        }
    }

    pub fn with_default_skeleton(p_target: f64, n_doses: usize) -> Result<Self> {
        Ok(Self::new(default_skeleton(p_target, n_doses)?, p_target))
    }

    pub fn log_theta_sd(&self) -> f64 {
        match self.spread_is {
            PriorSpread::Variance => self.log_theta_prior_var.sqrt(),
            PriorSpread::StdDev => self.log_theta_prior_var,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.skeleton.is_empty() {
            return Err(Error::param("skeleton", "must not be empty"));
        }
        if self.skeleton.iter().any(|&c| !(c > 0.0 && c < 1.0)) {
            return Err(Error::param("skeleton", "values must lie in (0, 1)"));
        }
        if self.skeleton.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("skeleton", "values must be strictly increasing"));
        }
        if !(self.p_target > 0.0 && self.p_target < 1.0) {
            return Err(Error::param("p_target", "must lie in (0, 1)"));
        }
        if !(self.log_theta_prior_var > 0.0 && self.log_theta_prior_var.is_finite()) {
            return Err(Error::param("log_theta_prior_var", "must be positive"));
        }
        if self.grid_points < 3 {
            return Err(Error::param("grid_points", "need at least 3 points"));
        }
        self.safety.validate()
    }
}

/// A CRM configuration with its grid and log-prior precomputed.
#[derive(Debug, Clone)]
pub struct CrmModel {
    cfg: CrmConfig,
    log_theta: Vec<f64>,
    theta: Vec<f64>,
    log_prior: Vec<f64>,
    log_skeleton: Vec<f64>,
}

impl CrmModel {
    pub fn new(cfg: CrmConfig) -> Result<Self> {
        cfg.validate()?;
        let sd = cfg.log_theta_sd();
        let log_theta = linspace(cfg.log_theta_prior_mean, 6.0 * sd, cfg.grid_points);
        let theta = log_theta.iter().map(|l| l.exp()).collect();
        let log_prior = log_theta
            .iter()
            .map(|l| {
                let z = (l - cfg.log_theta_prior_mean) / sd;
                -0.5 * z * z
            })
            .collect();
        let log_skeleton = cfg.skeleton.iter().map(|c| c.ln()).collect();
        Ok(CrmModel {
            cfg,
            log_theta,
            theta,
            log_prior,
            log_skeleton,
        })
    }

    pub fn config(&self) -> &CrmConfig {
        &self.cfg
    }

    pub fn n_doses(&self) -> usize {
        self.cfg.skeleton.len()
    }

    pub fn posterior(&self, data: &TrialData) -> Result<GridPosterior> {
        data.check_len(self.n_doses())?;
        let treated: Vec<(f64, f64, f64)> = data
            .outcomes()
            .filter(|(_, o)| o.n_treated > 0)
            .map(|(i, o)| {
                (
                    self.log_skeleton[i],
                    o.n_dlt as f64,
                    (o.n_treated - o.n_dlt) as f64,
                )
            })
            .collect();
        let log_w = self
            .theta
            .iter()
            .zip(&self.log_prior)
            .map(|(&th, &lp)| {
                treated.iter().fold(lp, |acc, &(lc, y, rest)| {
                    let lp_tox = th * lc;
                    // ln(1 - c^θ) without cancellation for small θ
                    let lq_tox = (-lp_tox.exp_m1()).ln();
                    let mut acc = acc + y * lp_tox;
                    if rest > 0.0 {
                        acc += rest * lq_tox;
                    }
                    acc
                })
            })
            .collect();
        GridPosterior::from_log_weights(vec![self.log_theta.clone()], log_w)
    }

    /// Posterior mean of `θ` (not of `log θ`).
    pub fn theta_hat(&self, data: &TrialData) -> Result<f64> {
        Ok(self.posterior(data)?.expect(|c| c[0].exp()))
    }

    /// Fitted toxicity curve `c_i^θ̂`.
    pub fn fitted_curve(&self, theta_hat: f64) -> Vec<f64> {
        self.cfg.skeleton.iter().map(|c| c.powf(theta_hat)).collect()
    }

    /// Next-dose recommendation. `highest_allowed` caps the target below any
    /// excluded doses; `last_cohort` feeds the escalation block.
    pub fn recommend(
        &self,
        data: &TrialData,
        current: DoseIndex,
        last_cohort: Option<DoseOutcome>,
        highest_allowed: usize,
    ) -> Result<Decision> {
        let curve = self.fitted_curve(self.theta_hat(data)?);
        let p_target = self.cfg.p_target;
        let candidate = closest_to(&curve, p_target) + 1;
        let d = current.value();
        let mut target = candidate.min(d + 1).min(highest_allowed.max(1));
        if target > d {
            if let Some(last) = last_cohort {
                if last.n_treated > 0 && last.n_dlt as f64 > p_target * last.n_treated as f64 {
                    target = d;
                }
            }
        }
        let decision = Decision::toward(d, target);
        Ok(apply_safety_rules(
            decision,
            current,
            data.get(d - 1),
            (d < data.len()).then(|| data.get(d)),
            p_target,
            &self.cfg.safety,
        ))
    }
}

/// Index of the value closest to `target`; ties go to the lower index.
pub(crate) fn closest_to(values: &[f64], target: f64) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if (v - target).abs() < (values[best] - target).abs() {
            best = i;
        }
    }
    best
}

pub fn crm_posterior(data: &TrialData, cfg: &CrmConfig) -> Result<GridPosterior> {
    CrmModel::new(cfg.clone())?.posterior(data)
}

pub fn crm_recommend(
    data: &TrialData,
    current: DoseIndex,
    last_cohort: DoseOutcome,
    cfg: &CrmConfig,
) -> Result<Decision> {
    CrmModel::new(cfg.clone())?.recommend(data, current, Some(last_cohort), current.total())
}
