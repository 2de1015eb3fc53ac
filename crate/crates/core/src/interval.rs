//! Target toxicity rate and the equivalence interval around it.
//!
//! Bounds are held as fixed-point integers (1e-9 resolution) so that an
//! observed rate `x/n` can be classified by integer cross-multiplication.
//! Decision tables therefore never flip on floating-point noise such as
//! `0.17 - 0.05 = 0.12000000000000001`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const SCALE: i64 = 1_000_000_000;

pub(crate) fn to_fixed(p: f64) -> i64 {
    (p * SCALE as f64).round() as i64
}

/// Position of a rate relative to the equivalence interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Below,
    Inside,
    Above,
}

/// `[p_target - eps_lo, p_target + eps_hi]`, closed on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntervalSpec", into = "IntervalSpec")]
pub struct EquivalenceInterval {
    p_target: f64,
    eps_lo: f64,
    eps_hi: f64,
    target_fx: i64,
    lower_fx: i64,
    upper_fx: i64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct IntervalSpec {
    p_target: f64,
    eps_lo: f64,
    eps_hi: f64,
}

impl TryFrom<IntervalSpec> for EquivalenceInterval {
    type Error = Error;

    fn try_from(s: IntervalSpec) -> Result<Self> {
        EquivalenceInterval::new(s.p_target, s.eps_lo, s.eps_hi)
    }
}

impl From<EquivalenceInterval> for IntervalSpec {
    fn from(ei: EquivalenceInterval) -> Self {
        IntervalSpec {
            p_target: ei.p_target,
            eps_lo: ei.eps_lo,
            eps_hi: ei.eps_hi,
        }
    }
}

impl EquivalenceInterval {
    pub fn new(p_target: f64, eps_lo: f64, eps_hi: f64) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidInterval(msg));
        if !(p_target.is_finite() && eps_lo.is_finite() && eps_hi.is_finite()) {
            return bad("values must be finite".into());
        }
        if !(p_target > 0.0 && p_target < 1.0) {
            return bad(format!("target {p_target} must lie in (0, 1)"));
        }
        if eps_lo < 0.0 || eps_hi < 0.0 {
            return bad(format!("half-widths must be non-negative (got {eps_lo}, {eps_hi})"));
        }
        let target_fx = to_fixed(p_target);
        let lower_fx = target_fx - to_fixed(eps_lo);
        let upper_fx = target_fx + to_fixed(eps_hi);
        if lower_fx < 0 {
            return bad(format!("lower bound {p_target} - {eps_lo} is negative"));
        }
        if upper_fx > SCALE {
            return bad(format!("upper bound {p_target} + {eps_hi} exceeds 1"));
        }
        Ok(EquivalenceInterval {
            p_target,
            eps_lo,
            eps_hi,
            target_fx,
            lower_fx,
            upper_fx,
        })
    }

    pub fn symmetric(p_target: f64, eps: f64) -> Result<Self> {
        Self::new(p_target, eps, eps)
    }

    pub fn p_target(&self) -> f64 {
        self.p_target
    }

    pub fn eps_lo(&self) -> f64 {
        self.eps_lo
    }

    pub fn eps_hi(&self) -> f64 {
        self.eps_hi
    }

    pub fn lower(&self) -> f64 {
        self.lower_fx as f64 / SCALE as f64
    }

    pub fn upper(&self) -> f64 {
        self.upper_fx as f64 / SCALE as f64
    }

    /// Classifies the rational `num / den`. `den` must be positive; `num`
    /// may be negative (the `(x - 1) / n` rate at `x = 0`).
    pub fn classify_ratio(&self, num: i64, den: u32) -> Region {
        debug_assert!(den > 0);
        let lhs = num as i128 * SCALE as i128;
        let den = den as i128;
        if lhs < self.lower_fx as i128 * den {
            Region::Below
        } else if lhs > self.upper_fx as i128 * den {
            Region::Above
        } else {
            Region::Inside
        }
    }

    /// Classifies a real-valued rate after rounding it to the fixed-point grid.
    pub fn classify(&self, rate: f64) -> Region {
        let r = to_fixed(rate);
        if r < self.lower_fx {
            Region::Below
        } else if r > self.upper_fx {
            Region::Above
        } else {
            Region::Inside
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        self.classify(p) == Region::Inside
    }
}

pub fn classify_vs_interval(rate: f64, ei: &EquivalenceInterval) -> Region {
    ei.classify(rate)
}
