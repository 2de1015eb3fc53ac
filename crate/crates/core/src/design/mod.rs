//! Dose-finding designs behind one trait, looked up by name at runtime.

mod blrm;
mod boin;
mod crm;
mod i3p3;
mod three_plus_three;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bayes::{MtdSelection, PavaWeighting, SafetyConfig};
use crate::error::{Error, Result};
use crate::interval::EquivalenceInterval;
use crate::model::BlrmHyper;
use crate::rules::{Decision, DoseIndex, DoseOutcome};
use crate::state::{Cohort, Step, TrialState};

pub use self::blrm::BlrmDesign;
pub use self::boin::BoinDesign;
pub use self::crm::CrmDesign;
pub use self::i3p3::I3p3Design;
pub use self::three_plus_three::ThreePlusThreeDesign;

pub trait Design: Send + Sync + fmt::Debug {
    /// Canonical registry name.
    fn name(&self) -> &'static str;

    fn n_doses(&self) -> usize;

    /// Next assignment after `last` was recorded into `state`.
    fn decide(&self, state: &TrialState, last: Option<&Cohort>) -> Result<Step>;

    fn select_mtd(&self, state: &TrialState) -> MtdSelection;

    /// Decision at an interior dose with no neighbor data, for printed tables.
    fn table_decision(&self, outcome: DoseOutcome, dose: DoseIndex) -> Result<Decision> {
        let _ = (outcome, dose);
        Err(Error::NoStaticTable(self.name().to_string()))
    }

    /// Whether a table cell exists for `n` patients (3+3 only tabulates 3 and 6).
    fn tabulates(&self, n: u32) -> bool {
        n > 0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignOptions {
    #[serde(default)]
    pub safety: SafetyConfig,
    #[serde(default)]
    pub pava_weighting: PavaWeighting,
    /// BOIN boundaries; the interval bounds when absent.
    #[serde(default)]
    pub boin_lambda_e: Option<f64>,
    #[serde(default)]
    pub boin_lambda_d: Option<f64>,
    #[serde(default)]
    pub crm_skeleton: Option<Vec<f64>>,
    #[serde(default)]
    pub crm_prior_var: Option<f64>,
    #[serde(default)]
    pub blrm_hyper: Option<BlrmHyper>,
    #[serde(default)]
    pub blrm_raw_doses: Option<Vec<f64>>,
    #[serde(default)]
    pub blrm_p_ewoc: Option<f64>,
    #[serde(default)]
    pub blrm_literal_interval: bool,
}

/// Serializable recipe for a design instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    pub design: String,
    pub p_target: f64,
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub n_doses: usize,
    #[serde(default)]
    pub options: DesignOptions,
}

impl DesignSpec {
    pub fn new(design: &str, p_target: f64, eps_lo: f64, eps_hi: f64, n_doses: usize) -> Self {
        DesignSpec {
            design: design.to_string(),
            p_target,
            eps_lo,
            eps_hi,
            n_doses,
            options: DesignOptions::default(),
        }
    }

    pub fn interval(&self) -> Result<EquivalenceInterval> {
        EquivalenceInterval::new(self.p_target, self.eps_lo, self.eps_hi)
    }

    fn check_doses(&self) -> Result<()> {
        if self.n_doses == 0 {
            return Err(Error::param("n_doses", "need at least one dose"));
        }
        Ok(())
    }
}

pub type DesignFactory = fn(&DesignSpec) -> Result<Box<dyn Design>>;

struct Entry {
    name: &'static str,
    aliases: &'static [&'static str],
    summary: &'static str,
    factory: DesignFactory,
}

/// Name → constructor table.
pub struct DesignRegistry {
    entries: Vec<Entry>,
}

impl DesignRegistry {
    pub fn empty() -> Self {
        DesignRegistry {
            entries: Vec::new(),
        }
    }

    /// i3+3, 3+3, BOIN, CRM and BLRM.
    pub fn standard() -> Self {
        let mut r = DesignRegistry::empty();
        r.register("i3p3", &["i3+3"], "interval 3+3 with Beta safety rules", |s| {
            Ok(Box::new(I3p3Design::from_spec(s)?))
        });
        r.register("3p3", &["3+3"], "classic 3+3 with cohorts of three", |s| {
            Ok(Box::new(ThreePlusThreeDesign::from_spec(s)?))
        });
        r.register("boin", &[], "Bayesian optimal interval", |s| {
            Ok(Box::new(BoinDesign::from_spec(s)?))
        });
        r.register("crm", &[], "continual reassessment, power model", |s| {
            Ok(Box::new(CrmDesign::from_spec(s)?))
        });
        r.register("blrm", &[], "logistic model with overdose control", |s| {
            Ok(Box::new(BlrmDesign::from_spec(s)?))
        });
        r
    }

    pub fn register(
        &mut self,
        name: &'static str,
        aliases: &'static [&'static str],
        summary: &'static str,
        factory: DesignFactory,
    ) {
        self.entries.retain(|e| e.name != name);
        self.entries.push(Entry {
            name,
            aliases,
            summary,
            factory,
        });
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name).collect()
    }

    /// `(name, summary)` pairs in registration order.
    pub fn describe(&self) -> Vec<(&'static str, &'static str)> {
        self.entries.iter().map(|e| (e.name, e.summary)).collect()
    }

    fn entry(&self, name: &str) -> Result<&Entry> {
        let key = name.trim().to_ascii_lowercase();
        self.entries
            .iter()
            .find(|e| e.name == key || e.aliases.contains(&key.as_str()))
            .ok_or_else(|| Error::UnknownDesign {
                name: name.to_string(),
                valid: self.names().join(", "),
            })
    }

    /// Canonical name for `name` or one of its aliases.
    pub fn resolve(&self, name: &str) -> Result<&'static str> {
        self.entry(name).map(|e| e.name)
    }

    pub fn build(&self, spec: &DesignSpec) -> Result<Box<dyn Design>> {
        (self.entry(&spec.design)?.factory)(spec)
    }
}

impl Default for DesignRegistry {
    fn default() -> Self {
        DesignRegistry::standard()
    }
}

/// Builds `spec` from the standard registry.
pub fn build_design(spec: &DesignSpec) -> Result<Box<dyn Design>> {
    DesignRegistry::standard().build(spec)
}

/// `d + 1` if it is a real dose still open for assignment.
pub(crate) fn open_next(state: &TrialState, d: usize) -> bool {
    d < state.n_doses() && d < state.highest_allowed()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_and_aliases() {
        let r = DesignRegistry::standard();
        assert_eq!(r.names(), vec!["i3p3", "3p3", "boin", "crm", "blrm"]);
        assert_eq!(r.resolve("i3+3").unwrap(), "i3p3");
        assert_eq!(r.resolve("3+3").unwrap(), "3p3");
        assert_eq!(r.resolve("BOIN").unwrap(), "boin");
        match r.resolve("mtpi") {
            Err(Error::UnknownDesign { valid, .. }) => {
                assert_eq!(valid, "i3p3, 3p3, boin, crm, blrm")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn builds_every_standard_design() {
        let r = DesignRegistry::standard();
        for name in r.names() {
            let d = r.build(&DesignSpec::new(name, 0.3, 0.05, 0.05, 6)).unwrap();
            assert_eq!(d.name(), name);
            assert_eq!(d.n_doses(), 6);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let r = DesignRegistry::standard();
        assert!(r.build(&DesignSpec::new("i3p3", 0.3, 0.05, 0.75, 6)).is_err());
        assert!(r.build(&DesignSpec::new("boin", 0.3, 0.05, 0.05, 0)).is_err());
        assert!(matches!(
            r.build(&DesignSpec::new("crm", 0.42, 0.05, 0.05, 6)),
            Err(Error::NoDefaultSkeleton(_))
        ));
    }

    #[test]
    fn spec_round_trips_through_json() {
        let mut s = DesignSpec::new("crm", 0.3, 0.05, 0.05, 6);
        s.options.crm_prior_var = Some(0.5);
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<DesignSpec>(&j).unwrap(), s);
        assert!(serde_json::from_str::<DesignSpec>(r#"{"design":"i3p3","p_target":0.3,"eps_lo":0.05,"eps_hi":0.05,"n_doses":6,"bogus":1}"#).is_err());
    }

    #[test]
    fn custom_registration() {
        let mut r = DesignRegistry::empty();
        r.register("only", &["alias"], "test", |s| Ok(Box::new(I3p3Design::from_spec(s)?)));
        assert_eq!(r.resolve("alias").unwrap(), "only");
        assert!(r.resolve("i3p3").is_err());
    }
}
